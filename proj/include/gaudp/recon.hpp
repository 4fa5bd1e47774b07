#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gaudp/camera.hpp"
#include "gaudp/gaussian.hpp"
#include "gaudp/renderer.hpp"

namespace gaudp {

enum class RgbLoss { L2, L1Dssim };

struct ReconConfig {
  double depth_weight = 0.5;   // the loss-balancing weight on depth supervision
  int iterations = 1000;
  double learning_rate = 1e-2;
  double init_depth = 1.0;     // used when no depth maps are given
  RgbLoss rgb_loss = RgbLoss::L2;
  bool normalized_depth = false;  // compare depth/alpha instead of raw composited depth
  double init_jitter = 0.0;       // seeded perturbation of the initialization
  std::uint64_t seed = 0;
  double mu_freeze_frac = 0.1;    // mu frozen for this fraction of iterations (depth init only)
  int report_every = 100;
  // per-class Adam lr multipliers [mu, log_scale, rot, opacity, color];
  // position updates are damped, everything else runs at the base rate
  double lr_mu = 0.3, lr_scale = 1.0, lr_rot = 1.0, lr_opacity = 1.0, lr_color = 1.0;
  // cosine decay of the base rate to this fraction by the final iteration
  double lr_decay_floor = 0.1;

  void validate() const;
};

struct ReconViews {
  std::vector<nn::Tensor64> images;  // each [H,W,3] in [0,1]
  std::vector<nn::Tensor64> depths;  // each [H,W]; empty vector = no depth; 0 pixels invalid
  std::vector<CameraModel> cameras;

  bool has_depth() const { return !depths.empty(); }
  void validate() const;
};

struct ReconLoss {
  double total = 0;
  double rgb = 0;
  double depth = 0;
  std::vector<RawGrad> grads;  // aligned with flatten(field)
};

struct ReconReportRow {
  int iteration;
  double loss;
  double train_psnr;
  double train_ssim;
};

struct ReconResult {
  GaussianField field;
  std::vector<ReconReportRow> report;
};

struct ReconMetrics {
  double psnr = 0;
  double ssim = 0;
};

// One camera-local pixel-aligned map per view: unprojection at ground-truth
// depth when available (else init_depth), colors matching source pixels,
// ~1-pixel footprints, opacity 0.1, identity rotation.
GaussianField init_field(const ReconViews& views, const ReconConfig& cfg);

// L_rec = sum_v L_rgb + depth_weight * sum_v L_depth with gradients through
// the renderer, summed over views in view order.
ReconLoss loss_rec(const GaussianField& field, const ReconViews& views, const ReconConfig& cfg);

// Adam minimization of loss_rec starting from init_field.
ReconResult build_field(const ReconViews& views, const ReconConfig& cfg);

ReconMetrics evaluate_recon(const GaussianField& field, const ReconViews& train_views,
                            const std::vector<nn::Tensor64>& heldout_images,
                            const std::vector<CameraModel>& heldout_cams);

// Renders view v of a camera-local field whose origin cameras are the
// training cameras.
RenderOutput render_view(const GaussianField& field, const std::vector<CameraModel>& origin_cams,
                         const CameraModel& cam);

// Depth map for dataset-style supervision: depth / alpha where alpha > 0.5,
// zero elsewhere.
nn::Tensor64 masked_normalized_depth(const RenderOutput& out);

}  // namespace gaudp
