#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "gaudp/camera.hpp"
#include "gaudp/gaussian.hpp"
#include "gaudp/nn/tensor.hpp"

namespace gaudp {

struct RenderOptions {
  int tile_size = 16;
  double blur = 0.3;           // low-pass dilation added to cov2d, px^2
  double alpha_clamp = 0.99;   // per-pixel alpha ceiling
  double t_stop = 1e-4;        // traversal stops when transmittance drops below
  double window_pad = 2.0;     // rasterization window beyond the 3-sigma radius, px
  Vec3 background = Vec3::Zero();
};

struct ProjectedGaussian {
  Vec2 mean2d = Vec2::Zero();
  Mat2 cov2d = Mat2::Identity();  // after low-pass dilation
  double depth = 0;               // view-space z
  Vec3 color_eval = Vec3::Zero();
  double opacity = 0;
  int source_index = 0;
};

struct RenderOutput {
  nn::Tensor64 rgb;    // [H,W,3]
  nn::Tensor64 depth;  // [H,W], alpha-weighted without renormalization
  nn::Tensor64 alpha;  // [H,W]
  int skipped_degenerate = 0;  // primitives dropped for det(cov2d) < 1e-12
};

// Gradients with respect to one raw Gaussian's parameters.
struct RawGrad {
  Vec3 mu = Vec3::Zero();
  Vec3 log_scale = Vec3::Zero();
  Vec4 rot_raw = Vec4::Zero();
  double opacity_logit = 0;
  Vec3 color_raw = Vec3::Zero();
  Mat3 sh = Mat3::Zero();  // meaningful only when the input carried SH
};

struct UpstreamGrad {
  nn::Tensor64 d_rgb;    // [H,W,3]
  nn::Tensor64 d_depth;  // [H,W]
  nn::Tensor64 d_alpha;  // [H,W]

  static UpstreamGrad zeros(int height, int width);
};

// Flattened render input: raw Gaussians with a per-Gaussian group id and a
// rigid map-frame -> camera-frame transform per group.
struct RenderBatch {
  std::vector<const RawGaussian*> raws;
  std::vector<int> group;
  std::vector<RigidTransform> group_to_cam;

  void push(const RawGaussian* g, int grp) {
    raws.push_back(g);
    group.push_back(grp);
  }
  std::size_t size() const { return raws.size(); }
};

// Opaque forward cache consumed by render_backward. shared_ptr so the
// deleter is captured where the type is complete.
struct RenderCache;
using RenderCachePtr = std::shared_ptr<RenderCache>;

// Projects one activated Gaussian. Returns nullopt when culled (z outside
// (z_near, z_far) or the 3-sigma screen footprint misses the image).
std::optional<ProjectedGaussian> project(const Gaussian& g, const CameraModel& cam,
                                         const RenderOptions& opts = RenderOptions(),
                                         int source_index = 0);

// Rasterizes pre-projected primitives (already camera-frame, un-culled).
RenderOutput rasterize(const std::vector<ProjectedGaussian>& projected, const CameraModel& cam,
                       const RenderOptions& opts);

// Full differentiable pipeline over raw parameters. When `cache` is non-null,
// the forward pass stores what the backward pass needs.
RenderOutput render_batch(const RenderBatch& batch, const CameraModel& cam,
                          const RenderOptions& opts, RenderCachePtr* cache = nullptr);

// Analytic gradients for every raw parameter of every contributing Gaussian;
// zeros for culled/skipped ones. Requires the forward cache.
std::vector<RawGrad> render_batch_backward(const RenderBatch& batch, const CameraModel& cam,
                                           const RenderOptions& opts, const RenderCache& cache,
                                           const UpstreamGrad& upstream);

// Renders a Gaussian field from `cam`. CameraLocal fields need the origin
// cameras to resolve per-map relative poses; World fields ignore them.
RenderOutput render(const GaussianField& field, const std::vector<CameraModel>& origin_cams,
                    const CameraModel& cam, const RenderOptions& opts = RenderOptions(),
                    RenderCachePtr* cache = nullptr);

RenderBatch field_batch(const GaussianField& field, const std::vector<CameraModel>& origin_cams,
                        const CameraModel& cam);

}  // namespace gaudp
