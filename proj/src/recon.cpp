#include "gaudp/recon.hpp"

#include <algorithm>
#include <cmath>

#include "gaudp/common.hpp"
#include "gaudp/metrics.hpp"
#include "gaudp/nn/adam.hpp"
#include "gaudp/nn/rng.hpp"

namespace gaudp {

void ReconConfig::validate() const {
  if (iterations < 1) throw ConfigError("recon: iterations must be >= 1");
  if (learning_rate <= 0) throw ConfigError("recon: learning_rate must be positive");
  if (depth_weight < 0) throw ConfigError("recon: depth_weight must be >= 0");
}

void ReconViews::validate() const {
  if (images.size() < 2) throw ConfigError("recon: need at least 2 views");
  if (images.size() != cameras.size()) throw ConfigError("recon: one camera per image");
  if (has_depth() && depths.size() != images.size())
    throw ConfigError("recon: depth count must match image count");
  for (std::size_t v = 0; v < images.size(); ++v) {
    const auto& img = images[v];
    if (img.rank() != 3 || img.dim(2) != 3) throw ConfigError("recon: images must be [H,W,3]");
    if (static_cast<int>(img.dim(0)) != cameras[v].height ||
        static_cast<int>(img.dim(1)) != cameras[v].width)
      throw ConfigError("recon: image dimensions disagree with camera");
    if (has_depth() &&
        (depths[v].rank() != 2 || depths[v].dim(0) != img.dim(0) || depths[v].dim(1) != img.dim(1)))
      throw ConfigError("recon: depth dimensions disagree with image");
  }
}

GaussianField init_field(const ReconViews& views, const ReconConfig& cfg) {
  views.validate();
  nn::Rng rng(cfg.seed);
  GaussianField field;
  field.frame = Frame::CameraLocal;
  for (std::size_t v = 0; v < views.images.size(); ++v) {
    const CameraModel& cam = views.cameras[v];
    GaussianMap map;
    map.view_id = static_cast<int>(v);
    map.height = cam.height;
    map.width = cam.width;
    map.frame = Frame::CameraLocal;
    map.grid.reserve(static_cast<std::size_t>(cam.height) * cam.width);
    for (int y = 0; y < cam.height; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        RawGaussian raw;
        double z = cfg.init_depth;
        if (views.has_depth()) {
          double d = views.depths[v].at2(y, x);
          if (d > 0) z = d;
        }
        raw.mu = cam.unproject(x, y, z);
        double sigma = z / cam.fx;  // ~1 pixel footprint at this depth
        raw.log_scale = Vec3::Constant(std::log(sigma));
        raw.rot_raw = Vec4(1, 0, 0, 0);
        raw.opacity_logit = logit(0.1);
        for (int c = 0; c < 3; ++c) {
          double px = std::clamp(views.images[v].at3(y, x, c), 1e-4, 1.0 - 1e-4);
          raw.color_raw[c] = logit(px);
        }
        if (cfg.init_jitter > 0) {
          for (int k = 0; k < 3; ++k) {
            raw.mu[k] += cfg.init_jitter * sigma * rng.normal();
            raw.log_scale[k] += cfg.init_jitter * rng.normal();
            raw.color_raw[k] += cfg.init_jitter * rng.normal();
          }
          raw.opacity_logit += cfg.init_jitter * rng.normal();
        }
        map.grid.push_back(raw);
      }
    }
    field.maps.push_back(std::move(map));
  }
  return field;
}

RenderOutput render_view(const GaussianField& field, const std::vector<CameraModel>& origin_cams,
                         const CameraModel& cam) {
  return render(field, origin_cams, cam, RenderOptions{});
}

nn::Tensor64 masked_normalized_depth(const RenderOutput& out) {
  nn::Tensor64 depth = out.depth;
  for (std::size_t i = 0; i < depth.numel(); ++i)
    depth[i] = out.alpha[i] > 0.5 ? depth[i] / out.alpha[i] : 0.0;
  return depth;
}

ReconLoss loss_rec(const GaussianField& field, const ReconViews& views, const ReconConfig& cfg) {
  views.validate();
  if (cfg.depth_weight > 0 && !views.has_depth())
    throw ConfigError("recon: depth_weight > 0 but no depth maps were provided");

  ReconLoss result;
  result.grads.assign(field.total_gaussians(), RawGrad{});
  RenderOptions opts;

  for (std::size_t v = 0; v < views.images.size(); ++v) {
    const CameraModel& cam = views.cameras[v];
    RenderBatch batch = field_batch(field, views.cameras, cam);
    RenderCachePtr cache;
    RenderOutput out = render_batch(batch, cam, opts, &cache);

    std::size_t n_px = out.depth.numel();
    UpstreamGrad up = UpstreamGrad::zeros(cam.height, cam.width);

    if (cfg.rgb_loss == RgbLoss::L2) {
      double acc = 0;
      for (std::size_t i = 0; i < out.rgb.numel(); ++i) {
        double diff = out.rgb[i] - views.images[v][i];
        acc += diff * diff;
        up.d_rgb[i] = 2.0 * diff / static_cast<double>(out.rgb.numel());
      }
      result.rgb += acc / static_cast<double>(out.rgb.numel());
    } else {
      double l1 = 0;
      for (std::size_t i = 0; i < out.rgb.numel(); ++i) {
        double diff = out.rgb[i] - views.images[v][i];
        l1 += std::abs(diff);
        up.d_rgb[i] = 0.8 * (diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0)) /
                      static_cast<double>(out.rgb.numel());
      }
      l1 /= static_cast<double>(out.rgb.numel());
      auto [ssim_val, ssim_grad] = ssim_with_grad(out.rgb, views.images[v]);
      double dssim = (1.0 - ssim_val) / 2.0;
      for (std::size_t i = 0; i < out.rgb.numel(); ++i) up.d_rgb[i] += 0.2 * (-0.5) * ssim_grad[i];
      result.rgb += 0.8 * l1 + 0.2 * dssim;
    }

    if (cfg.depth_weight > 0) {
      const nn::Tensor64& gt = views.depths[v];
      std::size_t valid = 0;
      for (std::size_t i = 0; i < n_px; ++i)
        if (gt[i] > 0) ++valid;
      if (valid > 0) {
        double acc = 0;
        for (std::size_t i = 0; i < n_px; ++i) {
          if (gt[i] <= 0) continue;
          double pred = out.depth[i];
          double alpha = out.alpha[i];
          double inv_alpha = 1.0;
          if (cfg.normalized_depth) {
            inv_alpha = 1.0 / std::max(alpha, 1e-6);
            pred *= inv_alpha;
          }
          double diff = pred - gt[i];
          acc += std::abs(diff);
          double sgn = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
          double base = sgn / static_cast<double>(valid);
          up.d_depth[i] += base * inv_alpha;
          if (cfg.normalized_depth && alpha > 1e-6)
            up.d_alpha[i] += base * (-out.depth[i] * inv_alpha * inv_alpha);
        }
        result.depth += acc / static_cast<double>(valid);
        // fold the weight into the upstream
        for (std::size_t i = 0; i < n_px; ++i) {
          up.d_depth[i] *= cfg.depth_weight;
          up.d_alpha[i] *= cfg.depth_weight;
        }
      }
    }

    std::vector<RawGrad> view_grads = render_batch_backward(batch, cam, opts, *cache, up);
    for (std::size_t i = 0; i < view_grads.size(); ++i) {
      RawGrad& dst = result.grads[i];
      const RawGrad& src = view_grads[i];
      dst.mu += src.mu;
      dst.log_scale += src.log_scale;
      dst.rot_raw += src.rot_raw;
      dst.opacity_logit += src.opacity_logit;
      dst.color_raw += src.color_raw;
      dst.sh += src.sh;
    }
  }
  result.total = result.rgb + cfg.depth_weight * result.depth;
  return result;
}

namespace {

struct PackedField {
  nn::ParamStore<double> params;
  int id_mu, id_scale, id_rot, id_opacity, id_color;
  std::size_t n = 0;

  explicit PackedField(const GaussianField& field) {
    n = field.total_gaussians();
    nn::Tensor64 mu({n, 3}), sc({n, 3}), rot({n, 4}), op({n}), col({n, 3});
    std::size_t i = 0;
    for (const auto& map : field.maps)
      for (const auto& raw : map.grid) {
        for (int k = 0; k < 3; ++k) {
          mu.at2(i, k) = raw.mu[k];
          sc.at2(i, k) = raw.log_scale[k];
          col.at2(i, k) = raw.color_raw[k];
        }
        for (int k = 0; k < 4; ++k) rot.at2(i, k) = raw.rot_raw[k];
        op[i] = raw.opacity_logit;
        ++i;
      }
    id_mu = params.add("mu", std::move(mu));
    id_scale = params.add("log_scale", std::move(sc));
    id_rot = params.add("rot_raw", std::move(rot));
    id_opacity = params.add("opacity_logit", std::move(op));
    id_color = params.add("color_raw", std::move(col));
  }

  void unpack_into(GaussianField& field) const {
    std::size_t i = 0;
    const auto& mu = params.entries[id_mu].value;
    const auto& sc = params.entries[id_scale].value;
    const auto& rot = params.entries[id_rot].value;
    const auto& op = params.entries[id_opacity].value;
    const auto& col = params.entries[id_color].value;
    for (auto& map : field.maps)
      for (auto& raw : map.grid) {
        for (int k = 0; k < 3; ++k) {
          raw.mu[k] = mu.at2(i, k);
          raw.log_scale[k] = sc.at2(i, k);
          raw.color_raw[k] = col.at2(i, k);
        }
        for (int k = 0; k < 4; ++k) raw.rot_raw[k] = rot.at2(i, k);
        raw.opacity_logit = op[i];
        ++i;
      }
  }

  void load_grads(const std::vector<RawGrad>& grads, bool freeze_mu) {
    params.zero_grads();
    auto& mu = params.entries[id_mu].grad;
    auto& sc = params.entries[id_scale].grad;
    auto& rot = params.entries[id_rot].grad;
    auto& op = params.entries[id_opacity].grad;
    auto& col = params.entries[id_color].grad;
    for (std::size_t i = 0; i < grads.size(); ++i) {
      for (int k = 0; k < 3; ++k) {
        if (!freeze_mu) mu.at2(i, k) = grads[i].mu[k];
        sc.at2(i, k) = grads[i].log_scale[k];
        col.at2(i, k) = grads[i].color_raw[k];
      }
      for (int k = 0; k < 4; ++k) rot.at2(i, k) = grads[i].rot_raw[k];
      op[i] = grads[i].opacity_logit;
    }
  }
};

double train_psnr(const GaussianField& field, const ReconViews& views) {
  double acc = 0;
  for (std::size_t v = 0; v < views.images.size(); ++v)
    acc += psnr(render_view(field, views.cameras, views.cameras[v]).rgb, views.images[v]);
  return acc / static_cast<double>(views.images.size());
}

double train_ssim(const GaussianField& field, const ReconViews& views) {
  double acc = 0;
  for (std::size_t v = 0; v < views.images.size(); ++v)
    acc += ssim(render_view(field, views.cameras, views.cameras[v]).rgb, views.images[v]);
  return acc / static_cast<double>(views.images.size());
}

}  // namespace

ReconResult build_field(const ReconViews& views, const ReconConfig& cfg) {
  cfg.validate();
  ReconResult result;
  result.field = init_field(views, cfg);

  PackedField packed(result.field);
  nn::LrSchedule schedule;
  schedule.total_steps = static_cast<std::size_t>(cfg.iterations);
  schedule.floor_frac = cfg.lr_decay_floor;
  nn::Adam<double> opt(cfg.learning_rate, schedule);
  opt.set_lr_scales({cfg.lr_mu, cfg.lr_scale, cfg.lr_rot, cfg.lr_opacity, cfg.lr_color});

  int freeze_until =
      views.has_depth() ? static_cast<int>(cfg.mu_freeze_frac * cfg.iterations) : 0;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    ReconLoss loss = loss_rec(result.field, views, cfg);
    if (!std::isfinite(loss.total))
      throw NumericalError("recon: non-finite loss at iteration " + std::to_string(iter));
    packed.load_grads(loss.grads, iter < freeze_until);
    opt.step(packed.params);
    packed.unpack_into(result.field);

    if (cfg.report_every > 0 &&
        ((iter + 1) % cfg.report_every == 0 || iter + 1 == cfg.iterations)) {
      ReconReportRow row;
      row.iteration = iter + 1;
      row.loss = loss.total;
      row.train_psnr = train_psnr(result.field, views);
      row.train_ssim = train_ssim(result.field, views);
      result.report.push_back(row);
    }
  }
  return result;
}

ReconMetrics evaluate_recon(const GaussianField& field, const ReconViews& train_views,
                            const std::vector<nn::Tensor64>& heldout_images,
                            const std::vector<CameraModel>& heldout_cams) {
  if (heldout_images.size() != heldout_cams.size())
    throw ConfigError("evaluate_recon: image/camera count mismatch");
  ReconMetrics m;
  for (std::size_t v = 0; v < heldout_images.size(); ++v) {
    RenderOutput out = render_view(field, train_views.cameras, heldout_cams[v]);
    m.psnr += psnr(out.rgb, heldout_images[v]);
    m.ssim += ssim(out.rgb, heldout_images[v]);
  }
  if (!heldout_images.empty()) {
    m.psnr /= static_cast<double>(heldout_images.size());
    m.ssim /= static_cast<double>(heldout_images.size());
  }
  return m;
}

}  // namespace gaudp
