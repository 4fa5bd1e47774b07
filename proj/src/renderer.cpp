#include "gaudp/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gaudp/common.hpp"

namespace gaudp {

namespace {

constexpr double kShC1 = 0.4886025119029199;  // degree-1 real SH constant

// Per-Gaussian state cached between forward and backward.
struct ProjRecord {
  bool visible = false;
  bool degenerate = false;
  // activation
  Vec3 scale;        // exp(log_scale)
  Vec4 u;            // rot_raw / |rot_raw| (sign not canonicalized; R is even in u)
  double unorm = 1;  // |rot_raw|
  double opacity;
  Vec3 color;
  // geometry
  Vec3 mu_cam;
  Mat3 w_rot;        // group rotation * R(u)
  Mat3 cov_cam;
  Eigen::Matrix<double, 2, 3> jac;
  Mat2 cov2d;
  Mat2 qinv;         // cov2d^-1
  Vec2 mean2d;
  double window_radius = 0;  // 3 sigma + pad, px
  Vec3 color_eval;
  Vec3 dir;          // mu_cam normalized (SH only)
};

struct TileGrid {
  int tiles_x = 0, tiles_y = 0, tile_size = 16;
  // per tile: indices into the depth-sorted visible list
  std::vector<std::vector<int>> bins;
};

double max_eigenvalue_2x2(const Mat2& m) {
  double mid = 0.5 * (m(0, 0) + m(1, 1));
  double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  double disc = std::sqrt(std::max(0.0, mid * mid - det));
  return mid + disc;
}

ProjRecord project_record(const RawGaussian& raw, const RigidTransform& to_cam,
                          const CameraModel& cam, const RenderOptions& opts) {
  ProjRecord rec;
  double norm = raw.rot_raw.norm();
  if (norm < 1e-8) throw NumericalError("render: degenerate rotation (|rot_raw| < 1e-8)");
  rec.unorm = norm;
  rec.u = raw.rot_raw / norm;
  rec.scale = raw.log_scale.array().exp();
  rec.opacity = sigmoid(raw.opacity_logit);
  rec.color = raw.color_raw.unaryExpr([](double v) { return sigmoid(v); });

  rec.mu_cam = to_cam.apply(raw.mu);
  double z = rec.mu_cam.z();
  if (z <= cam.z_near || z >= cam.z_far) return rec;  // not visible

  rec.w_rot = to_cam.rot * quat_to_matrix(rec.u[0], rec.u[1], rec.u[2], rec.u[3]);
  rec.cov_cam = rec.w_rot * rec.scale.array().square().matrix().asDiagonal() *
                rec.w_rot.transpose();

  double x = rec.mu_cam.x(), y = rec.mu_cam.y();
  rec.jac << cam.fx / z, 0, -cam.fx * x / (z * z),
             0, cam.fy / z, -cam.fy * y / (z * z);
  rec.cov2d = rec.jac * rec.cov_cam * rec.jac.transpose() + opts.blur * Mat2::Identity();

  double det = rec.cov2d.determinant();
  if (det < 1e-12) {
    rec.degenerate = true;
    return rec;
  }
  rec.qinv << rec.cov2d(1, 1) / det, -rec.cov2d(0, 1) / det,
              -rec.cov2d(1, 0) / det, rec.cov2d(0, 0) / det;
  rec.mean2d = cam.project(rec.mu_cam);

  double r3 = 3.0 * std::sqrt(max_eigenvalue_2x2(rec.cov2d));
  // Cull on the exact 3-sigma footprint; rasterize over a padded window so
  // pixel inclusion is numerically stable under tiny parameter perturbations.
  if (rec.mean2d.x() + r3 < 0 || rec.mean2d.x() - r3 > cam.width - 1 ||
      rec.mean2d.y() + r3 < 0 || rec.mean2d.y() - r3 > cam.height - 1)
    return rec;
  rec.window_radius = r3 + opts.window_pad;

  rec.color_eval = rec.color;
  if (raw.sh) {
    rec.dir = rec.mu_cam.normalized();
    Vec3 basis(-kShC1 * rec.dir.y(), kShC1 * rec.dir.z(), -kShC1 * rec.dir.x());
    rec.color_eval += (*raw.sh) * basis;
  }
  rec.visible = true;
  return rec;
}

TileGrid build_tiles(const std::vector<ProjRecord>& recs, const std::vector<int>& order,
                     const CameraModel& cam, int tile_size) {
  TileGrid grid;
  grid.tile_size = tile_size;
  grid.tiles_x = (cam.width + tile_size - 1) / tile_size;
  grid.tiles_y = (cam.height + tile_size - 1) / tile_size;
  grid.bins.resize(static_cast<std::size_t>(grid.tiles_x) * grid.tiles_y);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const ProjRecord& rec = recs[order[pos]];
    double r = rec.window_radius;
    int x0 = std::max(0, static_cast<int>(std::floor((rec.mean2d.x() - r) / tile_size)));
    int x1 = std::min(grid.tiles_x - 1, static_cast<int>(std::floor((rec.mean2d.x() + r) / tile_size)));
    int y0 = std::max(0, static_cast<int>(std::floor((rec.mean2d.y() - r) / tile_size)));
    int y1 = std::min(grid.tiles_y - 1, static_cast<int>(std::floor((rec.mean2d.y() + r) / tile_size)));
    for (int ty = y0; ty <= y1; ++ty)
      for (int tx = x0; tx <= x1; ++tx)
        grid.bins[static_cast<std::size_t>(ty) * grid.tiles_x + tx].push_back(static_cast<int>(pos));
  }
  return grid;
}

}  // namespace

struct RenderCache {
  std::vector<ProjRecord> recs;    // per input Gaussian
  std::vector<int> order;          // visible indices sorted by (depth, source_index)
  TileGrid tiles;
  std::vector<double> t_final;     // per pixel
  std::vector<int> considered;     // per pixel: positions consumed from the tile bin
  int width = 0, height = 0;
  int skipped_degenerate = 0;
};

UpstreamGrad UpstreamGrad::zeros(int height, int width) {
  UpstreamGrad u;
  std::size_t h = static_cast<std::size_t>(height), w = static_cast<std::size_t>(width);
  u.d_rgb = nn::Tensor64({h, w, 3});
  u.d_depth = nn::Tensor64({h, w});
  u.d_alpha = nn::Tensor64({h, w});
  return u;
}

std::optional<ProjectedGaussian> project(const Gaussian& g, const CameraModel& cam,
                                         const RenderOptions& opts, int source_index) {
  RawGaussian raw;
  raw.mu = g.mu;
  raw.log_scale = g.scale.array().log();
  raw.rot_raw = g.rot;
  raw.opacity_logit = logit(std::clamp(g.opacity, 1e-12, 1.0 - 1e-12));
  raw.color_raw = g.color.unaryExpr([](double v) { return logit(std::clamp(v, 1e-12, 1.0 - 1e-12)); });
  raw.sh = g.sh;
  ProjRecord rec = project_record(raw, RigidTransform{}, cam, opts);
  if (!rec.visible) return std::nullopt;
  ProjectedGaussian out;
  out.mean2d = rec.mean2d;
  out.cov2d = rec.cov2d;
  out.depth = rec.mu_cam.z();
  out.color_eval = rec.color_eval;
  out.opacity = g.opacity;
  out.source_index = source_index;
  return out;
}

namespace {

RenderOutput rasterize_tiles(const std::vector<ProjRecord>& recs, const std::vector<int>& order,
                             const TileGrid& tiles, const CameraModel& cam,
                             const RenderOptions& opts, RenderCache* cache) {
  std::size_t h = static_cast<std::size_t>(cam.height), w = static_cast<std::size_t>(cam.width);
  RenderOutput out;
  out.rgb = nn::Tensor64({h, w, 3});
  out.depth = nn::Tensor64({h, w});
  out.alpha = nn::Tensor64({h, w});
  if (cache) {
    cache->t_final.assign(h * w, 1.0);
    cache->considered.assign(h * w, 0);
  }

  std::size_t n_tiles = tiles.bins.size();
  parallel_for(n_tiles, [&](std::size_t tile) {
    int tx = static_cast<int>(tile) % tiles.tiles_x;
    int ty = static_cast<int>(tile) / tiles.tiles_x;
    const auto& bin = tiles.bins[tile];
    int px0 = tx * tiles.tile_size, px1 = std::min(cam.width, px0 + tiles.tile_size);
    int py0 = ty * tiles.tile_size, py1 = std::min(cam.height, py0 + tiles.tile_size);
    for (int py = py0; py < py1; ++py) {
      for (int px = px0; px < px1; ++px) {
        double t = 1.0;
        Vec3 rgb = Vec3::Zero();
        double depth_acc = 0.0;
        std::size_t pos = 0;
        for (; pos < bin.size(); ++pos) {
          if (t < opts.t_stop) break;
          const ProjRecord& rec = recs[order[bin[pos]]];
          double dx = px - rec.mean2d.x();
          double dy = py - rec.mean2d.y();
          if (std::abs(dx) > rec.window_radius || std::abs(dy) > rec.window_radius) continue;
          double power = -0.5 * (rec.qinv(0, 0) * dx * dx + 2.0 * rec.qinv(0, 1) * dx * dy +
                                 rec.qinv(1, 1) * dy * dy);
          double alpha = std::min(opts.alpha_clamp, rec.opacity * std::exp(power));
          double weight = alpha * t;
          rgb += weight * rec.color_eval;
          depth_acc += weight * rec.mu_cam.z();
          t *= 1.0 - alpha;
        }
        std::size_t pix = static_cast<std::size_t>(py) * w + px;
        rgb += t * opts.background;
        out.rgb.data[pix * 3 + 0] = rgb.x();
        out.rgb.data[pix * 3 + 1] = rgb.y();
        out.rgb.data[pix * 3 + 2] = rgb.z();
        out.depth.data[pix] = depth_acc;
        out.alpha.data[pix] = 1.0 - t;
        if (cache) {
          cache->t_final[pix] = t;
          cache->considered[pix] = static_cast<int>(pos);
        }
      }
    }
  });
  return out;
}

}  // namespace

RenderOutput rasterize(const std::vector<ProjectedGaussian>& projected, const CameraModel& cam,
                       const RenderOptions& opts) {
  // Build minimal records straight from the projected primitives.
  std::vector<ProjRecord> recs(projected.size());
  int skipped = 0;
  for (std::size_t i = 0; i < projected.size(); ++i) {
    const ProjectedGaussian& p = projected[i];
    ProjRecord& rec = recs[i];
    rec.opacity = p.opacity;
    rec.color_eval = p.color_eval;
    rec.mean2d = p.mean2d;
    rec.cov2d = p.cov2d;
    rec.mu_cam = Vec3(0, 0, p.depth);
    double det = p.cov2d.determinant();
    if (det < 1e-12) {
      ++skipped;
      continue;
    }
    rec.qinv << p.cov2d(1, 1) / det, -p.cov2d(0, 1) / det,
                -p.cov2d(1, 0) / det, p.cov2d(0, 0) / det;
    rec.window_radius = 3.0 * std::sqrt(max_eigenvalue_2x2(p.cov2d)) + opts.window_pad;
    rec.visible = true;
  }
  std::vector<int> order;
  std::vector<int> source(projected.size());
  for (std::size_t i = 0; i < projected.size(); ++i) source[i] = projected[i].source_index;
  for (std::size_t i = 0; i < recs.size(); ++i)
    if (recs[i].visible) order.push_back(static_cast<int>(i));
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (recs[a].mu_cam.z() != recs[b].mu_cam.z()) return recs[a].mu_cam.z() < recs[b].mu_cam.z();
    return source[a] < source[b];
  });
  TileGrid tiles = build_tiles(recs, order, cam, opts.tile_size);
  RenderOutput out = rasterize_tiles(recs, order, tiles, cam, opts, nullptr);
  out.skipped_degenerate = skipped;
  return out;
}

RenderOutput render_batch(const RenderBatch& batch, const CameraModel& cam,
                          const RenderOptions& opts, RenderCachePtr* cache_out) {
  if (batch.group.size() != batch.raws.size())
    throw ConfigError("render: group ids must match raw count");
  auto cache = std::make_shared<RenderCache>();
  cache->width = cam.width;
  cache->height = cam.height;
  cache->recs.resize(batch.size());

  parallel_for(batch.size(), [&](std::size_t i) {
    const RigidTransform& to_cam = batch.group_to_cam.at(batch.group[i]);
    cache->recs[i] = project_record(*batch.raws[i], to_cam, cam, opts);
  });
  for (const auto& rec : cache->recs)
    if (rec.degenerate) ++cache->skipped_degenerate;

  cache->order.clear();
  for (std::size_t i = 0; i < cache->recs.size(); ++i)
    if (cache->recs[i].visible) cache->order.push_back(static_cast<int>(i));
  std::stable_sort(cache->order.begin(), cache->order.end(), [&](int a, int b) {
    double za = cache->recs[a].mu_cam.z(), zb = cache->recs[b].mu_cam.z();
    if (za != zb) return za < zb;
    return a < b;  // tie-break by source index
  });
  cache->tiles = build_tiles(cache->recs, cache->order, cam, opts.tile_size);

  RenderOutput out = rasterize_tiles(cache->recs, cache->order, cache->tiles, cam, opts,
                                     cache.get());
  out.skipped_degenerate = cache->skipped_degenerate;
  if (cache_out) *cache_out = std::move(cache);
  return out;
}

namespace {

// Per-contribution partials accumulated over pixels before the per-Gaussian
// chain rule back to raw parameters.
struct ContribGrad {
  double d_mx = 0, d_my = 0;           // mean2d
  double d_q00 = 0, d_q01 = 0, d_q11 = 0;  // qinv entries (01 holds both off-diagonals)
  Vec3 d_color_eval = Vec3::Zero();
  double d_z = 0;                      // composited depth
  double d_opacity = 0;                // activated opacity
};

void quat_rotation_backward(const Mat3& g, const Vec4& q, Vec4& dq) {
  double w = q[0], x = q[1], y = q[2], z = q[3];
  dq[0] += 2.0 * (-g(0, 1) * z + g(0, 2) * y + g(1, 0) * z - g(1, 2) * x - g(2, 0) * y +
                  g(2, 1) * x);
  dq[1] += 2.0 * (g(0, 1) * y + g(0, 2) * z + g(1, 0) * y - 2.0 * g(1, 1) * x - g(1, 2) * w +
                  g(2, 0) * z + g(2, 1) * w - 2.0 * g(2, 2) * x);
  dq[2] += 2.0 * (-2.0 * g(0, 0) * y + g(0, 1) * x + g(0, 2) * w + g(1, 0) * x + g(1, 2) * z -
                  g(2, 0) * w + g(2, 1) * z - 2.0 * g(2, 2) * y);
  dq[3] += 2.0 * (-2.0 * g(0, 0) * z - g(0, 1) * w + g(0, 2) * x + g(1, 0) * w -
                  2.0 * g(1, 1) * z + g(1, 2) * y + g(2, 0) * x + g(2, 1) * y);
}

}  // namespace

std::vector<RawGrad> render_batch_backward(const RenderBatch& batch, const CameraModel& cam,
                                           const RenderOptions& opts, const RenderCache& cache,
                                           const UpstreamGrad& upstream) {
  if (cache.t_final.empty()) throw ConfigError("render_backward: forward cache missing");
  if (static_cast<int>(batch.size()) != static_cast<int>(cache.recs.size()))
    throw ConfigError("render_backward: batch does not match cache");
  std::size_t w = static_cast<std::size_t>(cam.width);
  nn::check_same_shape("render_backward d_rgb", upstream.d_rgb.shape,
                       {static_cast<std::size_t>(cam.height), w, 3});

  const auto& recs = cache.recs;
  const auto& order = cache.order;
  const TileGrid& tiles = cache.tiles;

  // Stage 1: pixel-space partials, accumulated per tile into bin-local
  // buffers so parallel tiles never race.
  std::vector<std::vector<ContribGrad>> tile_acc(tiles.bins.size());
  parallel_for(tiles.bins.size(), [&](std::size_t tile) {
    const auto& bin = tiles.bins[tile];
    if (bin.empty()) return;
    auto& acc = tile_acc[tile];
    acc.assign(bin.size(), ContribGrad{});
    int tx = static_cast<int>(tile) % tiles.tiles_x;
    int ty = static_cast<int>(tile) / tiles.tiles_x;
    int px0 = tx * tiles.tile_size, px1 = std::min(cam.width, px0 + tiles.tile_size);
    int py0 = ty * tiles.tile_size, py1 = std::min(cam.height, py0 + tiles.tile_size);

    for (int py = py0; py < py1; ++py) {
      for (int px = px0; px < px1; ++px) {
        std::size_t pix = static_cast<std::size_t>(py) * w + px;
        Vec3 d_c(upstream.d_rgb.data[pix * 3 + 0], upstream.d_rgb.data[pix * 3 + 1],
                 upstream.d_rgb.data[pix * 3 + 2]);
        double d_d = upstream.d_depth.data[pix];
        double d_a = upstream.d_alpha.data[pix];
        int considered = cache.considered[pix];
        if (considered == 0) continue;
        if (d_c.isZero(0.0) && d_d == 0.0 && d_a == 0.0) continue;

        double t_final = cache.t_final[pix];
        // Suffix accumulators: S_c starts with the background term of C,
        // S_z has no background contribution.
        Vec3 s_c = t_final * opts.background;
        double s_z = 0.0;
        double t_next = t_final;

        for (int p = considered - 1; p >= 0; --p) {
          const ProjRecord& rec = recs[order[bin[p]]];
          double dx = px - rec.mean2d.x();
          double dy = py - rec.mean2d.y();
          if (std::abs(dx) > rec.window_radius || std::abs(dy) > rec.window_radius) continue;
          double power = -0.5 * (rec.qinv(0, 0) * dx * dx + 2.0 * rec.qinv(0, 1) * dx * dy +
                                 rec.qinv(1, 1) * dy * dy);
          double g_exp = std::exp(power);
          double alpha_unclamped = rec.opacity * g_exp;
          bool clamped = alpha_unclamped > opts.alpha_clamp;
          double alpha = clamped ? opts.alpha_clamp : alpha_unclamped;
          double one_minus = 1.0 - alpha;
          double t_here = t_next / one_minus;
          double weight = alpha * t_here;
          double z = rec.mu_cam.z();

          ContribGrad& cg = acc[p];
          cg.d_color_eval += d_c * weight;
          cg.d_z += d_d * weight;

          double d_alpha_blend = d_c.dot(rec.color_eval * t_here - s_c / one_minus) +
                                 d_d * (z * t_here - s_z / one_minus) +
                                 d_a * t_final / one_minus;
          if (!clamped) {
            cg.d_opacity += d_alpha_blend * g_exp;
            double d_power = d_alpha_blend * rec.opacity * g_exp;
            double d_dx = d_power * -(rec.qinv(0, 0) * dx + rec.qinv(0, 1) * dy);
            double d_dy = d_power * -(rec.qinv(0, 1) * dx + rec.qinv(1, 1) * dy);
            cg.d_mx -= d_dx;
            cg.d_my -= d_dy;
            cg.d_q00 += d_power * (-0.5 * dx * dx);
            cg.d_q01 += d_power * (-dx * dy);
            cg.d_q11 += d_power * (-0.5 * dy * dy);
          }

          s_c += rec.color_eval * weight;
          s_z += z * weight;
          t_next = t_here;
        }
      }
    }
  });

  // Stage 2: merge tile-local buffers in tile order (deterministic under any
  // thread count), keyed by position in the global sorted list.
  std::vector<ContribGrad> merged(order.size());
  for (std::size_t tile = 0; tile < tiles.bins.size(); ++tile) {
    const auto& bin = tiles.bins[tile];
    const auto& acc = tile_acc[tile];
    for (std::size_t p = 0; p < acc.size(); ++p) {
      ContribGrad& dst = merged[bin[p]];
      const ContribGrad& src = acc[p];
      dst.d_mx += src.d_mx;
      dst.d_my += src.d_my;
      dst.d_q00 += src.d_q00;
      dst.d_q01 += src.d_q01;
      dst.d_q11 += src.d_q11;
      dst.d_color_eval += src.d_color_eval;
      dst.d_z += src.d_z;
      dst.d_opacity += src.d_opacity;
    }
  }

  // Stage 3: per-Gaussian chain rule back to raw parameters.
  std::vector<RawGrad> grads(batch.size());
  parallel_for(order.size(), [&](std::size_t pos) {
    int idx = order[pos];
    const ProjRecord& rec = recs[idx];
    const ContribGrad& cg = merged[pos];
    const RawGaussian& raw = *batch.raws[idx];
    const RigidTransform& to_cam = batch.group_to_cam.at(batch.group[idx]);
    RawGrad& out = grads[idx];

    // qinv -> cov2d
    Mat2 gq;
    gq << cg.d_q00, 0.5 * cg.d_q01, 0.5 * cg.d_q01, cg.d_q11;
    Mat2 d_cov2d = -rec.qinv * gq * rec.qinv;

    // cov2d = J cov_cam J^T + blur I
    Mat3 d_cov_cam = rec.jac.transpose() * d_cov2d * rec.jac;
    Eigen::Matrix<double, 2, 3> d_jac = 2.0 * d_cov2d * rec.jac * rec.cov_cam;

    // cov_cam = W diag(s^2) W^T
    Mat3 s2 = rec.scale.array().square().matrix().asDiagonal();
    Mat3 d_w = 2.0 * d_cov_cam * rec.w_rot * s2;
    Vec3 d_s2 = (rec.w_rot.transpose() * d_cov_cam * rec.w_rot).diagonal();
    for (int k = 0; k < 3; ++k)
      out.log_scale[k] = 2.0 * rec.scale[k] * rec.scale[k] * d_s2[k];

    // W = R_group * R(u)
    Mat3 d_rq = to_cam.rot.transpose() * d_w;
    Vec4 d_u = Vec4::Zero();
    quat_rotation_backward(d_rq, rec.u, d_u);
    out.rot_raw = (d_u - rec.u * rec.u.dot(d_u)) / rec.unorm;

    // mean2d and J back to mu_cam
    double x = rec.mu_cam.x(), y = rec.mu_cam.y(), z = rec.mu_cam.z();
    Vec3 d_mu_cam = Vec3::Zero();
    d_mu_cam.x() += cg.d_mx * cam.fx / z;
    d_mu_cam.y() += cg.d_my * cam.fy / z;
    d_mu_cam.z() += -cg.d_mx * cam.fx * x / (z * z) - cg.d_my * cam.fy * y / (z * z);
    d_mu_cam.x() += d_jac(0, 2) * (-cam.fx / (z * z));
    d_mu_cam.y() += d_jac(1, 2) * (-cam.fy / (z * z));
    d_mu_cam.z() += d_jac(0, 0) * (-cam.fx / (z * z)) + d_jac(1, 1) * (-cam.fy / (z * z)) +
                    d_jac(0, 2) * (2.0 * cam.fx * x / (z * z * z)) +
                    d_jac(1, 2) * (2.0 * cam.fy * y / (z * z * z));
    d_mu_cam.z() += cg.d_z;

    // color path (+ optional SH with its view-direction dependence)
    Vec3 d_color = cg.d_color_eval;
    if (raw.sh) {
      Vec3 basis(-kShC1 * rec.dir.y(), kShC1 * rec.dir.z(), -kShC1 * rec.dir.x());
      out.sh = cg.d_color_eval * basis.transpose();
      Vec3 d_basis = raw.sh->transpose() * cg.d_color_eval;
      Vec3 d_dir(-kShC1 * d_basis[2], -kShC1 * d_basis[0], kShC1 * d_basis[1]);
      double n = rec.mu_cam.norm();
      d_mu_cam += (d_dir - rec.dir * rec.dir.dot(d_dir)) / n;
    }

    out.mu = to_cam.rot.transpose() * d_mu_cam;
    out.opacity_logit = cg.d_opacity * rec.opacity * (1.0 - rec.opacity);
    for (int k = 0; k < 3; ++k)
      out.color_raw[k] = d_color[k] * rec.color[k] * (1.0 - rec.color[k]);
  });

  return grads;
}

RenderBatch field_batch(const GaussianField& field, const std::vector<CameraModel>& origin_cams,
                        const CameraModel& cam) {
  RenderBatch batch;
  for (const auto& map : field.maps) {
    RigidTransform to_cam;
    if (field.frame == Frame::CameraLocal) {
      if (static_cast<std::size_t>(map.view_id) >= origin_cams.size())
        throw ConfigError("render: camera-local field needs an origin camera per view");
      to_cam = cam.pose_world_to_cam.compose(
          origin_cams[map.view_id].pose_world_to_cam.inverse());
    } else {
      to_cam = cam.pose_world_to_cam;
    }
    int grp = static_cast<int>(batch.group_to_cam.size());
    batch.group_to_cam.push_back(to_cam);
    for (const RawGaussian& raw : map.grid) batch.push(&raw, grp);
  }
  return batch;
}

RenderOutput render(const GaussianField& field, const std::vector<CameraModel>& origin_cams,
                    const CameraModel& cam, const RenderOptions& opts, RenderCachePtr* cache) {
  RenderBatch batch = field_batch(field, origin_cams, cam);
  return render_batch(batch, cam, opts, cache);
}

}  // namespace gaudp
