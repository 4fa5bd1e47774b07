#include "gaudp/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include <nlohmann/json.hpp>

#include "gaudp/common.hpp"

namespace gaudp {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

bool Gaussian::valid(double tol) const {
  if (std::abs(rot.norm() - 1.0) > tol) return false;
  if ((scale.array() <= 0).any()) return false;
  if (!(opacity > 0 && opacity < 1)) return false;
  if ((color.array() < 0).any() || (color.array() > 1).any()) return false;
  return true;
}

bool RawGaussian::all_finite() const {
  auto fin3 = [](const Vec3& v) { return v.allFinite(); };
  bool ok = fin3(mu) && fin3(log_scale) && rot_raw.allFinite() && std::isfinite(opacity_logit) &&
            fin3(color_raw);
  if (sh) ok = ok && sh->allFinite();
  return ok;
}

Gaussian activate(const RawGaussian& raw) {
  double norm = raw.rot_raw.norm();
  if (norm < 1e-8) throw NumericalError("activate: degenerate rotation (|rot_raw| < 1e-8)");
  Gaussian g;
  g.mu = raw.mu;
  g.scale = raw.log_scale.array().exp();
  Vec4 q = raw.rot_raw / norm;
  if (q[0] < 0) q = -q;  // canonical sign
  g.rot = q;
  g.opacity = sigmoid(raw.opacity_logit);
  g.color = raw.color_raw.unaryExpr([](double v) { return sigmoid(v); });
  g.sh = raw.sh;
  return g;
}

Mat3 covariance(const Gaussian& g) {
  Mat3 r = quat_to_matrix(g.rot[0], g.rot[1], g.rot[2], g.rot[3]);
  return r * g.scale.array().square().matrix().asDiagonal() * r.transpose();
}

std::size_t GaussianField::total_gaussians() const {
  std::size_t n = 0;
  for (const auto& m : maps) n += m.size();
  return n;
}

void GaussianField::validate() const {
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (maps[i].view_id != static_cast<int>(i))
      throw ConfigError("field: view_ids must be 0..N-1 in order");
    if (maps[i].frame != frame) throw ConfigError("field: map frame tag disagrees with field");
    if (maps[i].size() != static_cast<std::size_t>(maps[i].height) * maps[i].width)
      throw ConfigError("field: grid size does not match dimensions");
  }
}

bool transform_field(GaussianField& field, const std::vector<RigidTransform>& per_view,
                     Frame target) {
  if (field.frame == target) {
    std::cerr << "transform_field: field already in target frame, no-op\n";
    return false;
  }
  if (per_view.size() != field.maps.size())
    throw ConfigError("transform_field: need one transform per map");
  for (std::size_t v = 0; v < field.maps.size(); ++v) {
    const RigidTransform& t = per_view[v];
    Vec4 tq = matrix_to_quat(t.rot);
    for (RawGaussian& raw : field.maps[v].grid) {
      raw.mu = t.apply(raw.mu);
      raw.rot_raw = quat_mul(tq, raw.rot_raw);
    }
    field.maps[v].frame = target;
  }
  field.frame = target;
  return true;
}

std::vector<FlatEntry> flatten(const GaussianField& field) {
  std::vector<FlatEntry> out;
  out.reserve(field.total_gaussians());
  for (const auto& map : field.maps)
    for (int y = 0; y < map.height; ++y)
      for (int x = 0; x < map.width; ++x)
        out.push_back(FlatEntry{map.view_id, y, x, &map.at(y, x)});
  return out;
}

GaussianField unflatten(const std::vector<FlatEntry>& entries, int height, int width,
                        Frame frame) {
  GaussianField field;
  field.frame = frame;
  for (const FlatEntry& e : entries) {
    while (static_cast<int>(field.maps.size()) <= e.view_id) {
      GaussianMap m;
      m.view_id = static_cast<int>(field.maps.size());
      m.height = height;
      m.width = width;
      m.frame = frame;
      m.grid.resize(static_cast<std::size_t>(height) * width);
      field.maps.push_back(std::move(m));
    }
    field.maps[e.view_id].at(e.pixel_row, e.pixel_col) = *e.raw;
  }
  return field;
}

io::Archive field_to_archive(const GaussianField& field) {
  field.validate();
  std::size_t n = field.total_gaussians();
  bool has_sh = !field.maps.empty() && !field.maps[0].grid.empty() &&
                field.maps[0].grid[0].sh.has_value();

  nn::Tensor64 mu({n, 3}), log_scale({n, 3}), rot_raw({n, 4}), opacity_logit({n}),
      color_raw({n, 3});
  nn::Tensor64 sh(has_sh ? std::vector<std::size_t>{n, 3, 3} : std::vector<std::size_t>{0});

  std::size_t i = 0;
  for (const auto& map : field.maps) {
    for (const RawGaussian& raw : map.grid) {
      for (int k = 0; k < 3; ++k) {
        mu.at2(i, k) = raw.mu[k];
        log_scale.at2(i, k) = raw.log_scale[k];
        color_raw.at2(i, k) = raw.color_raw[k];
      }
      for (int k = 0; k < 4; ++k) rot_raw.at2(i, k) = raw.rot_raw[k];
      opacity_logit[i] = raw.opacity_logit;
      if (has_sh) {
        if (!raw.sh) throw ConfigError("field: inconsistent SH presence");
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c) sh.at3(i, r, c) = (*raw.sh)(r, c);
      }
      ++i;
    }
  }

  io::Archive a;
  nlohmann::ordered_json meta;
  meta["kind"] = "gaussian_field";
  meta["frame"] = field.frame == Frame::CameraLocal ? "camera_local" : "world";
  std::vector<int> ids, hs, ws;
  for (const auto& m : field.maps) {
    ids.push_back(m.view_id);
    hs.push_back(m.height);
    ws.push_back(m.width);
  }
  meta["view_ids"] = ids;
  meta["heights"] = hs;
  meta["widths"] = ws;
  meta["has_sh"] = has_sh;
  a.set_metadata(meta);
  a.add("mu", std::move(mu));
  a.add("log_scale", std::move(log_scale));
  a.add("rot_raw", std::move(rot_raw));
  a.add("opacity_logit", std::move(opacity_logit));
  a.add("color_raw", std::move(color_raw));
  if (has_sh) a.add("sh", std::move(sh));
  return a;
}

GaussianField field_from_archive(const io::Archive& archive) {
  auto meta = archive.metadata();
  if (meta.value("kind", "") != std::string("gaussian_field"))
    throw ConfigError("field archive: wrong kind");
  GaussianField field;
  field.frame = meta.at("frame").get<std::string>() == "world" ? Frame::World : Frame::CameraLocal;
  auto ids = meta.at("view_ids").get<std::vector<int>>();
  auto hs = meta.at("heights").get<std::vector<int>>();
  auto ws = meta.at("widths").get<std::vector<int>>();
  bool has_sh = meta.value("has_sh", false);

  nn::Tensor64 mu = archive.get("mu").as_f64();
  nn::Tensor64 log_scale = archive.get("log_scale").as_f64();
  nn::Tensor64 rot_raw = archive.get("rot_raw").as_f64();
  nn::Tensor64 opacity = archive.get("opacity_logit").as_f64();
  nn::Tensor64 color = archive.get("color_raw").as_f64();
  nn::Tensor64 sh;
  if (has_sh) sh = archive.get("sh").as_f64();

  std::size_t i = 0;
  for (std::size_t v = 0; v < ids.size(); ++v) {
    GaussianMap m;
    m.view_id = ids[v];
    m.height = hs[v];
    m.width = ws[v];
    m.frame = field.frame;
    m.grid.resize(static_cast<std::size_t>(hs[v]) * ws[v]);
    for (RawGaussian& raw : m.grid) {
      for (int k = 0; k < 3; ++k) {
        raw.mu[k] = mu.at2(i, k);
        raw.log_scale[k] = log_scale.at2(i, k);
        raw.color_raw[k] = color.at2(i, k);
      }
      for (int k = 0; k < 4; ++k) raw.rot_raw[k] = rot_raw.at2(i, k);
      raw.opacity_logit = opacity[i];
      if (has_sh) {
        Mat3 s;
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c) s(r, c) = sh.at3(i, r, c);
        raw.sh = s;
      }
      ++i;
    }
    field.maps.push_back(std::move(m));
  }
  field.validate();
  return field;
}

}  // namespace gaudp
