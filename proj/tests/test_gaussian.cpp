#include <doctest.h>

#include <Eigen/Cholesky>
#include <cmath>
#include <filesystem>

#include "gaudp/gaussian.hpp"
#include "gaudp/nn/rng.hpp"
#include "gaudp/renderer.hpp"

using namespace gaudp;

namespace {

RawGaussian random_raw(nn::Rng& rng) {
  RawGaussian raw;
  for (int k = 0; k < 3; ++k) {
    raw.mu[k] = rng.normal();
    raw.log_scale[k] = rng.normal() * 0.5;
    raw.color_raw[k] = rng.normal();
  }
  for (int k = 0; k < 4; ++k) raw.rot_raw[k] = rng.normal();
  if (raw.rot_raw.norm() < 1e-6) raw.rot_raw[0] = 1.0;
  raw.opacity_logit = rng.normal() * 2.0;
  return raw;
}

GaussianField small_field(int views, int h, int w, std::uint64_t seed) {
  nn::Rng rng(seed);
  GaussianField field;
  field.frame = Frame::CameraLocal;
  for (int v = 0; v < views; ++v) {
    GaussianMap m;
    m.view_id = v;
    m.height = h;
    m.width = w;
    m.frame = field.frame;
    for (int i = 0; i < h * w; ++i) m.grid.push_back(random_raw(rng));
    field.maps.push_back(std::move(m));
  }
  return field;
}

}  // namespace

TEST_CASE("activation identities") {
  RawGaussian raw;  // all defaults: zeros, rot (1,0,0,0)
  Gaussian g = activate(raw);
  CHECK(g.scale == Vec3(1, 1, 1));
  CHECK(g.opacity == doctest::Approx(0.5));
  CHECK(g.rot == Vec4(1, 0, 0, 0));
  CHECK(g.color.x() == doctest::Approx(0.5));

  raw.opacity_logit = 20.0;
  g = activate(raw);
  CHECK(g.opacity < 1.0);
  CHECK(1.0 - g.opacity < 1e-8);

  raw.rot_raw = Vec4(2, 0, 0, 0);
  g = activate(raw);
  CHECK(g.rot == Vec4(1, 0, 0, 0));
}

TEST_CASE("activation rejects degenerate rotations") {
  RawGaussian raw;
  raw.rot_raw = Vec4(1e-9, 0, 0, 0);
  CHECK_THROWS_AS(activate(raw), NumericalError);
}

TEST_CASE("activation is total and always lands in the valid set") {
  nn::Rng rng(123);
  for (int trial = 0; trial < 500; ++trial) {
    RawGaussian raw = random_raw(rng);
    Gaussian g = activate(raw);
    CHECK(g.valid());
    CHECK(g.rot[0] >= 0);  // canonical sign
  }
}

TEST_CASE("covariance matches the direct product oracle") {
  Gaussian g;
  g.scale = Vec3(2, 1, 1);
  double c = std::cos(M_PI / 4), s = std::sin(M_PI / 4);
  g.rot = Vec4(c, 0, 0, s);  // 90 degrees about z
  Mat3 cov = covariance(g);

  // independent oracle: R * diag(4,1,1) * R^T with an explicitly built R
  Mat3 r = axis_angle(Vec3(0, 0, 1), M_PI / 2);
  Mat3 expect = r * Vec3(4, 1, 1).asDiagonal() * r.transpose();
  CHECK((cov - expect).cwiseAbs().maxCoeff() < 1e-12);
  // rotating (2,1,1) about z swaps the x/y variances
  CHECK(cov(0, 0) == doctest::Approx(1.0));
  CHECK(cov(1, 1) == doctest::Approx(4.0));

  Gaussian iso;
  iso.scale = Vec3(0.7, 0.7, 0.7);
  nn::Rng rng(5);
  Vec4 q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  iso.rot = q.normalized();
  Mat3 iso_cov = covariance(iso);
  CHECK((iso_cov - 0.49 * Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);

  Gaussian ident;
  CHECK((covariance(ident) - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("covariance is PSD for random gaussians (Cholesky succeeds)") {
  nn::Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    Gaussian g = activate(random_raw(rng));
    Eigen::LLT<Mat3> llt(covariance(g) + 1e-300 * Mat3::Identity());
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("flatten order and round trip") {
  GaussianField field = small_field(2, 8, 8, 9);
  auto flat = flatten(field);
  REQUIRE(flat.size() == 128);
  for (int i = 0; i < 64; ++i) CHECK(flat[i].view_id == 0);
  // entry index 64 v + 8 y + x maps to (v,y,x)
  CHECK(flat[64 * 1 + 8 * 3 + 5].view_id == 1);
  CHECK(flat[64 * 1 + 8 * 3 + 5].pixel_row == 3);
  CHECK(flat[64 * 1 + 8 * 3 + 5].pixel_col == 5);

  GaussianField back = unflatten(flat, 8, 8, field.frame);
  REQUIRE(back.maps.size() == field.maps.size());
  for (std::size_t v = 0; v < back.maps.size(); ++v)
    for (std::size_t i = 0; i < back.maps[v].grid.size(); ++i) {
      CHECK(back.maps[v].grid[i].mu == field.maps[v].grid[i].mu);
      CHECK(back.maps[v].grid[i].rot_raw == field.maps[v].grid[i].rot_raw);
      CHECK(back.maps[v].grid[i].opacity_logit == field.maps[v].grid[i].opacity_logit);
    }
}

TEST_CASE("transform: identity, translation, and round trip") {
  GaussianField field = small_field(2, 4, 4, 21);

  SUBCASE("identity transforms change nothing but the tag") {
    GaussianField f = field;
    std::vector<RigidTransform> ident(2);
    transform_field(f, ident, Frame::World);
    CHECK(f.frame == Frame::World);
    for (std::size_t v = 0; v < 2; ++v)
      for (std::size_t i = 0; i < f.maps[v].grid.size(); ++i)
        CHECK((f.maps[v].grid[i].mu - field.maps[v].grid[i].mu).norm() == 0.0);
  }

  SUBCASE("pure translation shifts means, covariances unchanged") {
    GaussianField f = field;
    RigidTransform t;
    t.trans = Vec3(0.5, -1, 2);
    transform_field(f, {t, t}, Frame::World);
    for (std::size_t v = 0; v < 2; ++v)
      for (std::size_t i = 0; i < f.maps[v].grid.size(); ++i) {
        CHECK((f.maps[v].grid[i].mu - (field.maps[v].grid[i].mu + t.trans)).norm() < 1e-12);
        Mat3 before = covariance(activate(field.maps[v].grid[i]));
        Mat3 after = covariance(activate(f.maps[v].grid[i]));
        CHECK((before - after).cwiseAbs().maxCoeff() < 1e-12);
      }
  }

  SUBCASE("already in target frame is a warning no-op") {
    GaussianField f = field;
    std::vector<RigidTransform> ident(2);
    CHECK_FALSE(transform_field(f, ident, Frame::CameraLocal));
  }

  SUBCASE("apply T then T^-1 reproduces mu and rot up to sign") {
    GaussianField f = field;
    nn::Rng rng(31);
    std::vector<RigidTransform> ts;
    for (int v = 0; v < 2; ++v) {
      RigidTransform t;
      t.rot = axis_angle(Vec3(rng.normal(), rng.normal(), rng.normal()), rng.uniform(0, 3));
      t.trans = Vec3(rng.normal(), rng.normal(), rng.normal());
      ts.push_back(t);
    }
    transform_field(f, ts, Frame::World);
    std::vector<RigidTransform> inv;
    for (auto& t : ts) inv.push_back(t.inverse());
    transform_field(f, inv, Frame::CameraLocal);
    for (std::size_t v = 0; v < 2; ++v)
      for (std::size_t i = 0; i < f.maps[v].grid.size(); ++i) {
        CHECK((f.maps[v].grid[i].mu - field.maps[v].grid[i].mu).norm() < 1e-6);
        Vec4 qa = activate(f.maps[v].grid[i]).rot;
        Vec4 qb = activate(field.maps[v].grid[i]).rot;
        CHECK(std::min((qa - qb).norm(), (qa + qb).norm()) < 1e-6);
      }
  }
}

TEST_CASE("transformed field renders identically from a compensated camera") {
  GaussianField field = small_field(1, 6, 6, 55);
  // place gaussians in front of a camera
  for (auto& raw : field.maps[0].grid) {
    raw.mu = Vec3(raw.mu.x() * 0.3, raw.mu.y() * 0.3, 3.0 + 0.3 * raw.mu.z());
    raw.log_scale = Vec3(-2.0, -2.0, -2.0);
  }

  CameraModel origin_cam;  // identity pose; the field is in this view's frame
  origin_cam.fx = origin_cam.fy = 24;
  origin_cam.cx = origin_cam.cy = 11.5;
  origin_cam.width = origin_cam.height = 24;

  nn::Rng rng(66);
  RigidTransform t;
  t.rot = axis_angle(Vec3(rng.normal(), rng.normal(), rng.normal()), 0.8);
  t.trans = Vec3(0.2, -0.4, 0.6);

  RenderOptions opts;
  RenderOutput before = render(field, {origin_cam}, origin_cam, opts);

  // re-express in "world" = T(camera_local); compensated camera has pose
  // world->cam = old_pose ∘ T^-1.
  GaussianField moved = field;
  transform_field(moved, {t}, Frame::World);
  CameraModel compensated = origin_cam;
  compensated.pose_world_to_cam = origin_cam.pose_world_to_cam.compose(t.inverse());
  RenderOutput after = render(moved, {}, compensated, opts);

  double max_diff = 0;
  for (std::size_t i = 0; i < before.rgb.numel(); ++i)
    max_diff = std::max(max_diff, std::abs(before.rgb[i] - after.rgb[i]));
  CHECK(max_diff < 1e-5);
}

TEST_CASE("field archive round trip is bitwise") {
  GaussianField field = small_field(2, 5, 3, 99);
  auto dir = std::filesystem::temp_directory_path() / "gaudp_field_test";
  std::filesystem::create_directories(dir);
  auto path = dir / "field.gdar";
  field_to_archive(field).save(path);
  GaussianField back = field_from_archive(io::Archive::load(path));
  REQUIRE(back.maps.size() == 2);
  CHECK(back.frame == field.frame);
  for (std::size_t v = 0; v < 2; ++v)
    for (std::size_t i = 0; i < field.maps[v].grid.size(); ++i) {
      CHECK(back.maps[v].grid[i].mu == field.maps[v].grid[i].mu);
      CHECK(back.maps[v].grid[i].log_scale == field.maps[v].grid[i].log_scale);
      CHECK(back.maps[v].grid[i].rot_raw == field.maps[v].grid[i].rot_raw);
      CHECK(back.maps[v].grid[i].opacity_logit == field.maps[v].grid[i].opacity_logit);
      CHECK(back.maps[v].grid[i].color_raw == field.maps[v].grid[i].color_raw);
    }
}
