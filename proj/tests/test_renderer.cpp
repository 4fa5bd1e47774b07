#include <doctest.h>

#include <cmath>

#include "gaudp/gaussian.hpp"
#include "gaudp/nn/gradcheck.hpp"
#include "gaudp/nn/rng.hpp"
#include "gaudp/renderer.hpp"
#include "support/toy_scene.hpp"

using namespace gaudp;
using testsupport::canonical_camera;
using testsupport::make_batch;
using testsupport::random_scene;
using testsupport::renderer_fd_max_rel;

TEST_CASE("projection hits the principal point on the optical axis") {
  CameraModel cam = canonical_camera(16);
  Gaussian g;
  g.mu = Vec3(0, 0, 2);
  g.scale = Vec3(0.1, 0.1, 0.1);
  auto proj = project(g, cam);
  REQUIRE(proj.has_value());
  CHECK(proj->mean2d.x() == doctest::Approx(cam.cx));
  CHECK(proj->mean2d.y() == doctest::Approx(cam.cy));
  CHECK(proj->depth == doctest::Approx(2.0));
}

TEST_CASE("projection mean jacobian matches finite differences") {
  CameraModel cam = canonical_camera(16);
  Gaussian g;
  g.mu = Vec3(0.3, -0.2, 2.5);
  g.scale = Vec3(0.1, 0.1, 0.1);
  double h = 1e-5;
  double fx = cam.fx, fy = cam.fy;
  double x = g.mu.x(), y = g.mu.y(), z = g.mu.z();
  Eigen::Matrix<double, 2, 3> jac;
  jac << fx / z, 0, -fx * x / (z * z), 0, fy / z, -fy * y / (z * z);
  for (int axis = 0; axis < 3; ++axis) {
    Gaussian gp = g, gm = g;
    gp.mu[axis] += h;
    gm.mu[axis] -= h;
    Vec2 up = project(gp, cam)->mean2d;
    Vec2 dn = project(gm, cam)->mean2d;
    Vec2 fd = (up - dn) / (2 * h);
    for (int r = 0; r < 2; ++r) CHECK(nn::rel_error(jac(r, axis), fd[r], 1e-8) < 1e-4);
  }
}

TEST_CASE("behind-camera gaussians are culled") {
  CameraModel cam = canonical_camera(16);
  Gaussian g;
  g.mu = Vec3(0, 0, -1);
  CHECK_FALSE(project(g, cam).has_value());
  g.mu = Vec3(0, 0, 100);
  CHECK_FALSE(project(g, cam).has_value());
  // far off-screen: 3 sigma footprint misses the image
  g.mu = Vec3(50, 0, 2);
  g.scale = Vec3(0.01, 0.01, 0.01);
  CHECK_FALSE(project(g, cam).has_value());
}

TEST_CASE("empty list renders background") {
  CameraModel cam = canonical_camera(16);
  RenderOptions opts;
  opts.background = Vec3(0.25, 0.5, 0.75);
  RenderOutput out = rasterize({}, cam, opts);
  for (int p = 0; p < 16 * 16; ++p) {
    CHECK(out.rgb[p * 3 + 0] == 0.25);
    CHECK(out.rgb[p * 3 + 1] == 0.5);
    CHECK(out.rgb[p * 3 + 2] == 0.75);
    CHECK(out.depth[p] == 0.0);
    CHECK(out.alpha[p] == 0.0);
  }
}

TEST_CASE("hand-evaluated compositing") {
  CameraModel cam = canonical_camera(16);
  RenderOptions opts;
  opts.background = Vec3::Zero();

  SUBCASE("single gaussian, alpha 0.99 at its center pixel") {
    opts.background = Vec3(0, 0, 1);
    ProjectedGaussian p;
    p.mean2d = Vec2(8, 8);
    p.cov2d = Mat2::Identity();
    p.depth = 2.0;
    p.color_eval = Vec3(1, 0, 0);
    p.opacity = 0.999;  // clamps to 0.99 at the center pixel
    RenderOutput out = rasterize({p}, cam, opts);
    std::size_t pix = 8 * 16 + 8;
    CHECK(out.rgb[pix * 3 + 0] == doctest::Approx(0.99).epsilon(1e-12));
    CHECK(out.rgb[pix * 3 + 2] == doctest::Approx(0.01).epsilon(1e-9));
  }

  SUBCASE("front red over back blue") {
    ProjectedGaussian front, back;
    front.mean2d = back.mean2d = Vec2(8, 8);
    front.cov2d = back.cov2d = Mat2::Identity();
    front.depth = 1.0;
    back.depth = 2.0;
    front.color_eval = Vec3(1, 0, 0);
    back.color_eval = Vec3(0, 0, 1);
    front.opacity = 0.6;
    back.opacity = 0.5;
    front.source_index = 0;
    back.source_index = 1;
    RenderOutput out = rasterize({back, front}, cam, opts);  // order must not matter
    std::size_t pix = 8 * 16 + 8;
    CHECK(out.rgb[pix * 3 + 0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(out.rgb[pix * 3 + 2] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(out.depth[pix] == doctest::Approx(0.6 * 1.0 + 0.2 * 2.0).epsilon(1e-12));
    CHECK(out.alpha[pix] == doctest::Approx(0.8).epsilon(1e-12));
  }
}

TEST_CASE("tile size invariance is bitwise") {
  CameraModel cam = canonical_camera(32);
  std::vector<RawGaussian> raws = random_scene(40, 1234);
  RenderOptions opts;
  opts.background = Vec3(0.1, 0.1, 0.1);

  opts.tile_size = 8;
  RenderOutput a = render_batch(make_batch(raws), cam, opts);
  opts.tile_size = 16;
  RenderOutput b = render_batch(make_batch(raws), cam, opts);
  opts.tile_size = 32;
  RenderOutput c = render_batch(make_batch(raws), cam, opts);

  CHECK(a.rgb.data == b.rgb.data);
  CHECK(b.rgb.data == c.rgb.data);
  CHECK(a.depth.data == b.depth.data);
  CHECK(a.alpha.data == c.alpha.data);
}

TEST_CASE("input permutation with distinct depths is bitwise identical") {
  CameraModel cam = canonical_camera(24);
  std::vector<RawGaussian> raws = random_scene(30, 555);
  for (std::size_t i = 0; i < raws.size(); ++i)
    raws[i].mu.z() = 2.0 + 0.05 * static_cast<double>(i);  // distinct depths
  RenderOptions opts;

  RenderOutput a = render_batch(make_batch(raws), cam, opts);
  std::vector<RawGaussian> shuffled = raws;
  nn::Rng rng(8);
  for (std::size_t i = shuffled.size(); i > 1; --i)
    std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
  RenderOutput b = render_batch(make_batch(shuffled), cam, opts);
  CHECK(a.rgb.data == b.rgb.data);
  CHECK(a.depth.data == b.depth.data);
}

TEST_CASE("duplicated gaussians at identical depth render reproducibly") {
  CameraModel cam = canonical_camera(24);
  std::vector<RawGaussian> raws = random_scene(15, 99);
  std::vector<RawGaussian> doubled = raws;
  doubled.insert(doubled.end(), raws.begin(), raws.end());
  RenderOptions opts;
  RenderOutput a = render_batch(make_batch(doubled), cam, opts);
  RenderOutput b = render_batch(make_batch(doubled), cam, opts);
  CHECK(a.rgb.data == b.rgb.data);
  CHECK(a.depth.data == b.depth.data);
  CHECK(a.alpha.data == b.alpha.data);
}

TEST_CASE("alpha stays in range on random scenes") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CameraModel cam = canonical_camera(16);
    std::vector<RawGaussian> raws = random_scene(25, 7000 + seed);
    RenderOutput out = render_batch(make_batch(raws), cam, RenderOptions{});
    for (double a : out.alpha.data) {
      CHECK(a >= 0.0);
      CHECK(a <= 1.0);
    }
  }
}

TEST_CASE("zero upstream gives zero gradients") {
  CameraModel cam = canonical_camera(16);
  std::vector<RawGaussian> raws = random_scene(8, 3);
  RenderBatch batch = make_batch(raws);
  RenderCachePtr cache;
  render_batch(batch, cam, RenderOptions{}, &cache);
  auto grads =
      render_batch_backward(batch, cam, RenderOptions{}, *cache, UpstreamGrad::zeros(16, 16));
  for (const auto& g : grads) {
    CHECK(g.mu.norm() == 0.0);
    CHECK(g.rot_raw.norm() == 0.0);
    CHECK(g.opacity_logit == 0.0);
  }
}

TEST_CASE("backward on a mismatched batch is a usage error") {
  CameraModel cam = canonical_camera(16);
  std::vector<RawGaussian> raws = random_scene(4, 5);
  RenderBatch batch = make_batch(raws);
  RenderCachePtr cache;
  render_batch(batch, cam, RenderOptions{}, &cache);
  std::vector<RawGaussian> other = random_scene(5, 6);
  RenderBatch wrong = make_batch(other);
  CHECK_THROWS_AS(
      render_batch_backward(wrong, cam, RenderOptions{}, *cache, UpstreamGrad::zeros(16, 16)),
      ConfigError);
}

TEST_CASE("renderer gradients match finite differences (small scene)") {
  double rel = renderer_fd_max_rel(10, 12, 42, 1e-4);
  CHECK(rel < 1e-3);
}

TEST_CASE("renderer gradients with degree-1 SH match finite differences") {
  double rel = renderer_fd_max_rel(6, 12, 43, 1e-4, /*with_sh=*/true);
  CHECK(rel < 1e-3);
}

TEST_CASE("fully occluded gaussian gets vanishing gradients") {
  CameraModel cam = canonical_camera(16);
  RenderOptions opts;
  RawGaussian occluder;
  occluder.mu = Vec3(0, 0, 1.0);
  occluder.log_scale = Vec3(1.5, 1.5, 1.5);
  occluder.opacity_logit = 30.0;  // alpha clamps to 0.99 across the screen
  RawGaussian hidden;
  hidden.mu = Vec3(0, 0, 3.0);
  hidden.log_scale = Vec3(-1, -1, -1);
  hidden.opacity_logit = 2.0;

  // Three stacked 0.99-alpha occluders drive T to 1e-6 < 1e-4: traversal
  // stops before the back gaussian, so its gradients are exactly zero.
  std::vector<RawGaussian> stacked(4, occluder);
  stacked[1].mu.z() = 1.4;
  stacked[2].mu.z() = 1.8;
  stacked[3] = hidden;

  UpstreamGrad up = UpstreamGrad::zeros(16, 16);
  up.d_rgb.fill(1.0);
  RenderBatch batch = make_batch(stacked);
  RenderCachePtr cache;
  render_batch(batch, cam, opts, &cache);
  auto grads = render_batch_backward(batch, cam, opts, *cache, up);
  CHECK(grads[3].color_raw.norm() < 1e-10);
  CHECK(grads[3].mu.norm() < 1e-10);
}
