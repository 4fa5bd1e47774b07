#include <doctest.h>

#include <cmath>

#include "gaudp/metrics.hpp"
#include "gaudp/nn/gradcheck.hpp"
#include "gaudp/nn/rng.hpp"

using namespace gaudp;
using nn::Tensor64;

namespace {
Tensor64 random_image(int h, int w, std::uint64_t seed) {
  Tensor64 img({(std::size_t)h, (std::size_t)w, 3});
  nn::Rng rng(seed);
  for (auto& v : img.data) v = rng.uniform();
  return img;
}
}  // namespace

TEST_CASE("psnr identities") {
  Tensor64 a = random_image(12, 12, 1);
  CHECK(psnr(a, a) == 100.0);

  // uniform +0.1 offset -> MSE 0.01 -> 20 dB
  Tensor64 base({16, 16, 3});
  nn::Rng rng(2);
  for (auto& v : base.data) v = rng.uniform(0.0, 0.85);
  Tensor64 shifted = base;
  for (auto& v : shifted.data) v += 0.1;
  CHECK(psnr(base, shifted) == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(psnr(base, shifted) == psnr(shifted, base));

  Tensor64 wrong({8, 8, 3});
  CHECK_THROWS_AS(psnr(a, wrong), ConfigError);
}

TEST_CASE("ssim identities") {
  Tensor64 a = random_image(16, 16, 3);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  Tensor64 b = random_image(16, 16, 4);
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));

  Tensor64 tiny({8, 8, 3});
  CHECK_THROWS_AS(ssim(tiny, tiny), ConfigError);
}

TEST_CASE("ssim of an image against its negative is negative") {
  // binary checkerboard: every window has high variance and inverted structure
  Tensor64 a({16, 16});
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) a.data[y * 16 + x] = ((x / 2 + y / 2) % 2) ? 1.0 : 0.0;
  Tensor64 b = a;
  for (auto& v : b.data) v = 1.0 - v;
  CHECK(ssim(a, b) < 0.0);
}

TEST_CASE("ssim of constant vs constant plus tiny noise stays near one") {
  Tensor64 a({16, 16});
  a.fill(0.5);
  Tensor64 b = a;
  nn::Rng rng(7);
  for (auto& v : b.data) v += rng.normal() * 1e-4;
  CHECK(ssim(a, b) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("ssim gradient matches finite differences") {
  Tensor64 a = random_image(14, 14, 11);
  Tensor64 b = random_image(14, 14, 12);
  auto [value, grad] = ssim_with_grad(a, b);
  CHECK(value == doctest::Approx(ssim(a, b)).epsilon(1e-12));
  auto eval = [&]() { return ssim(a, b); };
  // spot-check a subset of pixels, full check is slow
  nn::Rng rng(13);
  double worst = 0;
  for (int trial = 0; trial < 60; ++trial) {
    std::size_t i = rng.below(a.numel());
    double saved = a[i];
    double h = 1e-6;
    a[i] = saved + h;
    double up = eval();
    a[i] = saved - h;
    double down = eval();
    a[i] = saved;
    worst = std::max(worst, nn::rel_error(grad[i], (up - down) / (2 * h), 1e-8));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("wilson interval sanity") {
  auto w = wilson95(50, 100);
  CHECK(w.lo > 0.40);
  CHECK(w.hi < 0.60);
  CHECK(w.lo < 0.5);
  CHECK(w.hi > 0.5);
  auto all = wilson95(100, 100);
  CHECK(all.hi == 1.0);
  CHECK(all.lo > 0.95);
  auto none = wilson95(0, 100);
  CHECK(none.lo == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(none.hi < 0.05);
}
