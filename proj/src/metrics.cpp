#include "gaudp/metrics.hpp"

#include <array>
#include <cmath>

#include "gaudp/common.hpp"

namespace gaudp {

double psnr(const nn::Tensor64& a, const nn::Tensor64& b) {
  nn::check_same_shape("psnr", a.shape, b.shape);
  if (a.numel() == 0) throw ConfigError("psnr: empty image");
  double mse = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    double d = a[i] - b[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.numel());
  if (mse < 1e-10) return 100.0;
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

constexpr int kWin = 11;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, kWin>& gaussian_window() {
  static const std::array<double, kWin> w = [] {
    std::array<double, kWin> out{};
    double sum = 0;
    for (int i = 0; i < kWin; ++i) {
      double d = i - (kWin - 1) / 2.0;
      out[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
      sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
  }();
  return w;
}

struct SsimPlane {
  // windowed moments on the valid grid
  std::vector<double> mu_a, mu_b, s_aa, s_bb, s_ab, value;
  int vh = 0, vw = 0;
};

// Separable windowed sums of a, b, a^2, b^2, ab.
SsimPlane ssim_plane(const double* a, const double* b, int h, int w, std::size_t stride) {
  const auto& win = gaussian_window();
  int vh = h - kWin + 1, vw = w - kWin + 1;
  SsimPlane p;
  p.vh = vh;
  p.vw = vw;
  auto filt = [&](auto&& get) {
    // horizontal then vertical pass
    std::vector<double> tmp(static_cast<std::size_t>(h) * vw);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < vw; ++x) {
        double acc = 0;
        for (int k = 0; k < kWin; ++k) acc += win[k] * get(y, x + k);
        tmp[static_cast<std::size_t>(y) * vw + x] = acc;
      }
    std::vector<double> out(static_cast<std::size_t>(vh) * vw);
    for (int y = 0; y < vh; ++y)
      for (int x = 0; x < vw; ++x) {
        double acc = 0;
        for (int k = 0; k < kWin; ++k) acc += win[k] * tmp[static_cast<std::size_t>(y + k) * vw + x];
        out[static_cast<std::size_t>(y) * vw + x] = acc;
      }
    return out;
  };
  auto va = [&](int y, int x) { return a[(static_cast<std::size_t>(y) * w + x) * stride]; };
  auto vb = [&](int y, int x) { return b[(static_cast<std::size_t>(y) * w + x) * stride]; };
  p.mu_a = filt(va);
  p.mu_b = filt(vb);
  p.s_aa = filt([&](int y, int x) { return va(y, x) * va(y, x); });
  p.s_bb = filt([&](int y, int x) { return vb(y, x) * vb(y, x); });
  p.s_ab = filt([&](int y, int x) { return va(y, x) * vb(y, x); });
  p.value.resize(p.mu_a.size());
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    double mx = p.mu_a[i], my = p.mu_b[i];
    double sx = p.s_aa[i] - mx * mx;
    double sy = p.s_bb[i] - my * my;
    double sxy = p.s_ab[i] - mx * my;
    double a1 = 2 * mx * my + kC1, a2 = 2 * sxy + kC2;
    double b1 = mx * mx + my * my + kC1, b2 = sx + sy + kC2;
    p.value[i] = (a1 * a2) / (b1 * b2);
  }
  return p;
}

void check_ssim_input(const nn::Tensor64& a, const nn::Tensor64& b, int& h, int& w, int& ch) {
  nn::check_same_shape("ssim", a.shape, b.shape);
  if (a.rank() == 2) {
    h = static_cast<int>(a.dim(0));
    w = static_cast<int>(a.dim(1));
    ch = 1;
  } else if (a.rank() == 3) {
    h = static_cast<int>(a.dim(0));
    w = static_cast<int>(a.dim(1));
    ch = static_cast<int>(a.dim(2));
  } else {
    throw ConfigError("ssim: expected [H,W] or [H,W,C]");
  }
  if (h < kWin || w < kWin) throw ConfigError("ssim: image smaller than the 11x11 window");
}

}  // namespace

double ssim(const nn::Tensor64& a, const nn::Tensor64& b) {
  int h, w, ch;
  check_ssim_input(a, b, h, w, ch);
  double total = 0;
  for (int c = 0; c < ch; ++c) {
    SsimPlane p = ssim_plane(a.ptr() + c, b.ptr() + c, h, w, ch);
    double acc = 0;
    for (double v : p.value) acc += v;
    total += acc / static_cast<double>(p.value.size());
  }
  return total / ch;
}

std::pair<double, nn::Tensor64> ssim_with_grad(const nn::Tensor64& a, const nn::Tensor64& b) {
  int h, w, ch;
  check_ssim_input(a, b, h, w, ch);
  const auto& win = gaussian_window();
  nn::Tensor64 grad(a.shape);
  double total = 0;
  for (int c = 0; c < ch; ++c) {
    SsimPlane p = ssim_plane(a.ptr() + c, b.ptr() + c, h, w, ch);
    double acc = 0;
    for (double v : p.value) acc += v;
    double n_windows = static_cast<double>(p.value.size());
    total += acc / n_windows;
    // dSSIM/da_i = sum over windows containing i of
    //   w_off * (alpha_p + beta_p * a_i + gamma_p * b_i),
    // folded as three window->pixel correlation passes.
    double scale = 1.0 / (n_windows * ch);
    for (int wy = 0; wy < p.vh; ++wy) {
      for (int wx = 0; wx < p.vw; ++wx) {
        std::size_t pi = static_cast<std::size_t>(wy) * p.vw + wx;
        double mx = p.mu_a[pi], my = p.mu_b[pi];
        double sx = p.s_aa[pi] - mx * mx;
        double sy = p.s_bb[pi] - my * my;
        double sxy = p.s_ab[pi] - mx * my;
        double a1 = 2 * mx * my + kC1, a2 = 2 * sxy + kC2;
        double b1 = mx * mx + my * my + kC1, b2 = sx + sy + kC2;
        double s = (a1 * a2) / (b1 * b2);
        double inv = 2.0 / (b1 * b2);
        double alpha = inv * (my * (a2 - a1) + s * mx * (b1 - b2));
        double beta = -2.0 * s / b2;
        double gamma = 2.0 * a1 / (b1 * b2);
        for (int ky = 0; ky < kWin; ++ky) {
          for (int kx = 0; kx < kWin; ++kx) {
            double wgt = win[ky] * win[kx] * scale;
            std::size_t pix = (static_cast<std::size_t>(wy + ky) * w + (wx + kx)) * ch + c;
            grad.data[pix] += wgt * (alpha + beta * a.data[pix] + gamma * b.data[pix]);
          }
        }
      }
    }
  }
  return {total / ch, std::move(grad)};
}

WilsonInterval wilson95(int successes, int total) {
  if (total <= 0) return {0, 0};
  double z = 1.959963984540054;
  double n = total, p = static_cast<double>(successes) / n;
  double z2 = z * z;
  double denom = 1.0 + z2 / n;
  double center = (p + z2 / (2 * n)) / denom;
  double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

}  // namespace gaudp
