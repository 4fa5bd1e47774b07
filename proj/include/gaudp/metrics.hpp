#pragma once

#include <utility>

#include "gaudp/nn/tensor.hpp"

namespace gaudp {

// Peak signal-to-noise ratio over [0,1] images of equal shape, MAX = 1.
// Capped at 100 dB when MSE < 1e-10.
double psnr(const nn::Tensor64& a, const nn::Tensor64& b);

// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// valid-region windows, averaged per channel. Images are [H,W,3] or [H,W];
// min spatial dim must be >= 11.
double ssim(const nn::Tensor64& a, const nn::Tensor64& b);

// SSIM plus its gradient with respect to `a` (for the L1+DSSIM recon loss).
std::pair<double, nn::Tensor64> ssim_with_grad(const nn::Tensor64& a, const nn::Tensor64& b);

// Wilson 95% score interval for k successes out of n.
struct WilsonInterval {
  double lo = 0, hi = 0;
};
WilsonInterval wilson95(int successes, int total);

}  // namespace gaudp
