#pragma once

#include <cstdint>
#include <vector>

#include "gaudp/nn/rng.hpp"
#include "gaudp/nn/tensor.hpp"

namespace gaudp {

enum class ScheduleKind { Linear, Cosine };

// DDPM coefficients over K steps; index i holds step k = i+1, and
// alpha_bar(0) == 1 by convention.
struct NoiseSchedule {
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;
  int steps = 0;

  double beta(int k) const { return betas.at(k - 1); }
  double alpha(int k) const { return alphas.at(k - 1); }
  double alpha_bar(int k) const { return k == 0 ? 1.0 : alpha_bars.at(k - 1); }
  void check_step(int k) const;
};

// Linear: beta interpolates 1e-4 -> 0.02 inclusive. Cosine: squared-cosine
// alpha-bar profile.
NoiseSchedule make_schedule(ScheduleKind kind, int steps);

// Closed-form forward noising: sqrt(abar_k) a0 + sqrt(1 - abar_k) eps.
nn::Tensor64 q_sample(const nn::Tensor64& a0, int k, const nn::Tensor64& eps,
                      const NoiseSchedule& schedule);

// One reverse step given the predicted noise:
//   mean = (a_k - beta_k / sqrt(1-abar_k) * eps_hat) / sqrt(alpha_k)
//   sigma_k^2 = beta_k (1 - abar_{k-1}) / (1 - abar_k), z suppressed at k=1.
nn::Tensor64 p_step(const nn::Tensor64& a_k, int k, const nn::Tensor64& eps_hat,
                    const nn::Tensor64& z, const NoiseSchedule& schedule);

// Deterministic DDIM update (eta = 0) from step k_hi to k_lo < k_hi.
nn::Tensor64 ddim_step(const nn::Tensor64& a_hi, int k_hi, int k_lo,
                       const nn::Tensor64& eps_hat, const NoiseSchedule& schedule);

// Evenly spaced DDIM step subsequence ending at `steps`; e.g. K=100, n=10
// gives 10, 20, ..., 100.
std::vector<int> ddim_step_sequence(int steps, int ddim_steps);

nn::Tensor64 gaussian_like(const std::vector<std::size_t>& shape, nn::Rng& rng);

}  // namespace gaudp
