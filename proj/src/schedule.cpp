#include "gaudp/schedule.hpp"

#include <cmath>

#include "gaudp/common.hpp"

namespace gaudp {

void NoiseSchedule::check_step(int k) const {
  if (k < 1 || k > steps)
    throw ConfigError("schedule: step " + std::to_string(k) + " outside [1, " +
                      std::to_string(steps) + "]");
}

NoiseSchedule make_schedule(ScheduleKind kind, int steps) {
  if (steps < 1) throw ConfigError("schedule: need at least one step");
  NoiseSchedule s;
  s.steps = steps;
  s.betas.resize(steps);
  if (kind == ScheduleKind::Linear) {
    double lo = 1e-4, hi = 0.02;
    for (int i = 0; i < steps; ++i)
      s.betas[i] = steps == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (steps - 1);
  } else {
    // squared-cosine alpha-bar profile
    double offset = 0.008;
    auto f = [&](double t) {
      double v = std::cos((t / steps + offset) / (1.0 + offset) * M_PI / 2.0);
      return v * v;
    };
    double f0 = f(0.0);
    double prev = 1.0;
    for (int i = 0; i < steps; ++i) {
      double abar = f(static_cast<double>(i + 1)) / f0;
      double beta = 1.0 - abar / prev;
      s.betas[i] = std::min(0.999, std::max(1e-8, beta));
      prev = abar;
    }
  }
  s.alphas.resize(steps);
  s.alpha_bars.resize(steps);
  double running = 1.0;
  for (int i = 0; i < steps; ++i) {
    s.alphas[i] = 1.0 - s.betas[i];
    running *= s.alphas[i];
    s.alpha_bars[i] = running;
  }
  return s;
}

nn::Tensor64 q_sample(const nn::Tensor64& a0, int k, const nn::Tensor64& eps,
                      const NoiseSchedule& schedule) {
  schedule.check_step(k);
  nn::check_same_shape("q_sample", a0.shape, eps.shape);
  double abar = schedule.alpha_bar(k);
  double ca = std::sqrt(abar), ce = std::sqrt(1.0 - abar);
  nn::Tensor64 out = a0;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = ca * a0[i] + ce * eps[i];
  return out;
}

nn::Tensor64 p_step(const nn::Tensor64& a_k, int k, const nn::Tensor64& eps_hat,
                    const nn::Tensor64& z, const NoiseSchedule& schedule) {
  schedule.check_step(k);
  nn::check_same_shape("p_step", a_k.shape, eps_hat.shape);
  double beta = schedule.beta(k);
  double abar = schedule.alpha_bar(k);
  double abar_prev = schedule.alpha_bar(k - 1);
  double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha(k));
  double eps_coef = beta / std::sqrt(1.0 - abar);
  double sigma = k == 1 ? 0.0 : std::sqrt(beta * (1.0 - abar_prev) / (1.0 - abar));
  nn::Tensor64 out = a_k;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out[i] = inv_sqrt_alpha * (a_k[i] - eps_coef * eps_hat[i]);
    if (sigma > 0) out[i] += sigma * z[i];
  }
  return out;
}

nn::Tensor64 ddim_step(const nn::Tensor64& a_hi, int k_hi, int k_lo,
                       const nn::Tensor64& eps_hat, const NoiseSchedule& schedule) {
  schedule.check_step(k_hi);
  if (k_lo < 0 || k_lo >= k_hi) throw ConfigError("ddim: need 0 <= k_lo < k_hi");
  double abar_hi = schedule.alpha_bar(k_hi);
  double abar_lo = schedule.alpha_bar(k_lo);
  double sa_hi = std::sqrt(abar_hi), se_hi = std::sqrt(1.0 - abar_hi);
  double sa_lo = std::sqrt(abar_lo), se_lo = std::sqrt(1.0 - abar_lo);
  nn::Tensor64 out = a_hi;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    double pred_a0 = (a_hi[i] - se_hi * eps_hat[i]) / sa_hi;
    out[i] = sa_lo * pred_a0 + se_lo * eps_hat[i];
  }
  return out;
}

std::vector<int> ddim_step_sequence(int steps, int ddim_steps) {
  if (ddim_steps < 1 || ddim_steps > steps)
    throw ConfigError("ddim: step count must be in [1, K]");
  std::vector<int> seq(ddim_steps);
  for (int i = 0; i < ddim_steps; ++i)
    seq[i] = static_cast<int>(std::lround(static_cast<double>(steps) * (i + 1) / ddim_steps));
  seq.back() = steps;
  return seq;
}

nn::Tensor64 gaussian_like(const std::vector<std::size_t>& shape, nn::Rng& rng) {
  nn::Tensor64 out(shape);
  for (auto& v : out.data) v = rng.normal();
  return out;
}

}  // namespace gaudp
