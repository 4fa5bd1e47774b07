#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gaudp/nn/rng.hpp"
#include "gaudp/nn/tensor.hpp"

namespace gaudp::nn {

// Named parameter set with matching gradient buffers.
template <typename T>
struct ParamStore {
  struct Entry {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
  };
  std::vector<Entry> entries;

  int add(const std::string& name, Tensor<T> value) {
    entries.push_back(Entry{name, std::move(value), Tensor<T>()});
    entries.back().grad = Tensor<T>(entries.back().value.shape);
    return static_cast<int>(entries.size()) - 1;
  }

  int add_xavier(const std::string& name, std::vector<std::size_t> shape, Rng& rng,
                 double fan_in, double fan_out) {
    Tensor<T> t(shape);
    double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
    return add(name, std::move(t));
  }

  int add_zeros(const std::string& name, std::vector<std::size_t> shape) {
    return add(name, Tensor<T>(shape));
  }

  int add_ones(const std::string& name, std::vector<std::size_t> shape) {
    Tensor<T> t(shape);
    t.fill(static_cast<T>(1));
    return add(name, std::move(t));
  }

  Tensor<T>& value(int id) { return entries[id].value; }
  Tensor<T>& grad(int id) { return entries[id].grad; }

  void zero_grads() {
    for (auto& e : entries) e.grad.fill(static_cast<T>(0));
  }

  std::size_t total_params() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.value.numel();
    return n;
  }
};

// Warmup-then-cosine learning-rate factor. Step index is 0-based: factor 0
// at the start of warmup, 1 at its end, cosine decay to `floor_frac` of the
// peak by total_steps.
struct LrSchedule {
  std::size_t warmup_steps = 0;
  std::size_t total_steps = 0;  // 0 disables the cosine part
  double floor_frac = 1.0;

  double factor(std::size_t step) const {
    if (warmup_steps > 0 && step < warmup_steps)
      return static_cast<double>(step) / static_cast<double>(warmup_steps);
    if (total_steps == 0 || total_steps <= warmup_steps) return 1.0;
    double progress = static_cast<double>(step - warmup_steps) /
                      static_cast<double>(total_steps - warmup_steps);
    progress = std::min(1.0, progress);
    return floor_frac + (1.0 - floor_frac) * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
  }
};

// Standard Adam with bias correction; lr is multiplied by the schedule
// factor at the current step.
template <typename T>
class Adam {
 public:
  Adam(double lr, LrSchedule schedule = LrSchedule{}, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : lr_(lr), schedule_(schedule), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Per-entry lr multipliers (empty = all 1).
  void set_lr_scales(std::vector<double> scales) { lr_scales_ = std::move(scales); }

  std::size_t step_count() const { return step_; }
  double current_factor() const { return schedule_.factor(step_); }

  void step(ParamStore<T>& params) {
    if (m_.empty()) {
      for (auto& e : params.entries) {
        m_.emplace_back(e.value.shape);
        v_.emplace_back(e.value.shape);
      }
    }
    for (auto& e : params.entries)
      if (!e.grad.all_finite()) throw NumericalError("adam: non-finite gradient in " + e.name);

    double factor = schedule_.factor(step_);
    ++step_;
    double t = static_cast<double>(step_);
    double bc1 = 1.0 - std::pow(beta1_, t);
    double bc2 = 1.0 - std::pow(beta2_, t);
    for (std::size_t p = 0; p < params.entries.size(); ++p) {
      auto& value = params.entries[p].value;
      auto& grad = params.entries[p].grad;
      double lr = lr_ * factor;
      if (!lr_scales_.empty()) lr *= lr_scales_[p];
      for (std::size_t i = 0; i < value.numel(); ++i) {
        double g = static_cast<double>(grad[i]);
        double m = beta1_ * static_cast<double>(m_[p][i]) + (1.0 - beta1_) * g;
        double v = beta2_ * static_cast<double>(v_[p][i]) + (1.0 - beta2_) * g * g;
        m_[p][i] = static_cast<T>(m);
        v_[p][i] = static_cast<T>(v);
        double update = lr * (m / bc1) / (std::sqrt(v / bc2) + eps_);
        value[i] = static_cast<T>(static_cast<double>(value[i]) - update);
      }
    }
  }

 private:
  double lr_;
  LrSchedule schedule_;
  double beta1_, beta2_, eps_;
  std::size_t step_ = 0;
  std::vector<Tensor<T>> m_, v_;
  std::vector<double> lr_scales_;
};

}  // namespace gaudp::nn
