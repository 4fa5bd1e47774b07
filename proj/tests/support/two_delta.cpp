#include "two_delta.hpp"

#include "gaudp/nn/adam.hpp"
#include "gaudp/policy.hpp"
#include "gaudp/schedule.hpp"

namespace gaudp::testsupport {

TwoDeltaResult run_two_delta(int train_steps, int n_samples, std::uint64_t seed, bool ddim) {
  // tiny unconditional denoiser: L=1, d=1, a single zero conditioning token
  const int feat = 16;
  nn::ParamStore<float> params;
  nn::Rng init_rng(seed);
  auto net = DenoiserNet<float>::create(params, "toy", 1, 1, feat, 1, 2, 2, init_rng);
  NoiseSchedule schedule = make_schedule(ScheduleKind::Linear, 100);
  nn::Tensor32 cond({1, feat});  // unconditional: one zero token

  nn::LrSchedule lr_schedule{50, static_cast<std::size_t>(train_steps), 0.1};
  nn::Adam<float> opt(3e-3, lr_schedule);
  nn::Rng rng(seed + 1);
  const int batch = 64;

  double final_loss = 0;
  for (int step = 0; step < train_steps; ++step) {
    params.zero_grads();
    double loss = 0;
    for (int b = 0; b < batch; ++b) {
      nn::Tensor64 a0({1, 1});
      a0[0] = (b % 2 == 0) ? 1.0 : -1.0;  // exactly balanced modes
      int k = 1 + static_cast<int>(rng.below(100));
      nn::Tensor64 eps({1, 1});
      eps[0] = rng.normal();
      nn::Tensor64 a_k = q_sample(a0, k, eps, schedule);

      nn::Tape<float> tape;
      std::vector<int> leaves;
      for (const auto& e : params.entries) leaves.push_back(tape.leaf(e.value, true));
      int eps_hat = net.build(tape, leaves, tape.leaf(a_k.cast<float>(), false), k,
                              tape.leaf(cond, false));
      int loss_node = tape.mse_const(eps_hat, eps.cast<float>());
      loss += tape.val(loss_node)[0];
      tape.backward(loss_node, 1.0f / batch);
      for (std::size_t p = 0; p < leaves.size(); ++p) {
        const auto& g = tape.grad(leaves[p]);
        for (std::size_t i = 0; i < g.numel(); ++i) params.entries[p].grad[i] += g[i];
      }
    }
    opt.step(params);
    final_loss = loss / batch;
  }

  auto eps_forward = [&](const nn::Tensor64& a, int k) {
    nn::Tape<float> tape;
    std::vector<int> leaves;
    for (const auto& e : params.entries) leaves.push_back(tape.leaf(e.value, false));
    int eps_hat =
        net.build(tape, leaves, tape.leaf(a.cast<float>(), false), k, tape.leaf(cond, false));
    return tape.val(eps_hat).cast<double>();
  };

  TwoDeltaResult result;
  result.final_loss = final_loss;
  nn::Rng srng(seed + 2);
  int n_pos = 0, n_neg = 0;
  double sum_pos = 0, sum_neg = 0;
  for (int i = 0; i < n_samples; ++i) {
    nn::Tensor64 a({1, 1});
    a[0] = srng.normal();
    if (!ddim) {
      for (int k = 100; k >= 1; --k) {
        nn::Tensor64 z({1, 1});
        if (k > 1) z[0] = srng.normal();
        a = p_step(a, k, eps_forward(a, k), z, schedule);
      }
    } else {
      auto seq = ddim_step_sequence(100, 100);
      for (int s = static_cast<int>(seq.size()) - 1; s >= 0; --s)
        a = ddim_step(a, seq[s], s > 0 ? seq[s - 1] : 0, eps_forward(a, seq[s]), schedule);
    }
    if (a[0] >= 0) {
      ++n_pos;
      sum_pos += a[0];
    } else {
      ++n_neg;
      sum_neg += a[0];
    }
  }
  result.frac_positive = static_cast<double>(n_pos) / n_samples;
  result.center_pos = n_pos ? sum_pos / n_pos : 0;
  result.center_neg = n_neg ? sum_neg / n_neg : 0;
  return result;
}

}  // namespace gaudp::testsupport
