#include "gaudp/policy.hpp"

#include <algorithm>
#include <cmath>

#include "gaudp/common.hpp"

namespace gaudp {

void PolicyConfig::validate() const {
  if (horizon < 1 || obs_steps < 1 || exec_steps < 1 || exec_steps > horizon)
    throw ConfigError("policy: need 1 <= exec_steps <= horizon and obs_steps >= 1");
  if (n_agents < 1 || feat < 4 || blocks < 1 || heads < 1 || feat % heads)
    throw ConfigError("policy: bad network dimensions");
  if (denoise_steps < 1) throw ConfigError("policy: denoise_steps must be >= 1");
  if (image_size % 8) throw ConfigError("policy: image size must divide by 8");
}

nn::Tensor64 ActionStats::standardize(const nn::Tensor64& actions) const {
  nn::Tensor64 out = actions;
  std::size_t d = mean.size();
  for (std::size_t i = 0; i < out.numel(); ++i) {
    std::size_t k = i % d;
    out[i] = (out[i] - mean[k]) / std::max(stddev[k], 1e-8);
  }
  return out;
}

nn::Tensor64 ActionStats::unstandardize(const nn::Tensor64& actions) const {
  nn::Tensor64 out = actions;
  std::size_t d = mean.size();
  for (std::size_t i = 0; i < out.numel(); ++i) {
    std::size_t k = i % d;
    out[i] = out[i] * std::max(stddev[k], 1e-8) + mean[k];
  }
  return out;
}

template <typename T>
DenoiserNet<T> DenoiserNet<T>::create(nn::ParamStore<T>& params, const std::string& prefix,
                                      int d_action, int horizon, int feat, int n_blocks,
                                      int heads, int ffn_mult, nn::Rng& rng) {
  DenoiserNet net;
  net.d_action = d_action;
  net.horizon = horizon;
  net.feat = feat;
  net.heads = heads;
  net.ffn_mult = ffn_mult;
  std::size_t f = feat;
  auto lin = [&](const std::string& name, std::size_t in, std::size_t out, int& w, int& b) {
    w = params.add_xavier(prefix + "." + name + ".w", {in, out}, rng, static_cast<double>(in),
                          static_cast<double>(out));
    b = params.add_zeros(prefix + "." + name + ".b", {out});
  };
  lin("embed", d_action, f, net.embed_w, net.embed_b);
  net.pos = params.add_xavier(prefix + ".pos", {static_cast<std::size_t>(horizon), f}, rng,
                              static_cast<double>(f), static_cast<double>(f));
  lin("time1", f, f, net.t_w1, net.t_b1);
  lin("time2", f, f, net.t_w2, net.t_b2);
  for (int b = 0; b < n_blocks; ++b) {
    Block blk;
    std::string p = "block" + std::to_string(b);
    blk.ln1_g = params.add_ones(prefix + "." + p + ".ln1.g", {f});
    blk.ln1_b = params.add_zeros(prefix + "." + p + ".ln1.b", {f});
    lin(p + ".self.q", f, f, blk.s_wq, blk.s_bq);
    lin(p + ".self.k", f, f, blk.s_wk, blk.s_bk);
    lin(p + ".self.v", f, f, blk.s_wv, blk.s_bv);
    lin(p + ".self.o", f, f, blk.s_wo, blk.s_bo);
    blk.ln2_g = params.add_ones(prefix + "." + p + ".ln2.g", {f});
    blk.ln2_b = params.add_zeros(prefix + "." + p + ".ln2.b", {f});
    lin(p + ".cross.q", f, f, blk.c_wq, blk.c_bq);
    lin(p + ".cross.k", f, f, blk.c_wk, blk.c_bk);
    lin(p + ".cross.v", f, f, blk.c_wv, blk.c_bv);
    lin(p + ".cross.o", f, f, blk.c_wo, blk.c_bo);
    blk.ln3_g = params.add_ones(prefix + "." + p + ".ln3.g", {f});
    blk.ln3_b = params.add_zeros(prefix + "." + p + ".ln3.b", {f});
    lin(p + ".ffn1", f, f * ffn_mult, blk.f_w1, blk.f_b1);
    lin(p + ".ffn2", f * ffn_mult, f, blk.f_w2, blk.f_b2);
    net.blocks.push_back(blk);
  }
  net.head_ln_g = params.add_ones(prefix + ".head_ln.g", {f});
  net.head_ln_b = params.add_zeros(prefix + ".head_ln.b", {f});
  // zero-initialized head: the untrained network predicts eps = 0
  net.head_w = params.add_zeros(prefix + ".head.w", {f, static_cast<std::size_t>(d_action)});
  net.head_b = params.add_zeros(prefix + ".head.b", {static_cast<std::size_t>(d_action)});
  return net;
}

template <typename T>
int DenoiserNet<T>::build(nn::Tape<T>& tape, const std::vector<int>& leaves, int a_leaf, int k,
                          int cond) const {
  auto L = [&](int id) { return leaves[id]; };
  int x = tape.linear(a_leaf, L(embed_w), L(embed_b));
  x = tape.add(x, L(pos));
  int temb = tape.leaf(nn::sinusoidal_embed<T>(static_cast<double>(k), feat), false);
  temb = tape.linear(tape.gelu(tape.linear(temb, L(t_w1), L(t_b1))), L(t_w2), L(t_b2));
  x = tape.row_broadcast_add(x, temb);
  for (const Block& b : blocks) {
    int h = tape.layernorm(x, L(b.ln1_g), L(b.ln1_b));
    h = tape.mha(h, h, L(b.s_wq), L(b.s_bq), L(b.s_wk), L(b.s_bk), L(b.s_wv), L(b.s_bv),
                 L(b.s_wo), L(b.s_bo), heads);
    x = tape.add(x, h);
    h = tape.layernorm(x, L(b.ln2_g), L(b.ln2_b));
    h = tape.mha(h, cond, L(b.c_wq), L(b.c_bq), L(b.c_wk), L(b.c_bk), L(b.c_wv), L(b.c_bv),
                 L(b.c_wo), L(b.c_bo), heads);
    x = tape.add(x, h);
    h = tape.layernorm(x, L(b.ln3_g), L(b.ln3_b));
    h = tape.linear(tape.gelu(tape.linear(h, L(b.f_w1), L(b.f_b1))), L(b.f_w2), L(b.f_b2));
    x = tape.add(x, h);
  }
  x = tape.layernorm(x, L(head_ln_g), L(head_ln_b));
  return tape.linear(x, L(head_w), L(head_b));
}

template struct DenoiserNet<float>;
template struct DenoiserNet<double>;

PolicyModel PolicyModel::create(const PolicyConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  PolicyModel model;
  model.cfg = cfg;
  nn::Rng rng(seed);
  FusionConfig fcfg;
  fcfg.feat = cfg.feat;
  fcfg.image_size = cfg.image_size;
  fcfg.mode = cfg.context_mode;
  fcfg.use_state = cfg.use_state;
  model.fusion = FusionNet<float>::create(model.params, fcfg, rng);
  int n_denoisers = cfg.global_policy ? 1 : cfg.n_agents;
  for (int i = 0; i < n_denoisers; ++i) {
    std::string prefix = cfg.global_policy ? "denoiser" : "denoiser" + std::to_string(i);
    model.denoisers.push_back(DenoiserNet<float>::create(
        model.params, prefix, cfg.denoiser_action_dim(), cfg.horizon, cfg.feat, cfg.blocks,
        cfg.heads, cfg.ffn_mult, rng));
  }
  model.schedule = make_schedule(cfg.schedule_kind, cfg.denoise_steps);
  model.action_stats.mean.assign(cfg.joint_action_dim(), 0.0);
  model.action_stats.stddev.assign(cfg.joint_action_dim(), 1.0);
  return model;
}

namespace {

std::vector<int> param_leaves(nn::Tape<float>& tape, const nn::ParamStore<float>& params,
                              bool fusion_grad, bool denoiser_grad) {
  std::vector<int> leaves;
  leaves.reserve(params.entries.size());
  for (const auto& e : params.entries) {
    bool is_fusion = e.name.rfind("fusion.", 0) == 0;
    bool ng = is_fusion ? fusion_grad : denoiser_grad;
    leaves.push_back(tape.leaf(e.value, ng));
  }
  return leaves;
}

// Per-agent slice of the conditioning (its own tokens plus its state token).
int agent_cond_slice(nn::Tape<float>& tape, int cond, const ConditioningLayout& layout,
                     int agent) {
  int tokens = tape.slice_rows(cond, layout.agent_tokens_begin(agent),
                               layout.agent_tokens_end(agent));
  if (!layout.has_state) return tokens;
  int state = tape.slice_rows(cond, layout.state_row(agent), layout.state_row(agent) + 1);
  return tape.concat_rows({tokens, state});
}

}  // namespace

double policy_train_loss(PolicyModel& model, const std::vector<TrainSample>& batch,
                         std::uint64_t step_seed) {
  if (batch.empty()) throw ConfigError("train: empty batch");
  const PolicyConfig& cfg = model.cfg;
  std::size_t n = batch.size();

  std::vector<double> losses(n, 0.0);
  std::vector<std::vector<nn::Tensor32>> sample_grads(n);

  parallel_for(n, [&](std::size_t s) {
    const TrainSample& item = batch[s];
    nn::Rng rng(nn::Rng::derive(step_seed, s));
    nn::Tape<float> tape;
    auto leaves = param_leaves(tape, model.params, cfg.finetune_fusion, true);
    ConditioningLayout layout;
    int cond = encode_observations_on_tape(tape, model.fusion, model.params, leaves, item.bundle,
                                           item.field, model.grid_stats, &layout);

    nn::Tensor64 a0 = model.action_stats.standardize(item.actions);
    int k = 1 + static_cast<int>(rng.below(cfg.denoise_steps));
    nn::Tensor64 eps = gaussian_like(a0.shape, rng);
    nn::Tensor64 a_k = q_sample(a0, k, eps, model.schedule);

    int loss_node = -1;
    if (cfg.global_policy) {
      int a_leaf = tape.leaf(a_k.cast<float>(), false);
      int eps_hat = model.denoisers[0].build(tape, leaves, a_leaf, k, cond);
      loss_node = tape.mse_const(eps_hat, eps.cast<float>());
    } else {
      std::vector<int> parts;
      for (int a = 0; a < cfg.n_agents; ++a) {
        nn::Tensor32 a_k_a({static_cast<std::size_t>(cfg.horizon), 4});
        nn::Tensor32 eps_a({static_cast<std::size_t>(cfg.horizon), 4});
        for (int t = 0; t < cfg.horizon; ++t)
          for (int j = 0; j < 4; ++j) {
            a_k_a.at2(t, j) = static_cast<float>(a_k.at2(t, 4 * a + j));
            eps_a.at2(t, j) = static_cast<float>(eps.at2(t, 4 * a + j));
          }
        int cond_a = agent_cond_slice(tape, cond, layout, a);
        int eps_hat = model.denoisers[a].build(tape, leaves, tape.leaf(a_k_a, false), k, cond_a);
        parts.push_back(tape.mse_const(eps_hat, eps_a));
      }
      int acc = parts[0];
      for (std::size_t i = 1; i < parts.size(); ++i) acc = tape.add(acc, parts[i]);
      loss_node = tape.scale(acc, 1.0f / static_cast<float>(parts.size()));
    }

    losses[s] = tape.val(loss_node)[0];
    tape.backward(loss_node, 1.0f / static_cast<float>(n));
    auto& grads = sample_grads[s];
    grads.resize(model.params.entries.size());
    for (std::size_t p = 0; p < leaves.size(); ++p)
      if (tape.needs_grad(leaves[p])) grads[p] = std::move(tape.grad(leaves[p]));
  });

  // deterministic reduction in sample order
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t p = 0; p < model.params.entries.size(); ++p) {
      const nn::Tensor32& g = sample_grads[s][p];
      if (g.numel() == 0) continue;
      auto& dst = model.params.entries[p].grad;
      for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
    }

  double loss = 0;
  for (double l : losses) loss += l;
  loss /= static_cast<double>(n);
  if (!std::isfinite(loss)) throw NumericalError("train: NaN loss in batch");
  return loss;
}

namespace {

nn::Tensor64 denoise_forward(PolicyModel& model, int denoiser_idx, const nn::Tensor64& a_k,
                             int k, const nn::Tensor32& cond_values) {
  nn::Tape<float> tape;
  auto leaves = param_leaves(tape, model.params, false, false);
  int cond = tape.leaf(cond_values, false);
  int a_leaf = tape.leaf(a_k.cast<float>(), false);
  int eps_hat = model.denoisers[denoiser_idx].build(tape, leaves, a_leaf, k, cond);
  return tape.val(eps_hat).cast<double>();
}

nn::Tensor64 sample_one(PolicyModel& model, int denoiser_idx, const nn::Tensor32& cond_values,
                        int d, nn::Rng& rng, SamplerKind sampler, int ddim_steps) {
  const PolicyConfig& cfg = model.cfg;
  std::vector<std::size_t> shape{static_cast<std::size_t>(cfg.horizon),
                                 static_cast<std::size_t>(d)};
  nn::Tensor64 a = gaussian_like(shape, rng);
  if (sampler == SamplerKind::Ddpm) {
    for (int k = cfg.denoise_steps; k >= 1; --k) {
      nn::Tensor64 eps_hat = denoise_forward(model, denoiser_idx, a, k, cond_values);
      nn::Tensor64 z = k > 1 ? gaussian_like(shape, rng) : nn::Tensor64(shape);
      a = p_step(a, k, eps_hat, z, model.schedule);
    }
  } else {
    int n = ddim_steps > 0 ? ddim_steps : cfg.denoise_steps;
    std::vector<int> seq = ddim_step_sequence(cfg.denoise_steps, n);
    for (int i = static_cast<int>(seq.size()) - 1; i >= 0; --i) {
      int k_hi = seq[i];
      int k_lo = i > 0 ? seq[i - 1] : 0;
      nn::Tensor64 eps_hat = denoise_forward(model, denoiser_idx, a, k_hi, cond_values);
      a = ddim_step(a, k_hi, k_lo, eps_hat, model.schedule);
    }
  }
  return a;
}

}  // namespace

nn::Tensor64 policy_sample(PolicyModel& model, const ObservationBundle& bundle,
                           const GaussianField* field, nn::Rng& rng, SamplerKind sampler,
                           int ddim_steps) {
  const PolicyConfig& cfg = model.cfg;
  ConditioningLayout layout;
  nn::Tensor32 cond = encode_observations(model.fusion, model.params, bundle, field,
                                          model.grid_stats, &layout);

  nn::Tensor64 joint({static_cast<std::size_t>(cfg.horizon),
                      static_cast<std::size_t>(cfg.joint_action_dim())});
  if (cfg.global_policy) {
    joint = sample_one(model, 0, cond, cfg.joint_action_dim(), rng, sampler, ddim_steps);
  } else {
    for (int a = 0; a < cfg.n_agents; ++a) {
      // materialize the agent's conditioning slice
      std::size_t f = cond.dim(1);
      std::size_t rows = layout.agent_tokens_end(a) - layout.agent_tokens_begin(a);
      std::size_t total = rows + (layout.has_state ? 1 : 0);
      nn::Tensor32 cond_a({total, f});
      std::copy(&cond.data[layout.agent_tokens_begin(a) * f],
                &cond.data[layout.agent_tokens_end(a) * f], cond_a.data.begin());
      if (layout.has_state)
        std::copy(&cond.data[layout.state_row(a) * f], &cond.data[(layout.state_row(a) + 1) * f],
                  cond_a.data.begin() + rows * f);
      nn::Tensor64 a_traj = sample_one(model, a, cond_a, 4, rng, sampler, ddim_steps);
      for (int t = 0; t < cfg.horizon; ++t)
        for (int j = 0; j < 4; ++j) joint.at2(t, 4 * a + j) = a_traj.at2(t, j);
    }
  }
  return model.action_stats.unstandardize(joint);
}

ObservationBundle make_bundle(const std::vector<sim::Observation>& history, int obs_steps) {
  if (history.empty()) throw ConfigError("bundle: empty history");
  ObservationBundle bundle;
  for (int s = 0; s < obs_steps; ++s) {
    int idx = static_cast<int>(history.size()) - obs_steps + s;
    if (idx < 0) idx = 0;  // earliest frame repeated to fill the window
    bundle.frames.push_back(history[idx].rgb);
  }
  bundle.states = history.back().states;
  bundle.cameras = history.back().cameras;
  return bundle;
}

nn::Tensor64 ReplayPlanner::plan(const ObservationBundle&) {
  std::size_t d = actions_.empty() ? 0 : actions_[0].size();
  nn::Tensor64 out({static_cast<std::size_t>(horizon_), d});
  for (int t = 0; t < horizon_; ++t) {
    int idx = std::min<int>(cursor_ + t, static_cast<int>(actions_.size()) - 1);
    if (idx < 0) break;
    for (std::size_t k = 0; k < d; ++k) out.at2(t, k) = actions_[idx][k];
  }
  cursor_ += exec_steps_;
  return out;
}

sim::EpisodeRecord act(ActionPlanner& planner, sim::SimEnv& env, int max_steps, int obs_steps,
                       int exec_steps, bool record_depth) {
  if (exec_steps < 1 || exec_steps > planner.horizon())
    throw ConfigError("act: exec_steps must be in [1, horizon]");
  sim::EpisodeRecord rec;
  rec.seed = env.state().seed;
  rec.task = env.state().task.name;

  std::vector<sim::Observation> history;
  int executed = 0;
  while (executed < max_steps && env.status() == sim::EnvStatus::Running) {
    history.push_back(env.observe(record_depth));
    ObservationBundle bundle = make_bundle(history, obs_steps);
    nn::Tensor64 plan = planner.plan(bundle);
    int to_run = std::min(exec_steps, max_steps - executed);
    for (int t = 0; t < to_run && env.status() == sim::EnvStatus::Running; ++t) {
      if (t > 0) history.push_back(env.observe(record_depth));
      rec.observations.push_back(history.back());
      std::vector<double> action(plan.dim(1));
      for (std::size_t k = 0; k < action.size(); ++k) action[k] = plan.at2(t, k);
      rec.actions.push_back(action);
      env.step(action);
      ++executed;
    }
  }
  rec.success = env.status() == sim::EnvStatus::Success;
  return rec;
}

}  // namespace gaudp
