#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gaudp/fusion.hpp"
#include "gaudp/schedule.hpp"
#include "gaudp/sim/dataset.hpp"
#include "gaudp/sim/env.hpp"

namespace gaudp {

enum class SamplerKind { Ddpm, Ddim };

struct PolicyConfig {
  int horizon = 8;       // L: predicted action steps
  int obs_steps = 3;     // frames per observation window
  int exec_steps = 6;    // actions executed per prediction
  int n_agents = 2;
  int feat = 64;         // token width shared by fusion and denoiser
  int blocks = 4;
  int heads = 4;
  int ffn_mult = 4;
  int denoise_steps = 100;  // K
  ScheduleKind schedule_kind = ScheduleKind::Linear;
  ContextMode context_mode = ContextMode::Full;
  bool global_policy = true;  // false: one independent policy per agent
  bool use_state = true;
  bool finetune_fusion = true;
  int image_size = 64;

  int joint_action_dim() const { return 4 * n_agents; }
  int denoiser_action_dim() const { return global_policy ? joint_action_dim() : 4; }
  void validate() const;
};

struct ActionStats {
  std::vector<double> mean, stddev;  // joint action dim

  nn::Tensor64 standardize(const nn::Tensor64& actions) const;
  nn::Tensor64 unstandardize(const nn::Tensor64& actions) const;
};

// Transformer denoiser: per-step action embedding, learned positions,
// sinusoidal diffusion-step embedding through a 2-layer MLP, `blocks` blocks
// of self-attention over the action tokens + cross-attention to the
// conditioning + feed-forward, zero-initialized output head.
template <typename T>
struct DenoiserNet {
  int d_action = 0, horizon = 0, feat = 0, heads = 0, ffn_mult = 4;
  int embed_w = -1, embed_b = -1, pos = -1;
  int t_w1 = -1, t_b1 = -1, t_w2 = -1, t_b2 = -1;
  struct Block {
    int ln1_g, ln1_b, s_wq, s_bq, s_wk, s_bk, s_wv, s_bv, s_wo, s_bo;
    int ln2_g, ln2_b, c_wq, c_bq, c_wk, c_bk, c_wv, c_bv, c_wo, c_bo;
    int ln3_g, ln3_b, f_w1, f_b1, f_w2, f_b2;
  };
  std::vector<Block> blocks;
  int head_ln_g = -1, head_ln_b = -1, head_w = -1, head_b = -1;

  static DenoiserNet create(nn::ParamStore<T>& params, const std::string& prefix, int d_action,
                            int horizon, int feat, int n_blocks, int heads, int ffn_mult,
                            nn::Rng& rng);

  // a_k leaf [L,d] + diffusion step k + conditioning node -> eps_hat [L,d]
  int build(nn::Tape<T>& tape, const std::vector<int>& leaves, int a_leaf, int k,
            int cond) const;
};

struct PolicyModel {
  PolicyConfig cfg;
  nn::ParamStore<float> params;
  FusionNet<float> fusion;
  std::vector<DenoiserNet<float>> denoisers;  // 1 (global) or n_agents (local)
  NoiseSchedule schedule;
  ActionStats action_stats;
  GridStats grid_stats;

  static PolicyModel create(const PolicyConfig& cfg, std::uint64_t seed);
};

// One training example: an observation window, the episode context field,
// and the unstandardized action horizon.
struct TrainSample {
  ObservationBundle bundle;
  const GaussianField* field = nullptr;
  nn::Tensor64 actions;  // [L, joint_dim]
};

// epsilon-prediction loss over a batch, gradients accumulated into
// model.params (which the caller zeroes). Per-sample work is independent and
// reduced in sample order, so results do not depend on thread count.
double policy_train_loss(PolicyModel& model, const std::vector<TrainSample>& batch,
                         std::uint64_t step_seed);

// Denoises unit-normal noise into an unstandardized action horizon.
nn::Tensor64 policy_sample(PolicyModel& model, const ObservationBundle& bundle,
                           const GaussianField* field, nn::Rng& rng,
                           SamplerKind sampler = SamplerKind::Ddpm, int ddim_steps = 0);

// Something that turns an observation window into an action plan.
class ActionPlanner {
 public:
  virtual ~ActionPlanner() = default;
  virtual nn::Tensor64 plan(const ObservationBundle& bundle) = 0;  // [L, joint_dim]
  virtual int horizon() const = 0;
};

class PolicyPlanner : public ActionPlanner {
 public:
  PolicyPlanner(PolicyModel& model, const GaussianField* field, std::uint64_t seed,
                SamplerKind sampler = SamplerKind::Ddpm, int ddim_steps = 0)
      : model_(model), field_(field), rng_(seed), sampler_(sampler), ddim_steps_(ddim_steps) {}
  nn::Tensor64 plan(const ObservationBundle& bundle) override {
    return policy_sample(model_, bundle, field_, rng_, sampler_, ddim_steps_);
  }
  int horizon() const override { return model_.cfg.horizon; }

 private:
  PolicyModel& model_;
  const GaussianField* field_;
  nn::Rng rng_;
  SamplerKind sampler_;
  int ddim_steps_;
};

// Replays recorded actions through the same receding-horizon plumbing.
class ReplayPlanner : public ActionPlanner {
 public:
  ReplayPlanner(const std::vector<std::vector<double>>& actions, int horizon, int exec_steps)
      : actions_(actions), horizon_(horizon), exec_steps_(exec_steps) {}
  nn::Tensor64 plan(const ObservationBundle& bundle) override;
  int horizon() const override { return horizon_; }

 private:
  const std::vector<std::vector<double>>& actions_;
  int horizon_, exec_steps_;
  int cursor_ = 0;
};

// Receding-horizon rollout: buffer obs_steps frames (earliest repeated at
// the start), predict `horizon` actions, execute `exec_steps`, re-observe.
sim::EpisodeRecord act(ActionPlanner& planner, sim::SimEnv& env, int max_steps, int obs_steps,
                       int exec_steps, bool record_depth = false);

// Window assembly shared by act() and the trainer.
ObservationBundle make_bundle(const std::vector<sim::Observation>& history, int obs_steps);

}  // namespace gaudp
