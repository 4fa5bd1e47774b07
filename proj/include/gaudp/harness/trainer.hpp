#pragma once

#include <filesystem>
#include <vector>

#include "gaudp/harness/config.hpp"
#include "gaudp/policy.hpp"
#include "gaudp/sim/dataset.hpp"

namespace gaudp {

// Computes any missing per-episode context fields (reconstructed from each
// episode's first observation) and caches them inside the dataset directory,
// keyed by the recon configuration.
void ensure_context_fields(sim::Dataset& dataset, const ReconConfig& recon,
                           bool cache_to_disk = true);

// Builds the context field for one episode from its first observation.
GaussianField build_episode_context(const sim::Dataset& dataset,
                                    const sim::Dataset::Episode& episode,
                                    const ReconConfig& recon);

GridStats compute_grid_stats(const sim::Dataset& dataset, ContextMode mode);
ActionStats compute_action_stats(const sim::Dataset& dataset);

// Observation window + action horizon for episode e starting at step t.
TrainSample make_train_sample(const sim::Dataset& dataset, std::size_t episode, int t,
                              const PolicyConfig& cfg);

struct TrainProgress {
  int step;
  double loss;
  double lr_factor;
};

struct TrainResult {
  std::vector<TrainProgress> curve;
  double initial_loss = 0;
  double final_loss = 0;
};

// Full training run; writes the checkpoint to `ckpt_path`.
TrainResult train_policy(const RunConfig& run, const std::filesystem::path& data_dir,
                         const std::filesystem::path& ckpt_path);

// In-memory variant used by tests and the ablation driver.
TrainResult train_policy_model(PolicyModel& model, sim::Dataset& dataset, const RunConfig& run);

}  // namespace gaudp
