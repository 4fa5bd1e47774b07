#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "gaudp/fusion.hpp"
#include "gaudp/policy.hpp"
#include "gaudp/recon.hpp"
#include "gaudp/sim/env.hpp"

namespace gaudp {

// Every documented flag in one place. Loadable from a JSON file (unknown
// keys rejected) with command-line overrides applied on top.
struct RunConfig {
  // task / environment
  std::string task = "barlift2";
  int image_size = 64;
  double camera_jitter = 0.05;
  bool render_grippers = true;

  // dataset generation
  int episodes = 200;        // expert attempts
  int target_successes = 0;  // stop after this many stored episodes when > 0
  std::uint64_t data_seed = 0;

  // reconstruction (context fields and the recon subcommand)
  double depth_weight = 0.5;
  int recon_iters = 1000;
  double recon_lr = 1e-2;
  double init_depth = 1.0;
  std::string rgb_loss = "l2";  // l2 | l1-dssim
  bool normalized_depth = true;
  double recon_init_jitter = 0.0;
  std::uint64_t recon_seed = 0;

  // policy architecture
  int horizon = 8;
  int obs_steps = 3;
  int exec_steps = 6;
  int feat = 64;
  int blocks = 4;
  int heads = 4;
  int denoise_steps = 100;
  std::string schedule = "linear";  // linear | cosine
  std::string context_mode = "full";
  std::string policy_mode = "global";  // global | local
  bool use_state = true;
  bool finetune_fusion = true;

  // training
  int train_steps = 1500;
  int batch_size = 16;
  double learning_rate = 1e-4;
  int warmup_steps = 100;
  double lr_floor = 0.1;
  std::uint64_t train_seed = 1;

  // evaluation
  int eval_episodes = 100;
  std::uint64_t eval_seed = 5000;
  std::string sampler = "ddpm";  // ddpm | ddim
  int ddim_steps = 0;            // 0 = same as denoise_steps

  int threads = 0;  // 0 = hardware concurrency

  void validate() const;

  sim::TaskSpec task_spec() const;
  sim::EnvConfig env_config() const;
  ReconConfig recon_config() const;
  PolicyConfig policy_config() const;
  SamplerKind sampler_kind() const;

  nlohmann::ordered_json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load_file(const std::filesystem::path& path);
  void apply_overrides(const std::vector<std::string>& key_values);  // "key=value"
};

// Global seed fallback: GAUDP_SEED environment variable.
std::uint64_t env_seed_fallback(std::uint64_t current);

}  // namespace gaudp
