#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gaudp/gaussian.hpp"
#include "gaudp/sim/env.hpp"
#include "gaudp/sim/expert.hpp"

namespace gaudp::sim {

struct EpisodeRecord {
  std::uint64_t seed = 0;
  TaskName task = TaskName::BarLift2;
  bool success = false;
  std::vector<Observation> observations;      // pre-action observation per step
  std::vector<std::vector<double>> actions;   // joint action per step
};

// Runs one scripted-expert episode.
EpisodeRecord run_expert_episode(const TaskSpec& task, std::uint64_t seed, const EnvConfig& cfg,
                                 bool record_depth);

struct GenStats {
  int attempts = 0;
  int stored = 0;
};

// Expert dataset on disk: manifest.json plus ep_<k>/{obs_rgb.gdtn,
// obs_depth.gdtn, actions.gdtn, cameras.json}. Only successful episodes are
// stored. Seeds are consumed sequentially from `root_seed`; generation stops
// after `episodes` attempts, or once `target_successes` episodes are stored
// when that is positive.
GenStats gen_dataset(const TaskSpec& task, int episodes, int target_successes,
                     std::uint64_t root_seed, const std::filesystem::path& out_dir,
                     const EnvConfig& env_cfg);

struct Dataset {
  TaskSpec task;
  EnvConfig env_cfg;
  std::filesystem::path dir;

  struct Episode {
    std::uint64_t seed = 0;
    std::string dir_name;
    nn::Tensor32 rgb;      // [T,N,H,W,3]
    nn::Tensor32 depth;    // [T,N,H,W]
    nn::Tensor32 actions;  // [T,4N]
    std::vector<CameraModel> cameras;
    // re-derived by replaying actions through the kinematics
    std::vector<std::vector<std::array<double, 4>>> states;
    GaussianField context;  // per-episode reconstructed field (may be empty)
    bool has_context = false;
  };
  std::vector<Episode> episodes;

  int n_agents() const { return task.n_agents; }
  int steps(std::size_t e) const { return static_cast<int>(episodes[e].rgb.dim(0)); }
};

Dataset load_dataset(const std::filesystem::path& dir);

// FNV-1a over the manifest and per-episode action payloads; identifies the
// dataset in reports.
std::uint64_t dataset_fingerprint(const std::filesystem::path& dir);

}  // namespace gaudp::sim
