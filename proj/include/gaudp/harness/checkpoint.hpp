#pragma once

#include <filesystem>

#include "gaudp/harness/config.hpp"
#include "gaudp/policy.hpp"

namespace gaudp {

inline constexpr int kCheckpointVersion = 1;

// Weights plus normalization statistics plus the full config snapshot needed
// to re-run evaluation exactly.
void save_checkpoint(const std::filesystem::path& path, const PolicyModel& model,
                     const RunConfig& run);

struct LoadedCheckpoint {
  PolicyModel model;
  RunConfig run;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gaudp
