#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gaudp/harness/config.hpp"
#include "gaudp/policy.hpp"

namespace gaudp {

struct EvalReport {
  int episodes = 0;
  int successes = 0;
  std::vector<int> outcomes;  // 1 per successful episode
  std::uint64_t eval_seed = 0;
  std::string text;           // deterministic printable report

  double rate() const { return episodes ? static_cast<double>(successes) / episodes : 0.0; }
};

// Rolls `episodes` fixed-seed episodes through act(). Context fields needed
// by the mode are reconstructed from each episode's first observation
// (depths and poses are simulator-side only; the policy sees RGB + field).
// `field_cache` (optional) shares reconstructed fields across runs with the
// same task/seed/recon settings.
EvalReport eval_policy(PolicyModel& model, const RunConfig& run, int episodes,
                       std::uint64_t eval_seed,
                       const std::optional<std::filesystem::path>& field_cache = std::nullopt);

// Baseline planners for the harness checks.
EvalReport eval_scripted_expert(const RunConfig& run, int episodes, std::uint64_t eval_seed);
EvalReport eval_random_policy(const RunConfig& run, int episodes, std::uint64_t eval_seed);

std::string format_report(const std::string& title, const EvalReport& report);

}  // namespace gaudp
