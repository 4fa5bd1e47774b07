#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gaudp/harness/config.hpp"
#include "gaudp/harness/evaluator.hpp"

namespace gaudp {

struct AblationRow {
  std::string label;
  std::string context_mode;
  std::string policy_mode;
  int successes = 0;
  int episodes = 0;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::uint64_t dataset_hash = 0;
  std::uint64_t eval_seed = 0;
  std::string table;  // printable table with the shared-seed footer
};

// Trains and evaluates the four Table-3 style context ablations plus the
// full model plus the local-policy baseline, all on one dataset and one set
// of evaluation seeds.
AblationResult run_ablation_suite(const RunConfig& base, const std::filesystem::path& data_dir,
                                  const std::filesystem::path& out_dir);

// One train+eval leg with a shared field cache; used by run_ablation_suite
// and the acceptance experiments.
AblationRow run_mode(const RunConfig& run, const std::filesystem::path& data_dir,
                     const std::filesystem::path& out_dir, const std::string& label);

std::string format_ablation_table(const AblationResult& result);

}  // namespace gaudp
