#include "gaudp/harness/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include "gaudp/common.hpp"
#include "gaudp/io/archive.hpp"

namespace gaudp {

void save_checkpoint(const std::filesystem::path& path, const PolicyModel& model,
                     const RunConfig& run) {
  io::Archive archive;
  nlohmann::ordered_json meta;
  meta["kind"] = "gaudp_checkpoint";
  meta["version"] = kCheckpointVersion;
  meta["config"] = run.to_json();
  meta["action_mean"] = model.action_stats.mean;
  meta["action_std"] = model.action_stats.stddev;
  meta["grid_mean"] = model.grid_stats.mean;
  meta["grid_std"] = model.grid_stats.stddev;
  archive.set_metadata(meta);
  for (const auto& e : model.params.entries) archive.add(e.name, e.value);
  archive.save(path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  io::Archive archive = io::Archive::load(path);
  auto meta = archive.metadata();
  if (meta.value("kind", "") != std::string("gaudp_checkpoint"))
    throw ConfigError("checkpoint: wrong file kind in " + path.string());
  if (meta.value("version", -1) != kCheckpointVersion)
    throw ConfigError("checkpoint: unsupported version in " + path.string());

  LoadedCheckpoint out;
  out.run = RunConfig::from_json(meta.at("config"));
  out.model = PolicyModel::create(out.run.policy_config(), /*seed=*/0);

  auto mean = meta.at("action_mean").get<std::vector<double>>();
  auto stddev = meta.at("action_std").get<std::vector<double>>();
  out.model.action_stats.mean = mean;
  out.model.action_stats.stddev = stddev;
  auto gmean = meta.at("grid_mean").get<std::vector<double>>();
  auto gstd = meta.at("grid_std").get<std::vector<double>>();
  if (gmean.size() != kRawChannels || gstd.size() != kRawChannels)
    throw ConfigError("checkpoint: bad grid stats length");
  for (int c = 0; c < kRawChannels; ++c) {
    out.model.grid_stats.mean[c] = gmean[c];
    out.model.grid_stats.stddev[c] = gstd[c];
  }

  if (archive.entries().size() != out.model.params.entries.size())
    throw ConfigError("checkpoint: parameter count mismatch");
  for (std::size_t i = 0; i < archive.entries().size(); ++i) {
    const auto& [name, tensor] = archive.entries()[i];
    auto& entry = out.model.params.entries[i];
    if (entry.name != name)
      throw ConfigError("checkpoint: parameter order mismatch at " + name);
    nn::Tensor32 value = tensor.as_f32();
    if (value.shape != entry.value.shape)
      throw ConfigError("checkpoint: shape mismatch for " + name);
    entry.value = std::move(value);
  }
  return out;
}

}  // namespace gaudp
