#include "gaudp/sim/dataset.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "gaudp/common.hpp"
#include "gaudp/io/tensor_io.hpp"

namespace gaudp::sim {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

EpisodeRecord run_expert_episode(const TaskSpec& task, std::uint64_t seed, const EnvConfig& cfg,
                                 bool record_depth) {
  SimEnv env(task, seed, cfg);
  EpisodeRecord rec;
  rec.seed = seed;
  rec.task = task.name;
  while (env.status() == EnvStatus::Running) {
    rec.observations.push_back(env.observe(record_depth));
    std::vector<double> action = scripted_expert(env.state());
    rec.actions.push_back(action);
    env.step(action);
  }
  rec.success = env.status() == EnvStatus::Success;
  return rec;
}

namespace {

void write_episode(const fs::path& dir, const EpisodeRecord& rec) {
  fs::create_directories(dir);
  std::size_t steps = rec.observations.size();
  std::size_t agents = rec.observations[0].rgb.size();
  std::size_t h = rec.observations[0].rgb[0].dim(0);
  std::size_t w = rec.observations[0].rgb[0].dim(1);

  nn::Tensor32 rgb({steps, agents, h, w, 3});
  nn::Tensor32 depth({steps, agents, h, w});
  nn::Tensor32 actions({steps, rec.actions[0].size()});
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t a = 0; a < agents; ++a) {
      const auto& img = rec.observations[t].rgb[a];
      std::copy(img.data.begin(), img.data.end(),
                rgb.data.begin() + (((t * agents + a) * h) * w) * 3);
      if (!rec.observations[t].depth.empty()) {
        const auto& d = rec.observations[t].depth[a];
        for (std::size_t i = 0; i < d.numel(); ++i)
          depth.data[((t * agents + a) * h) * w + i] = static_cast<float>(d[i]);
      }
    }
    for (std::size_t k = 0; k < rec.actions[t].size(); ++k)
      actions.data[t * rec.actions[t].size() + k] = static_cast<float>(rec.actions[t][k]);
  }
  io::write_tensor_file(dir / "obs_rgb.gdtn", rgb);
  io::write_tensor_file(dir / "obs_depth.gdtn", depth);
  io::write_tensor_file(dir / "actions.gdtn", actions);

  ordered_json cams = ordered_json::array();
  for (const auto& cam : rec.observations[0].cameras) cams.push_back(camera_to_json(cam));
  std::ofstream os(dir / "cameras.json");
  os << cams.dump(2) << "\n";
}

ordered_json task_to_json(const TaskSpec& t) {
  ordered_json j;
  j["name"] = task_name(t.name);
  j["n_agents"] = t.n_agents;
  j["episode_cap"] = t.episode_cap;
  j["step_cap"] = t.step_cap;
  j["bind_radius"] = t.bind_radius;
  j["bar_span"] = t.bar_span;
  j["target_height"] = t.target_height;
  j["tilt_limit_deg"] = t.tilt_limit_deg;
  j["hold_steps"] = t.hold_steps;
  j["place_radius"] = t.place_radius;
  j["lid_height_thresh"] = t.lid_height_thresh;
  j["place_height"] = t.place_height;
  return j;
}

TaskSpec task_from_json(const nlohmann::json& j) {
  TaskSpec t;
  t.name = task_from_name(j.at("name").get<std::string>());
  t.n_agents = j.at("n_agents").get<int>();
  t.episode_cap = j.at("episode_cap").get<int>();
  t.step_cap = j.at("step_cap").get<double>();
  t.bind_radius = j.at("bind_radius").get<double>();
  t.bar_span = j.at("bar_span").get<double>();
  t.target_height = j.at("target_height").get<double>();
  t.tilt_limit_deg = j.at("tilt_limit_deg").get<double>();
  t.hold_steps = j.at("hold_steps").get<int>();
  t.place_radius = j.at("place_radius").get<double>();
  t.lid_height_thresh = j.at("lid_height_thresh").get<double>();
  t.place_height = j.at("place_height").get<double>();
  t.validate();
  return t;
}

}  // namespace

GenStats gen_dataset(const TaskSpec& task, int episodes, int target_successes,
                     std::uint64_t root_seed, const fs::path& out_dir, const EnvConfig& env_cfg) {
  fs::create_directories(out_dir);
  GenStats stats;
  ordered_json ep_list = ordered_json::array();

  auto want_more = [&]() {
    if (target_successes > 0) return stats.stored < target_successes;
    return stats.attempts < episodes;
  };

  while (want_more()) {
    if (target_successes > 0 && stats.attempts > 8 * target_successes + 64)
      throw NumericalError("gen_dataset: expert success rate too low to reach target");
    std::uint64_t seed = root_seed + static_cast<std::uint64_t>(stats.attempts);
    EpisodeRecord rec = run_expert_episode(task, seed, env_cfg, true);
    ++stats.attempts;
    if (!rec.success) continue;
    std::string name = "ep_" + std::to_string(stats.stored);
    write_episode(out_dir / name, rec);
    ordered_json e;
    e["dir"] = name;
    e["seed"] = seed;
    e["steps"] = rec.actions.size();
    ep_list.push_back(e);
    ++stats.stored;
  }

  ordered_json manifest;
  manifest["format_version"] = 1;
  manifest["task"] = task_to_json(task);
  manifest["image_size"] = env_cfg.image_size;
  manifest["camera_jitter"] = env_cfg.camera_jitter;
  manifest["render_grippers"] = env_cfg.render_grippers;
  manifest["root_seed"] = root_seed;
  manifest["attempts"] = stats.attempts;
  manifest["stored"] = stats.stored;
  manifest["episodes"] = ep_list;
  std::ofstream os(out_dir / "manifest.json");
  os << manifest.dump(2) << "\n";
  if (!os) throw ConfigError("gen_dataset: failed writing manifest");
  return stats;
}

Dataset load_dataset(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw ConfigError("dataset: missing manifest in " + dir.string());
  nlohmann::json manifest = nlohmann::json::parse(is);
  if (manifest.value("format_version", 0) != 1)
    throw ConfigError("dataset: unsupported format version");

  Dataset ds;
  ds.dir = dir;
  ds.task = task_from_json(manifest.at("task"));
  ds.env_cfg.image_size = manifest.at("image_size").get<int>();
  ds.env_cfg.camera_jitter = manifest.at("camera_jitter").get<double>();
  ds.env_cfg.render_grippers = manifest.at("render_grippers").get<bool>();

  for (const auto& e : manifest.at("episodes")) {
    Dataset::Episode ep;
    ep.seed = e.at("seed").get<std::uint64_t>();
    ep.dir_name = e.at("dir").get<std::string>();
    fs::path ep_dir = dir / ep.dir_name;
    ep.rgb = io::read_tensor_file(ep_dir / "obs_rgb.gdtn").as_f32();
    ep.depth = io::read_tensor_file(ep_dir / "obs_depth.gdtn").as_f32();
    ep.actions = io::read_tensor_file(ep_dir / "actions.gdtn").as_f32();
    std::ifstream cs(ep_dir / "cameras.json");
    if (!cs) throw ConfigError("dataset: missing cameras.json in " + ep_dir.string());
    nlohmann::json cams = nlohmann::json::parse(cs);
    for (const auto& c : cams) ep.cameras.push_back(camera_from_json(c));

    // states are not stored; replay the kinematics to recover them
    std::vector<std::vector<double>> actions;
    std::size_t steps = ep.actions.dim(0), d = ep.actions.dim(1);
    for (std::size_t t = 0; t < steps; ++t) {
      std::vector<double> row(d);
      for (std::size_t k = 0; k < d; ++k) row[k] = ep.actions.at2(t, k);
      actions.push_back(std::move(row));
    }
    SimEnv::replay_states(ds.task, ep.seed, ds.env_cfg, actions, &ep.states);
    if (ep.states.size() != steps)
      throw ConfigError("dataset: replayed episode length disagrees with record");
    ds.episodes.push_back(std::move(ep));
  }
  return ds;
}

std::uint64_t dataset_fingerprint(const fs::path& dir) {
  auto fnv = [](std::uint64_t h, const char* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(data[i]);
      h *= 1099511628211ull;
    }
    return h;
  };
  std::uint64_t h = 1469598103934665603ull;
  auto eat_file = [&](const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw ConfigError("fingerprint: cannot open " + p.string());
    std::vector<char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    h = fnv(h, buf.data(), buf.size());
  };
  eat_file(dir / "manifest.json");
  std::ifstream is(dir / "manifest.json");
  nlohmann::json manifest = nlohmann::json::parse(is);
  for (const auto& e : manifest.at("episodes"))
    eat_file(dir / e.at("dir").get<std::string>() / "actions.gdtn");
  return h;
}

}  // namespace gaudp::sim
