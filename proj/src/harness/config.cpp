#include "gaudp/harness/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>

#include <nlohmann/json.hpp>

#include "gaudp/common.hpp"

namespace gaudp {

namespace {

// Field registry: one row per flag keeps file parsing, dumping and
// key=value overrides in sync.
struct FieldBinder {
  using Getter = std::function<nlohmann::ordered_json(const RunConfig&)>;
  using Setter = std::function<void(RunConfig&, const nlohmann::json&)>;
  std::string key;
  Getter get;
  Setter set;
};

template <typename T>
FieldBinder bind_field(const std::string& key, T RunConfig::* member) {
  return FieldBinder{
      key,
      [member](const RunConfig& c) { return nlohmann::ordered_json(c.*member); },
      [member, key](RunConfig& c, const nlohmann::json& v) {
        try {
          c.*member = v.get<T>();
        } catch (const nlohmann::json::exception&) {
          throw ConfigError("config: bad value for " + key);
        }
      }};
}

const std::vector<FieldBinder>& fields() {
  static const std::vector<FieldBinder> f = {
      bind_field("task", &RunConfig::task),
      bind_field("image_size", &RunConfig::image_size),
      bind_field("camera_jitter", &RunConfig::camera_jitter),
      bind_field("render_grippers", &RunConfig::render_grippers),
      bind_field("episodes", &RunConfig::episodes),
      bind_field("target_successes", &RunConfig::target_successes),
      bind_field("data_seed", &RunConfig::data_seed),
      bind_field("depth_weight", &RunConfig::depth_weight),
      bind_field("recon_iters", &RunConfig::recon_iters),
      bind_field("recon_lr", &RunConfig::recon_lr),
      bind_field("init_depth", &RunConfig::init_depth),
      bind_field("rgb_loss", &RunConfig::rgb_loss),
      bind_field("normalized_depth", &RunConfig::normalized_depth),
      bind_field("recon_init_jitter", &RunConfig::recon_init_jitter),
      bind_field("recon_seed", &RunConfig::recon_seed),
      bind_field("horizon", &RunConfig::horizon),
      bind_field("obs_steps", &RunConfig::obs_steps),
      bind_field("exec_steps", &RunConfig::exec_steps),
      bind_field("feat", &RunConfig::feat),
      bind_field("blocks", &RunConfig::blocks),
      bind_field("heads", &RunConfig::heads),
      bind_field("denoise_steps", &RunConfig::denoise_steps),
      bind_field("schedule", &RunConfig::schedule),
      bind_field("context_mode", &RunConfig::context_mode),
      bind_field("policy_mode", &RunConfig::policy_mode),
      bind_field("use_state", &RunConfig::use_state),
      bind_field("finetune_fusion", &RunConfig::finetune_fusion),
      bind_field("train_steps", &RunConfig::train_steps),
      bind_field("batch_size", &RunConfig::batch_size),
      bind_field("learning_rate", &RunConfig::learning_rate),
      bind_field("warmup_steps", &RunConfig::warmup_steps),
      bind_field("lr_floor", &RunConfig::lr_floor),
      bind_field("train_seed", &RunConfig::train_seed),
      bind_field("eval_episodes", &RunConfig::eval_episodes),
      bind_field("eval_seed", &RunConfig::eval_seed),
      bind_field("sampler", &RunConfig::sampler),
      bind_field("ddim_steps", &RunConfig::ddim_steps),
      bind_field("threads", &RunConfig::threads),
  };
  return f;
}

}  // namespace

void RunConfig::validate() const {
  task_spec();
  policy_config().validate();
  recon_config().validate();
  if (rgb_loss != "l2" && rgb_loss != "l1-dssim")
    throw ConfigError("config: rgb_loss must be l2 or l1-dssim");
  if (sampler != "ddpm" && sampler != "ddim")
    throw ConfigError("config: sampler must be ddpm or ddim");
  if (policy_mode != "global" && policy_mode != "local")
    throw ConfigError("config: policy_mode must be global or local");
  if (schedule != "linear" && schedule != "cosine")
    throw ConfigError("config: schedule must be linear or cosine");
  if (batch_size < 1 || train_steps < 0 || eval_episodes < 1)
    throw ConfigError("config: non-positive budget values");
  context_mode_from_name(context_mode);
}

sim::TaskSpec RunConfig::task_spec() const {
  return sim::TaskSpec::get(sim::task_from_name(task));
}

sim::EnvConfig RunConfig::env_config() const {
  sim::EnvConfig cfg;
  cfg.image_size = image_size;
  cfg.camera_jitter = camera_jitter;
  cfg.render_grippers = render_grippers;
  return cfg;
}

ReconConfig RunConfig::recon_config() const {
  ReconConfig cfg;
  cfg.depth_weight = depth_weight;
  cfg.iterations = recon_iters;
  cfg.learning_rate = recon_lr;
  cfg.init_depth = init_depth;
  cfg.rgb_loss = rgb_loss == "l2" ? RgbLoss::L2 : RgbLoss::L1Dssim;
  cfg.normalized_depth = normalized_depth;
  cfg.init_jitter = recon_init_jitter;
  cfg.seed = recon_seed;
  return cfg;
}

PolicyConfig RunConfig::policy_config() const {
  PolicyConfig cfg;
  cfg.horizon = horizon;
  cfg.obs_steps = obs_steps;
  cfg.exec_steps = exec_steps;
  cfg.n_agents = task_spec().n_agents;
  cfg.feat = feat;
  cfg.blocks = blocks;
  cfg.heads = heads;
  cfg.denoise_steps = denoise_steps;
  cfg.schedule_kind = schedule == "linear" ? ScheduleKind::Linear : ScheduleKind::Cosine;
  cfg.context_mode = context_mode_from_name(context_mode);
  cfg.global_policy = policy_mode == "global";
  cfg.use_state = use_state;
  cfg.finetune_fusion = finetune_fusion;
  cfg.image_size = image_size;
  return cfg;
}

SamplerKind RunConfig::sampler_kind() const {
  return sampler == "ddpm" ? SamplerKind::Ddpm : SamplerKind::Ddim;
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  for (const auto& f : fields()) j[f.key] = f.get(*this);
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig cfg;
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const auto& f : fields()) {
      if (f.key == it.key()) {
        f.set(cfg, it.value());
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("config: unknown key '" + it.key() + "'");
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: parse error in " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

void RunConfig::apply_overrides(const std::vector<std::string>& key_values) {
  RunConfig staged = *this;  // committed only when everything validates
  for (const std::string& kv : key_values) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("config: override must be key=value: " + kv);
    std::string key = kv.substr(0, eq);
    std::string value = kv.substr(eq + 1);
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::exception&) {
      parsed = value;  // bare strings allowed
    }
    bool known = false;
    for (const auto& f : fields()) {
      if (f.key == key) {
        f.set(staged, parsed);
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("config: unknown key '" + key + "'");
  }
  staged.validate();
  *this = staged;
}

std::uint64_t env_seed_fallback(std::uint64_t current) {
  if (current != 0) return current;
  if (const char* env = std::getenv("GAUDP_SEED")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0') return static_cast<std::uint64_t>(v);
  }
  return current;
}

}  // namespace gaudp
