#include "gaudp/harness/evaluator.hpp"

#include <cmath>
#include <sstream>

#include "gaudp/common.hpp"
#include "gaudp/io/archive.hpp"
#include "gaudp/metrics.hpp"
#include "gaudp/recon.hpp"
#include "gaudp/sim/expert.hpp"

namespace gaudp {

namespace fs = std::filesystem;

namespace {

// Reconstruct the episode context from the very first (pre-action)
// observation of a freshly reset environment.
GaussianField episode_context_from_env(sim::SimEnv& env, const ReconConfig& recon) {
  sim::Observation obs = env.observe(/*record_depth=*/true);
  ReconViews views;
  for (std::size_t a = 0; a < obs.rgb.size(); ++a) {
    views.images.push_back(obs.rgb[a].cast<double>());
    views.depths.push_back(obs.depth[a]);
    views.cameras.push_back(obs.cameras[a]);
  }
  return build_field(views, recon).field;
}

std::string field_cache_name(const RunConfig& run, std::uint64_t episode_seed) {
  std::ostringstream os;
  os << "ctx_" << run.task << "_" << episode_seed << "_i" << run.recon_iters << "_w"
     << run.depth_weight << "_s" << run.image_size << ".gdar";
  return os.str();
}

}  // namespace

EvalReport eval_policy(PolicyModel& model, const RunConfig& run, int episodes,
                       std::uint64_t eval_seed, const std::optional<fs::path>& field_cache) {
  sim::TaskSpec task = run.task_spec();
  sim::EnvConfig env_cfg = run.env_config();
  if (model.cfg.n_agents != task.n_agents)
    throw ConfigError("eval: policy agent count disagrees with task");
  bool needs_field = model.cfg.context_mode != ContextMode::NoGaussian;
  if (field_cache) fs::create_directories(*field_cache);

  EvalReport report;
  report.episodes = episodes;
  report.eval_seed = eval_seed;
  report.outcomes.assign(episodes, 0);

  parallel_for(static_cast<std::size_t>(episodes), [&](std::size_t i) {
    std::uint64_t episode_seed = nn::Rng::derive(eval_seed, i);
    sim::SimEnv env(task, episode_seed, env_cfg);

    GaussianField field;
    bool have_field = false;
    if (needs_field) {
      if (field_cache) {
        fs::path p = *field_cache / field_cache_name(run, episode_seed);
        if (fs::exists(p)) {
          field = field_from_archive(io::Archive::load(p));
          have_field = true;
        }
      }
      if (!have_field) {
        field = episode_context_from_env(env, run.recon_config());
        have_field = true;
        if (field_cache) {
          fs::path p = *field_cache / field_cache_name(run, episode_seed);
          if (!fs::exists(p)) field_to_archive(field).save(p);
        }
      }
    }

    PolicyPlanner planner(model, have_field ? &field : nullptr,
                          nn::Rng::derive(eval_seed ^ 0x5EED5EEDull, i), run.sampler_kind(),
                          run.ddim_steps);
    sim::EpisodeRecord rec =
        act(planner, env, task.episode_cap, model.cfg.obs_steps, model.cfg.exec_steps);
    report.outcomes[i] = rec.success ? 1 : 0;
  });

  for (int o : report.outcomes) report.successes += o;
  report.text = format_report("policy", report);
  return report;
}

namespace {

class ExpertPlanner : public ActionPlanner {
 public:
  explicit ExpertPlanner(sim::SimEnv& env, int horizon) : env_(env), horizon_(horizon) {}
  nn::Tensor64 plan(const ObservationBundle&) override {
    // privileged: expert replans from the live state each step, so emit the
    // current action repeated (act() re-invokes after exec_steps anyway)
    std::vector<double> a = sim::scripted_expert(env_.state());
    nn::Tensor64 out({static_cast<std::size_t>(horizon_), a.size()});
    for (int t = 0; t < horizon_; ++t)
      for (std::size_t k = 0; k < a.size(); ++k) out.at2(t, k) = a[k];
    return out;
  }
  int horizon() const override { return horizon_; }

 private:
  sim::SimEnv& env_;
  int horizon_;
};

class RandomPlanner : public ActionPlanner {
 public:
  RandomPlanner(std::uint64_t seed, int horizon, int dim)
      : rng_(seed), horizon_(horizon), dim_(dim) {}
  nn::Tensor64 plan(const ObservationBundle&) override {
    nn::Tensor64 out({static_cast<std::size_t>(horizon_), static_cast<std::size_t>(dim_)});
    for (auto& v : out.data) v = rng_.uniform(-0.05, 0.05);
    for (int t = 0; t < horizon_; ++t)
      for (int a = 0; a + 4 <= dim_; a += 4) out.at2(t, a + 3) = rng_.uniform() > 0.5 ? 1.0 : 0.0;
    return out;
  }
  int horizon() const override { return horizon_; }

 private:
  nn::Rng rng_;
  int horizon_;
  int dim_;
};

}  // namespace

EvalReport eval_scripted_expert(const RunConfig& run, int episodes, std::uint64_t eval_seed) {
  sim::TaskSpec task = run.task_spec();
  sim::EnvConfig env_cfg = run.env_config();
  EvalReport report;
  report.episodes = episodes;
  report.eval_seed = eval_seed;
  report.outcomes.assign(episodes, 0);
  parallel_for(static_cast<std::size_t>(episodes), [&](std::size_t i) {
    // expert gate runs on sequential seeds
    sim::SimEnv env(task, eval_seed + i, env_cfg);
    ExpertPlanner planner(env, run.horizon);
    sim::EpisodeRecord rec = act(planner, env, task.episode_cap, run.obs_steps,
                                 /*exec_steps=*/1);
    report.outcomes[i] = rec.success ? 1 : 0;
  });
  for (int o : report.outcomes) report.successes += o;
  report.text = format_report("scripted-expert", report);
  return report;
}

EvalReport eval_random_policy(const RunConfig& run, int episodes, std::uint64_t eval_seed) {
  sim::TaskSpec task = run.task_spec();
  sim::EnvConfig env_cfg = run.env_config();
  EvalReport report;
  report.episodes = episodes;
  report.eval_seed = eval_seed;
  report.outcomes.assign(episodes, 0);
  parallel_for(static_cast<std::size_t>(episodes), [&](std::size_t i) {
    sim::SimEnv env(task, nn::Rng::derive(eval_seed, i), env_cfg);
    RandomPlanner planner(nn::Rng::derive(eval_seed ^ 0xABCD, i), run.horizon,
                          4 * task.n_agents);
    sim::EpisodeRecord rec =
        act(planner, env, task.episode_cap, run.obs_steps, run.exec_steps);
    report.outcomes[i] = rec.success ? 1 : 0;
  });
  for (int o : report.outcomes) report.successes += o;
  report.text = format_report("random-policy", report);
  return report;
}

std::string format_report(const std::string& title, const EvalReport& report) {
  std::ostringstream os;
  os << "# " << title << " evaluation\n";
  os << "episodes: " << report.episodes << "\n";
  os << "successes: " << report.successes << "\n";
  char rate[64];
  std::snprintf(rate, sizeof(rate), "%.4f", report.rate());
  os << "success_rate: " << rate << "\n";
  WilsonInterval ci = wilson95(report.successes, report.episodes);
  char lo[64], hi[64];
  std::snprintf(lo, sizeof(lo), "%.4f", ci.lo);
  std::snprintf(hi, sizeof(hi), "%.4f", ci.hi);
  os << "wilson95: [" << lo << ", " << hi << "]\n";
  os << "eval_seed: " << report.eval_seed << "\n";
  os << "outcomes:";
  for (int o : report.outcomes) os << " " << o;
  os << "\n";
  return os.str();
}

}  // namespace gaudp
