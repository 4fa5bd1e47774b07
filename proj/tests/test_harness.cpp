#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gaudp/harness/checkpoint.hpp"
#include "gaudp/harness/config.hpp"
#include "gaudp/harness/evaluator.hpp"
#include "gaudp/harness/trainer.hpp"
#include "gaudp/sim/dataset.hpp"

using namespace gaudp;
namespace fs = std::filesystem;

namespace {

std::vector<char> slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::vector<char>((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

// pocket-sized run budget shared by the pipeline tests
RunConfig micro_config() {
  RunConfig run;
  run.image_size = 16;
  run.feat = 8;
  run.blocks = 1;
  run.heads = 2;
  run.denoise_steps = 8;
  run.recon_iters = 10;
  run.train_steps = 4;
  run.batch_size = 2;
  run.warmup_steps = 1;
  run.eval_episodes = 2;
  run.episodes = 4;
  return run;
}

fs::path micro_dataset(const RunConfig& run) {
  static fs::path dir;
  if (dir.empty()) {
    dir = fs::temp_directory_path() / "gaudp_harness_ds";
    fs::remove_all(dir);
    sim::gen_dataset(run.task_spec(), run.episodes, 0, run.data_seed, dir, run.env_config());
  }
  return dir;
}

}  // namespace

TEST_CASE("config defaults, file parsing and override handling") {
  RunConfig run;
  run.validate();
  CHECK(run.horizon == 8);
  CHECK(run.obs_steps == 3);
  CHECK(run.exec_steps == 6);
  CHECK(run.denoise_steps == 100);
  CHECK(run.image_size == 64);
  CHECK(run.feat == 64);
  CHECK(run.learning_rate == 1e-4);
  CHECK(run.depth_weight == 0.5);

  nlohmann::json j = {{"task", "lidplace2"}, {"feat", 32}};
  RunConfig parsed = RunConfig::from_json(j);
  CHECK(parsed.task == "lidplace2");
  CHECK(parsed.feat == 32);

  nlohmann::json bad = {{"unknown_flag", 1}};
  CHECK_THROWS_AS(RunConfig::from_json(bad), ConfigError);

  RunConfig o;
  o.apply_overrides({"context_mode=no-gaussian", "train_steps=7"});
  CHECK(o.context_mode == "no-gaussian");
  CHECK(o.train_steps == 7);
  CHECK_THROWS_AS(o.apply_overrides({"nope=1"}), ConfigError);
  CHECK_THROWS_AS(o.apply_overrides({"context_mode=bogus"}), ConfigError);

  // json round trip preserves every field
  RunConfig round = RunConfig::from_json(o.to_json());
  CHECK(round.to_json() == o.to_json());
}

TEST_CASE("checkpoint round trip is byte-identical and preserves weights") {
  RunConfig run = micro_config();
  PolicyModel model = PolicyModel::create(run.policy_config(), 3);
  model.action_stats.mean.assign(8, 0.125);
  model.action_stats.stddev.assign(8, 0.5);

  fs::path dir = fs::temp_directory_path() / "gaudp_ckpt_test";
  fs::create_directories(dir);
  fs::path p1 = dir / "a.ckpt", p2 = dir / "b.ckpt";
  save_checkpoint(p1, model, run);
  LoadedCheckpoint loaded = load_checkpoint(p1);
  save_checkpoint(p2, loaded.model, loaded.run);
  CHECK(slurp(p1) == slurp(p2));

  REQUIRE(loaded.model.params.entries.size() == model.params.entries.size());
  for (std::size_t i = 0; i < model.params.entries.size(); ++i)
    CHECK(loaded.model.params.entries[i].value.data == model.params.entries[i].value.data);
  CHECK(loaded.model.action_stats.mean == model.action_stats.mean);

  // corrupted magic is rejected
  {
    std::fstream f(p1, std::ios::in | std::ios::out | std::ios::binary);
    f.write("ZZZZ", 4);
  }
  CHECK_THROWS_AS(load_checkpoint(p1), ConfigError);
}

TEST_CASE("context fields are built once and cached") {
  RunConfig run = micro_config();
  fs::path dir = micro_dataset(run);
  sim::Dataset ds = sim::load_dataset(dir);
  ensure_context_fields(ds, run.recon_config());
  for (const auto& ep : ds.episodes) {
    CHECK(ep.has_context);
    CHECK(ep.context.maps.size() == 2);
    CHECK(fs::exists(dir / ep.dir_name / "context.gdar"));
  }
  // second load hits the cache and agrees bitwise
  sim::Dataset ds2 = sim::load_dataset(dir);
  ensure_context_fields(ds2, run.recon_config());
  for (std::size_t e = 0; e < ds.episodes.size(); ++e)
    for (std::size_t v = 0; v < 2; ++v)
      for (std::size_t i = 0; i < ds.episodes[e].context.maps[v].grid.size(); ++i)
        CHECK(ds.episodes[e].context.maps[v].grid[i].mu ==
              ds2.episodes[e].context.maps[v].grid[i].mu);
}

TEST_CASE("grid and action statistics") {
  RunConfig run = micro_config();
  fs::path dir = micro_dataset(run);
  sim::Dataset ds = sim::load_dataset(dir);
  ensure_context_fields(ds, run.recon_config());
  GridStats gs = compute_grid_stats(ds, ContextMode::Full);
  for (int c = 0; c < kRawChannels; ++c) CHECK(gs.stddev[c] > 0);
  // mu-z channel mean should be positive (depth in front of the camera)
  CHECK(gs.mean[2] > 0);
  ActionStats as = compute_action_stats(ds);
  CHECK(as.mean.size() == 8);
  for (double s : as.stddev) CHECK(s > 0);
}

TEST_CASE("micro train/eval pipeline is deterministic end to end") {
  RunConfig run = micro_config();
  fs::path dir = micro_dataset(run);
  fs::path out = fs::temp_directory_path() / "gaudp_harness_out";
  fs::create_directories(out);

  TrainResult r1 = train_policy(run, dir, out / "m1.ckpt");
  TrainResult r2 = train_policy(run, dir, out / "m2.ckpt");
  CHECK(r1.final_loss == r2.final_loss);
  CHECK(slurp(out / "m1.ckpt") == slurp(out / "m2.ckpt"));

  LoadedCheckpoint loaded = load_checkpoint(out / "m1.ckpt");
  EvalReport e1 = eval_policy(loaded.model, loaded.run, 2, 99);
  EvalReport e2 = eval_policy(loaded.model, loaded.run, 2, 99);
  CHECK(e1.text == e2.text);

  // checkpoint reload preserves evaluation exactly
  LoadedCheckpoint again = load_checkpoint(out / "m1.ckpt");
  EvalReport e3 = eval_policy(again.model, again.run, 2, 99);
  CHECK(e1.text == e3.text);
}

TEST_CASE("expert and random baselines through the evaluator") {
  RunConfig run = micro_config();
  EvalReport expert = eval_scripted_expert(run, 10, 0);
  CHECK(expert.successes >= 9);
  EvalReport random = eval_random_policy(run, 10, 0);
  CHECK(random.successes <= 1);
}
