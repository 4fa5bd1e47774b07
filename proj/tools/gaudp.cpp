#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "gaudp/common.hpp"
#include "gaudp/harness/ablate.hpp"
#include "gaudp/harness/checkpoint.hpp"
#include "gaudp/harness/config.hpp"
#include "gaudp/harness/evaluator.hpp"
#include "gaudp/harness/gradcheck_suite.hpp"
#include "gaudp/harness/trainer.hpp"
#include "gaudp/io/archive.hpp"
#include "gaudp/io/image_io.hpp"
#include "gaudp/metrics.hpp"
#include "gaudp/recon.hpp"
#include "gaudp/sim/dataset.hpp"

namespace fs = std::filesystem;
using namespace gaudp;

namespace {

struct CommonOpts {
  std::string config_file;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_file, "JSON config file");
  cmd->add_option("--set", opts.overrides, "config overrides, key=value");
}

RunConfig resolve_config(const CommonOpts& opts) {
  RunConfig run =
      opts.config_file.empty() ? RunConfig{} : RunConfig::load_file(opts.config_file);
  run.apply_overrides(opts.overrides);
  run.data_seed = env_seed_fallback(run.data_seed);
  run.train_seed = env_seed_fallback(run.train_seed);
  run.eval_seed = env_seed_fallback(run.eval_seed);
  set_worker_threads(run.threads);
  return run;
}

void write_effective_config(const RunConfig& run, const fs::path& next_to) {
  fs::path dir = next_to.has_parent_path() ? next_to.parent_path() : fs::path(".");
  fs::create_directories(dir);
  std::ofstream os(dir / (next_to.filename().string() + ".config.json"));
  os << run.to_json().dump(2) << "\n";
}

ReconViews views_from_dataset_episode(const sim::Dataset& ds, std::size_t e) {
  const auto& ep = ds.episodes.at(e);
  ReconViews views;
  std::size_t agents = ep.rgb.dim(1), h = ep.rgb.dim(2), w = ep.rgb.dim(3);
  for (std::size_t a = 0; a < agents; ++a) {
    nn::Tensor64 img({h, w, 3});
    for (std::size_t i = 0; i < h * w * 3; ++i) img[i] = ep.rgb.data[(a * h * w) * 3 + i];
    views.images.push_back(std::move(img));
    nn::Tensor64 depth({h, w});
    for (std::size_t i = 0; i < h * w; ++i) depth[i] = ep.depth.data[a * h * w + i];
    views.depths.push_back(std::move(depth));
    views.cameras.push_back(ep.cameras[a]);
  }
  return views;
}

nn::Tensor64 load_image_any(const fs::path& path) {
  auto t = io::read_tensor_file(path);
  nn::Tensor64 img = t.as_f64();
  if (img.rank() == 2) return img;
  if (img.rank() == 3 && img.dim(2) == 3) return img;
  throw ConfigError("metrics: expected [H,W] or [H,W,3] tensor in " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gaudp: pixel-aligned gaussian context + diffusion policy pipeline"};
  app.require_subcommand(1);

  CommonOpts gen_opts, recon_opts, render_opts, train_opts, eval_opts, ablate_opts;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "collect scripted-expert demonstrations");
  std::string gen_out;
  add_common(gen, gen_opts);
  gen->add_option("--out", gen_out, "output dataset directory")->required();

  // recon
  auto* recon_cmd = app.add_subcommand("recon", "optimize a gaussian field for one episode");
  std::string recon_data, recon_out;
  int recon_episode = 0;
  bool recon_snapshots = false;
  double recon_depth_weight = -1;
  int recon_iters_flag = -1;
  add_common(recon_cmd, recon_opts);
  recon_cmd->add_option("--data", recon_data, "dataset directory")->required();
  recon_cmd->add_option("--episode", recon_episode, "episode index (default 0)");
  recon_cmd->add_option("--out", recon_out, "output field file")->required();
  recon_cmd->add_option("--depth-weight", recon_depth_weight, "depth supervision weight");
  recon_cmd->add_option("--iters", recon_iters_flag, "optimizer iterations");
  recon_cmd->add_flag("--snapshots", recon_snapshots, "dump per-view PPM renders");

  // render
  auto* render_cmd = app.add_subcommand("render", "render a stored gaussian field");
  std::string render_scene, render_camera, render_out;
  add_common(render_cmd, render_opts);
  render_cmd->add_option("--scene", render_scene, "gaussian field archive")->required();
  render_cmd->add_option("--camera", render_camera, "camera JSON file")->required();
  render_cmd->add_option("--out", render_out, "output directory")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "train the diffusion policy");
  std::string train_data, train_out, train_context_mode, train_policy_mode;
  add_common(train_cmd, train_opts);
  train_cmd->add_option("--data", train_data, "dataset directory")->required();
  train_cmd->add_option("--context-mode", train_context_mode,
                        "full|no-gaussian|no-image|coarse|world-frame");
  train_cmd->add_option("--policy-mode", train_policy_mode, "global|local");
  train_cmd->add_option("--out", train_out, "checkpoint path")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint closed-loop");
  std::string eval_ckpt, eval_out, eval_field_cache;
  int eval_episodes_override = -1;
  std::uint64_t eval_seed_override = 0;
  bool eval_seed_set = false;
  add_common(eval_cmd, eval_opts);
  eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--episodes", eval_episodes_override, "episode count override");
  eval_cmd->add_option("--seed", eval_seed_override, "evaluation seed override")
      ->each([&](const std::string&) { eval_seed_set = true; });
  eval_cmd->add_option("--out", eval_out, "report path (default stdout)");
  eval_cmd->add_option("--field-cache", eval_field_cache, "context field cache directory");

  // gradcheck
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference verification");

  // metrics
  auto* metrics_cmd = app.add_subcommand("metrics", "psnr/ssim between two image tensors");
  std::string metrics_a, metrics_b;
  metrics_cmd->add_option("a", metrics_a, "first image (.gdtn)")->required();
  metrics_cmd->add_option("b", metrics_b, "second image (.gdtn)")->required();

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "run the full ablation table");
  std::string ablate_data, ablate_out;
  add_common(ablate_cmd, ablate_opts);
  ablate_cmd->add_option("--data", ablate_data, "dataset directory")->required();
  ablate_cmd->add_option("--out", ablate_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      RunConfig run = resolve_config(gen_opts);
      auto stats = sim::gen_dataset(run.task_spec(), run.episodes, run.target_successes,
                                    run.data_seed, gen_out, run.env_config());
      write_effective_config(run, fs::path(gen_out) / "dataset");
      std::cout << "gen-data: stored " << stats.stored << " of " << stats.attempts
                << " attempts in " << gen_out << "\n";
    } else if (*recon_cmd) {
      if (recon_depth_weight >= 0)
        recon_opts.overrides.push_back("depth_weight=" + std::to_string(recon_depth_weight));
      if (recon_iters_flag > 0)
        recon_opts.overrides.push_back("recon_iters=" + std::to_string(recon_iters_flag));
      RunConfig run = resolve_config(recon_opts);
      sim::Dataset ds = sim::load_dataset(recon_data);
      ReconViews views = views_from_dataset_episode(ds, recon_episode);
      ReconResult result = build_field(views, run.recon_config());
      field_to_archive(result.field).save(recon_out);
      write_effective_config(run, recon_out);
      fs::path report_path = fs::path(recon_out).string() + ".metrics.txt";
      std::ofstream report(report_path);
      report << "# recon metrics (per-" << 100 << "-iteration)\n";
      report << "iteration loss train_psnr train_ssim\n";
      for (const auto& row : result.report) {
        char line[160];
        std::snprintf(line, sizeof(line), "%d %.6e %.4f %.4f\n", row.iteration, row.loss,
                      row.train_psnr, row.train_ssim);
        report << line;
      }
      if (recon_snapshots) {
        for (std::size_t v = 0; v < views.cameras.size(); ++v) {
          RenderOutput out = render_view(result.field, views.cameras, views.cameras[v]);
          io::write_ppm(fs::path(recon_out).string() + ".view" + std::to_string(v) + ".ppm",
                        out.rgb);
        }
      }
      std::cout << "recon: wrote " << recon_out << "\n";
    } else if (*render_cmd) {
      GaussianField field = field_from_archive(io::Archive::load(render_scene));
      std::ifstream cs(render_camera);
      if (!cs) throw ConfigError("render: cannot open camera file " + render_camera);
      nlohmann::json cam_json = nlohmann::json::parse(cs);
      // camera file holds either one camera or a list (origin views first)
      std::vector<CameraModel> cams;
      if (cam_json.is_array())
        for (const auto& c : cam_json) cams.push_back(camera_from_json(c));
      else
        cams.push_back(camera_from_json(cam_json));
      CameraModel target = cams.back();
      std::vector<CameraModel> origins(cams.begin(), cams.end());
      RenderOutput out = render(field, origins, target);
      fs::create_directories(render_out);
      io::write_ppm(fs::path(render_out) / "rgb.ppm", out.rgb);
      io::write_depth_raw(fs::path(render_out) / "depth.f32", out.depth);
      std::cout << "render: wrote rgb.ppm and depth.f32 to " << render_out << "\n";
    } else if (*train_cmd) {
      if (!train_context_mode.empty())
        train_opts.overrides.push_back("context_mode=" + train_context_mode);
      if (!train_policy_mode.empty())
        train_opts.overrides.push_back("policy_mode=" + train_policy_mode);
      RunConfig run = resolve_config(train_opts);
      TrainResult result = train_policy(run, train_data, train_out);
      write_effective_config(run, train_out);
      fs::path curve_path = fs::path(train_out).string() + ".train.txt";
      std::ofstream curve(curve_path);
      for (const auto& p : result.curve) {
        char line[128];
        std::snprintf(line, sizeof(line), "%d %.6e %.4f\n", p.step, p.loss, p.lr_factor);
        curve << line;
      }
      std::cout << "train: initial loss " << result.initial_loss << ", final loss "
                << result.final_loss << ", checkpoint " << train_out << "\n";
    } else if (*eval_cmd) {
      RunConfig cli_run = resolve_config(eval_opts);
      LoadedCheckpoint loaded = load_checkpoint(eval_ckpt);
      RunConfig run = loaded.run;  // checkpoint snapshot governs evaluation
      set_worker_threads(cli_run.threads);
      int episodes = eval_episodes_override > 0 ? eval_episodes_override : run.eval_episodes;
      std::uint64_t seed = eval_seed_set ? eval_seed_override : run.eval_seed;
      std::optional<fs::path> cache;
      if (!eval_field_cache.empty()) cache = fs::path(eval_field_cache);
      EvalReport report = eval_policy(loaded.model, run, episodes, seed, cache);
      if (eval_out.empty()) {
        std::cout << report.text;
      } else {
        std::ofstream os(eval_out);
        os << report.text;
        write_effective_config(run, eval_out);
        std::cout << "eval: " << report.successes << "/" << report.episodes << " -> " << eval_out
                  << "\n";
      }
    } else if (*gradcheck_cmd) {
      auto rows = run_gradcheck_suite();
      std::cout << format_gradcheck(rows);
      for (const auto& row : rows)
        if (!row.pass) return 1;
    } else if (*metrics_cmd) {
      nn::Tensor64 a = load_image_any(metrics_a);
      nn::Tensor64 b = load_image_any(metrics_b);
      char line[128];
      std::snprintf(line, sizeof(line), "psnr: %.4f\nssim: %.4f\n", psnr(a, b), ssim(a, b));
      std::cout << line;
    } else if (*ablate_cmd) {
      RunConfig run = resolve_config(ablate_opts);
      AblationResult result = run_ablation_suite(run, ablate_data, ablate_out);
      std::cout << result.table;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}
