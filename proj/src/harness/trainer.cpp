#include "gaudp/harness/trainer.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gaudp/common.hpp"
#include "gaudp/harness/checkpoint.hpp"
#include "gaudp/io/archive.hpp"
#include "gaudp/nn/adam.hpp"

namespace gaudp {

namespace fs = std::filesystem;

namespace {

nlohmann::ordered_json recon_cfg_json(const ReconConfig& r) {
  nlohmann::ordered_json j;
  j["depth_weight"] = r.depth_weight;
  j["iterations"] = r.iterations;
  j["learning_rate"] = r.learning_rate;
  j["init_depth"] = r.init_depth;
  j["rgb_loss"] = r.rgb_loss == RgbLoss::L2 ? "l2" : "l1-dssim";
  j["normalized_depth"] = r.normalized_depth;
  j["init_jitter"] = r.init_jitter;
  j["seed"] = r.seed;
  return j;
}

std::string recon_cfg_key(const ReconConfig& r) { return recon_cfg_json(r).dump(); }

ReconViews episode_first_views(const sim::Dataset& dataset,
                               const sim::Dataset::Episode& episode) {
  ReconViews views;
  std::size_t agents = episode.rgb.dim(1);
  std::size_t h = episode.rgb.dim(2), w = episode.rgb.dim(3);
  for (std::size_t a = 0; a < agents; ++a) {
    nn::Tensor64 img({h, w, 3});
    for (std::size_t i = 0; i < h * w * 3; ++i)
      img[i] = episode.rgb.data[(a * h * w) * 3 + i];
    views.images.push_back(std::move(img));
    nn::Tensor64 depth({h, w});
    for (std::size_t i = 0; i < h * w; ++i) depth[i] = episode.depth.data[a * h * w + i];
    views.depths.push_back(std::move(depth));
    views.cameras.push_back(episode.cameras[a]);
  }
  (void)dataset;
  return views;
}

}  // namespace

GaussianField build_episode_context(const sim::Dataset& dataset,
                                    const sim::Dataset::Episode& episode,
                                    const ReconConfig& recon) {
  ReconViews views = episode_first_views(dataset, episode);
  return build_field(views, recon).field;
}

void ensure_context_fields(sim::Dataset& dataset, const ReconConfig& recon, bool cache_to_disk) {
  std::string key = recon_cfg_key(recon);
  fs::path meta_path = dataset.dir / "context_meta.json";
  bool cache_valid = false;
  if (cache_to_disk && fs::exists(meta_path)) {
    std::ifstream is(meta_path);
    nlohmann::json meta = nlohmann::json::parse(is);
    cache_valid = meta.value("recon_key", "") == key;
  }

  parallel_for(dataset.episodes.size(), [&](std::size_t e) {
    auto& ep = dataset.episodes[e];
    if (ep.has_context) return;
    fs::path ctx_path = dataset.dir / ep.dir_name / "context.gdar";
    if (cache_valid && fs::exists(ctx_path)) {
      ep.context = field_from_archive(io::Archive::load(ctx_path));
      ep.has_context = true;
      return;
    }
    ep.context = build_episode_context(dataset, ep, recon);
    ep.has_context = true;
  });

  if (cache_to_disk) {
    for (auto& ep : dataset.episodes) {
      fs::path ctx_path = dataset.dir / ep.dir_name / "context.gdar";
      if (!cache_valid || !fs::exists(ctx_path)) field_to_archive(ep.context).save(ctx_path);
    }
    nlohmann::ordered_json meta;
    meta["recon_key"] = key;
    meta["recon"] = recon_cfg_json(recon);
    std::ofstream os(meta_path);
    os << meta.dump(2) << "\n";
  }
}

GridStats compute_grid_stats(const sim::Dataset& dataset, ContextMode mode) {
  GridStats stats;
  std::vector<double> sum(kRawChannels, 0.0), sum_sq(kRawChannels, 0.0);
  std::size_t count = 0;
  for (const auto& ep : dataset.episodes) {
    if (!ep.has_context) throw ConfigError("grid stats: context fields not built");
    const GaussianField* field = &ep.context;
    GaussianField world;
    if (mode == ContextMode::WorldFrame && field->frame == Frame::CameraLocal) {
      world = ep.context;
      std::vector<RigidTransform> to_world;
      for (const auto& map : world.maps)
        to_world.push_back(ep.cameras.at(map.view_id).pose_world_to_cam.inverse());
      transform_field(world, to_world, Frame::World);
      field = &world;
    }
    for (const auto& map : field->maps) {
      nn::Tensor64 grid = grid_features(map);
      std::size_t plane = grid.dim(1) * grid.dim(2);
      for (int c = 0; c < kRawChannels; ++c)
        for (std::size_t p = 0; p < plane; ++p) {
          double v = grid.data[c * plane + p];
          sum[c] += v;
          sum_sq[c] += v * v;
        }
      count += plane;
    }
  }
  if (count == 0) return stats;
  for (int c = 0; c < kRawChannels; ++c) {
    stats.mean[c] = sum[c] / static_cast<double>(count);
    double var = sum_sq[c] / static_cast<double>(count) - stats.mean[c] * stats.mean[c];
    stats.stddev[c] = std::sqrt(std::max(var, 1e-12));
  }
  return stats;
}

ActionStats compute_action_stats(const sim::Dataset& dataset) {
  ActionStats stats;
  if (dataset.episodes.empty()) throw ConfigError("action stats: empty dataset");
  std::size_t d = dataset.episodes[0].actions.dim(1);
  stats.mean.assign(d, 0.0);
  stats.stddev.assign(d, 1.0);
  std::vector<double> sum(d, 0.0), sum_sq(d, 0.0);
  std::size_t count = 0;
  for (const auto& ep : dataset.episodes) {
    std::size_t steps = ep.actions.dim(0);
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t k = 0; k < d; ++k) {
        double v = ep.actions.at2(t, k);
        sum[k] += v;
        sum_sq[k] += v * v;
      }
    count += steps;
  }
  for (std::size_t k = 0; k < d; ++k) {
    stats.mean[k] = sum[k] / static_cast<double>(count);
    double var = sum_sq[k] / static_cast<double>(count) - stats.mean[k] * stats.mean[k];
    stats.stddev[k] = std::sqrt(std::max(var, 1e-6));
  }
  return stats;
}

TrainSample make_train_sample(const sim::Dataset& dataset, std::size_t episode, int t,
                              const PolicyConfig& cfg) {
  const auto& ep = dataset.episodes.at(episode);
  int steps = static_cast<int>(ep.rgb.dim(0));
  std::size_t agents = ep.rgb.dim(1), h = ep.rgb.dim(2), w = ep.rgb.dim(3);
  if (t < 0 || t >= steps) throw ConfigError("train sample: step out of range");

  TrainSample sample;
  for (int s = 0; s < cfg.obs_steps; ++s) {
    int idx = std::max(0, t - cfg.obs_steps + 1 + s);
    std::vector<nn::Tensor32> frame;
    for (std::size_t a = 0; a < agents; ++a) {
      nn::Tensor32 img({h, w, 3});
      const float* src = &ep.rgb.data[((static_cast<std::size_t>(idx) * agents + a) * h * w) * 3];
      std::copy(src, src + h * w * 3, img.data.begin());
      frame.push_back(std::move(img));
    }
    sample.bundle.frames.push_back(std::move(frame));
  }
  sample.bundle.states = ep.states.at(t);
  sample.bundle.cameras = ep.cameras;
  sample.field = ep.has_context ? &ep.context : nullptr;

  std::size_t d = ep.actions.dim(1);
  sample.actions = nn::Tensor64({static_cast<std::size_t>(cfg.horizon), d});
  for (int l = 0; l < cfg.horizon; ++l) {
    int idx = std::min(t + l, steps - 1);  // pad by repeating the final action
    for (std::size_t k = 0; k < d; ++k)
      sample.actions.at2(l, k) = ep.actions.at2(idx, k);
  }
  return sample;
}

TrainResult train_policy_model(PolicyModel& model, sim::Dataset& dataset, const RunConfig& run) {
  const PolicyConfig& cfg = model.cfg;
  bool needs_field = cfg.context_mode != ContextMode::NoGaussian;
  if (needs_field) {
    ensure_context_fields(dataset, run.recon_config());
    model.grid_stats = compute_grid_stats(dataset, cfg.context_mode);
  }
  model.action_stats = compute_action_stats(dataset);

  nn::LrSchedule schedule;
  schedule.warmup_steps = static_cast<std::size_t>(run.warmup_steps);
  schedule.total_steps = static_cast<std::size_t>(run.train_steps);
  schedule.floor_frac = run.lr_floor;
  nn::Adam<float> opt(run.learning_rate, schedule);

  TrainResult result;
  nn::Rng draw(nn::Rng::derive(run.train_seed, 0xBA7C4));
  for (int step = 0; step < run.train_steps; ++step) {
    std::vector<TrainSample> batch;
    batch.reserve(run.batch_size);
    for (int b = 0; b < run.batch_size; ++b) {
      std::size_t e = draw.below(dataset.episodes.size());
      int t = static_cast<int>(draw.below(static_cast<std::uint64_t>(dataset.steps(e))));
      batch.push_back(make_train_sample(dataset, e, t, cfg));
    }
    model.params.zero_grads();
    double loss =
        policy_train_loss(model, batch, nn::Rng::derive(run.train_seed, 1000 + step));
    opt.step(model.params);

    if (step == 0) result.initial_loss = loss;
    result.final_loss = loss;
    if (step % 50 == 0 || step + 1 == run.train_steps)
      result.curve.push_back(TrainProgress{step, loss, opt.current_factor()});
  }
  return result;
}

TrainResult train_policy(const RunConfig& run, const fs::path& data_dir,
                         const fs::path& ckpt_path) {
  run.validate();
  set_worker_threads(run.threads);
  sim::Dataset dataset = sim::load_dataset(data_dir);
  if (dataset.task.n_agents != run.task_spec().n_agents)
    throw ConfigError("train: dataset agent count disagrees with config");
  PolicyModel model = PolicyModel::create(run.policy_config(), run.train_seed);
  TrainResult result = train_policy_model(model, dataset, run);
  save_checkpoint(ckpt_path, model, run);
  return result;
}

}  // namespace gaudp
