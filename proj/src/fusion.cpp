#include "gaudp/fusion.hpp"

#include <cmath>

#include "gaudp/common.hpp"

namespace gaudp {

std::string context_mode_name(ContextMode mode) {
  switch (mode) {
    case ContextMode::Full: return "full";
    case ContextMode::NoGaussian: return "no-gaussian";
    case ContextMode::NoImage: return "no-image";
    case ContextMode::CoarseConcat: return "coarse";
    case ContextMode::WorldFrame: return "world-frame";
  }
  return "full";
}

ContextMode context_mode_from_name(const std::string& name) {
  if (name == "full") return ContextMode::Full;
  if (name == "no-gaussian") return ContextMode::NoGaussian;
  if (name == "no-image") return ContextMode::NoImage;
  if (name == "coarse") return ContextMode::CoarseConcat;
  if (name == "world-frame") return ContextMode::WorldFrame;
  throw ConfigError("unknown context mode: " + name);
}

const GaussianMap& dispatch(const GaussianField& field, int agent_id) {
  for (const auto& map : field.maps)
    if (map.view_id == agent_id) return map;
  throw ConfigError("dispatch: no view for agent " + std::to_string(agent_id));
}

nn::Tensor64 grid_features(const GaussianMap& map) {
  std::size_t h = map.height, w = map.width;
  nn::Tensor64 grid({kRawChannels, h, w});
  std::size_t plane = h * w;
  for (std::size_t p = 0; p < plane; ++p) {
    const RawGaussian& raw = map.grid[p];
    grid.data[0 * plane + p] = raw.mu[0];
    grid.data[1 * plane + p] = raw.mu[1];
    grid.data[2 * plane + p] = raw.mu[2];
    grid.data[3 * plane + p] = raw.log_scale[0];
    grid.data[4 * plane + p] = raw.log_scale[1];
    grid.data[5 * plane + p] = raw.log_scale[2];
    grid.data[6 * plane + p] = raw.rot_raw[0];
    grid.data[7 * plane + p] = raw.rot_raw[1];
    grid.data[8 * plane + p] = raw.rot_raw[2];
    grid.data[9 * plane + p] = raw.rot_raw[3];
    grid.data[10 * plane + p] = raw.opacity_logit;
    grid.data[11 * plane + p] = raw.color_raw[0];
    grid.data[12 * plane + p] = raw.color_raw[1];
    grid.data[13 * plane + p] = raw.color_raw[2];
  }
  return grid;
}

GaussianMap map_from_grid(const nn::Tensor64& grid, int view_id, Frame frame) {
  if (grid.rank() != 3 || grid.dim(0) != kRawChannels)
    throw ConfigError("map_from_grid: expected [14,H,W]");
  GaussianMap map;
  map.view_id = view_id;
  map.frame = frame;
  map.height = static_cast<int>(grid.dim(1));
  map.width = static_cast<int>(grid.dim(2));
  std::size_t plane = grid.dim(1) * grid.dim(2);
  map.grid.resize(plane);
  for (std::size_t p = 0; p < plane; ++p) {
    RawGaussian& raw = map.grid[p];
    raw.mu = Vec3(grid.data[0 * plane + p], grid.data[1 * plane + p], grid.data[2 * plane + p]);
    raw.log_scale =
        Vec3(grid.data[3 * plane + p], grid.data[4 * plane + p], grid.data[5 * plane + p]);
    raw.rot_raw = Vec4(grid.data[6 * plane + p], grid.data[7 * plane + p],
                       grid.data[8 * plane + p], grid.data[9 * plane + p]);
    raw.opacity_logit = grid.data[10 * plane + p];
    raw.color_raw =
        Vec3(grid.data[11 * plane + p], grid.data[12 * plane + p], grid.data[13 * plane + p]);
  }
  return map;
}

nn::Tensor32 standardize_grid(const nn::Tensor64& grid, const GridStats& stats) {
  nn::Tensor32 out({grid.dim(0), grid.dim(1), grid.dim(2)});
  std::size_t plane = grid.dim(1) * grid.dim(2);
  for (int c = 0; c < kRawChannels; ++c) {
    double inv = 1.0 / std::max(stats.stddev[c], 1e-8);
    for (std::size_t p = 0; p < plane; ++p)
      out.data[c * plane + p] =
          static_cast<float>((grid.data[c * plane + p] - stats.mean[c]) * inv);
  }
  return out;
}

nn::Tensor32 image_chw(const nn::Tensor32& hwc) {
  if (hwc.rank() != 3 || hwc.dim(2) != 3) throw ConfigError("image_chw: expected [H,W,3]");
  std::size_t h = hwc.dim(0), w = hwc.dim(1);
  nn::Tensor32 out({3, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        out.data[c * h * w + y * w + x] = hwc.data[(y * w + x) * 3 + c];
  return out;
}

nn::Tensor32 image_chw64(const nn::Tensor64& hwc) { return image_chw(hwc.cast<float>()); }

template <typename T>
FusionNet<T> FusionNet<T>::create(nn::ParamStore<T>& params, const FusionConfig& cfg,
                                  nn::Rng& rng) {
  if (cfg.image_size % 8) throw ConfigError("fusion: image size must be divisible by 8");
  FusionNet net;
  net.cfg = cfg;
  std::size_t f = cfg.feat;
  auto conv = [&](const char* name, std::size_t co, std::size_t ci, std::size_t k, int& w_id,
                  int& b_id) {
    double fan_in = static_cast<double>(ci * k * k);
    w_id = params.add_xavier(std::string("fusion.") + name + ".w", {co, ci, k, k}, rng, fan_in,
                             static_cast<double>(co * k * k));
    b_id = params.add_zeros(std::string("fusion.") + name + ".b", {co});
  };
  conv("stem1", f, 3, 3, net.stem1_w, net.stem1_b);
  conv("stem2", f, f, 3, net.stem2_w, net.stem2_b);
  conv("grid_proj", f, kRawChannels, 1, net.grid_w, net.grid_b);
  if (cfg.mode == ContextMode::CoarseConcat) {
    conv("img_trunk1", f, f, 3, net.img_trunk1_w, net.img_trunk1_b);
    conv("img_trunk2", f, f, 3, net.img_trunk2_w, net.img_trunk2_b);
    conv("grid_trunk1", f, f, 3, net.grid_trunk1_w, net.grid_trunk1_b);
    conv("grid_trunk2", f, f, 3, net.grid_trunk2_w, net.grid_trunk2_b);
  } else {
    conv("trunk1", f, 2 * f, 3, net.trunk1_w, net.trunk1_b);
    conv("trunk2", f, f, 3, net.trunk2_w, net.trunk2_b);
  }
  net.state_w1 = params.add_xavier("fusion.state1.w", {4, f}, rng, 4, static_cast<double>(f));
  net.state_b1 = params.add_zeros("fusion.state1.b", {f});
  net.state_w2 = params.add_xavier("fusion.state2.w", {f, f}, rng, static_cast<double>(f),
                                   static_cast<double>(f));
  net.state_b2 = params.add_zeros("fusion.state2.b", {f});
  return net;
}

template <typename T>
int FusionNet<T>::build_tokens(nn::Tape<T>& tape, const nn::ParamStore<T>& params,
                               const std::vector<int>& leaves, int image, int grid) const {
  (void)params;
  auto L = [&](int id) { return leaves[id]; };
  const auto& img_shape = tape.val(image).shape;
  const auto& grid_shape = tape.val(grid).shape;
  if (img_shape[1] != grid_shape[1] || img_shape[2] != grid_shape[2])
    throw ConfigError("fuse: image and grid spatial dimensions differ");
  if (img_shape[1] % 8 || img_shape[2] % 8)
    throw ConfigError("fuse: spatial dimensions must divide by 8");

  int s1 = tape.gelu(tape.conv2d(image, L(stem1_w), L(stem1_b), 2, 1));
  int s2 = tape.gelu(tape.conv2d(s1, L(stem2_w), L(stem2_b), 2, 1));  // [F,H/4,W/4]
  int gp = tape.gelu(tape.conv2d(tape.avg_pool2d(grid, 4), L(grid_w), L(grid_b), 1, 0));

  if (cfg.mode == ContextMode::CoarseConcat) {
    int it = tape.gelu(tape.conv2d(s2, L(img_trunk1_w), L(img_trunk1_b), 1, 1));
    it = tape.gelu(tape.conv2d(it, L(img_trunk2_w), L(img_trunk2_b), 1, 1));
    int img_tokens = tape.tokens_from_chw(tape.avg_pool2d(it, 2));
    int gt = tape.gelu(tape.conv2d(gp, L(grid_trunk1_w), L(grid_trunk1_b), 1, 1));
    gt = tape.gelu(tape.conv2d(gt, L(grid_trunk2_w), L(grid_trunk2_b), 1, 1));
    int grid_tokens = tape.tokens_from_chw(tape.avg_pool2d(gt, 2));
    return tape.concat_rows({img_tokens, grid_tokens});
  }

  int cat = tape.concat_chw(s2, gp);  // [2F,H/4,W/4]
  int t1 = tape.gelu(tape.conv2d(cat, L(trunk1_w), L(trunk1_b), 1, 1));
  int t2 = tape.gelu(tape.conv2d(t1, L(trunk2_w), L(trunk2_b), 1, 1));
  return tape.tokens_from_chw(tape.avg_pool2d(t2, 2));  // [(H/8)^2, F]
}

template <typename T>
int FusionNet<T>::build_state_token(nn::Tape<T>& tape, const nn::ParamStore<T>& params,
                                    const std::vector<int>& leaves, int state) const {
  (void)params;
  int h = tape.gelu(tape.linear(state, leaves[state_w1], leaves[state_b1]));
  return tape.linear(h, leaves[state_w2], leaves[state_b2]);
}

template struct FusionNet<float>;
template struct FusionNet<double>;

namespace {

template <typename T>
std::vector<int> leaves_for(nn::Tape<T>& tape, const nn::ParamStore<T>& params,
                            bool needs_grad) {
  std::vector<int> out;
  out.reserve(params.entries.size());
  for (const auto& e : params.entries) out.push_back(tape.leaf(e.value, needs_grad));
  return out;
}

}  // namespace

nn::Tensor32 fuse(const FusionNet<float>& net, nn::ParamStore<float>& params,
                  const nn::Tensor32& image, const nn::Tensor32& grid) {
  nn::Tape<float> tape;
  auto leaves = leaves_for(tape, params, false);
  int tokens = net.build_tokens(tape, params, leaves, tape.leaf(image), tape.leaf(grid));
  return tape.val(tokens);
}

template <typename T>
int encode_observations_on_tape(nn::Tape<T>& tape, const FusionNet<T>& net,
                                const nn::ParamStore<T>& params,
                                const std::vector<int>& leaves, const ObservationBundle& bundle,
                                const GaussianField* field, const GridStats& stats,
                                ConditioningLayout* layout_out) {
  int n_agents = bundle.n_agents();
  int n_steps = bundle.n_steps();
  if (n_agents == 0 || n_steps == 0) throw ConfigError("encode: empty observation bundle");
  const ContextMode mode = net.cfg.mode;
  if (mode != ContextMode::NoGaussian) {
    if (!field) throw ConfigError("encode: this context mode requires a gaussian field");
    if (static_cast<int>(field->maps.size()) < n_agents)
      throw ConfigError("encode: field is missing a view for some agent");
  }

  // WorldFrame ablation: grids from the field re-expressed in world frame.
  GaussianField world_field;
  const GaussianField* grid_field = field;
  if (mode == ContextMode::WorldFrame && field) {
    world_field = *field;
    if (world_field.frame == Frame::CameraLocal) {
      std::vector<RigidTransform> to_world;
      for (const auto& map : world_field.maps)
        to_world.push_back(bundle.cameras.at(map.view_id).pose_world_to_cam.inverse());
      transform_field(world_field, to_world, Frame::World);
    }
    grid_field = &world_field;
  }

  std::size_t h = bundle.frames[0][0].dim(0);
  std::size_t w = bundle.frames[0][0].dim(1);
  std::size_t f = static_cast<std::size_t>(net.cfg.feat);

  // per-agent standardized grids (shared across observation steps)
  std::vector<int> grid_leaves(n_agents, -1);
  for (int a = 0; a < n_agents; ++a) {
    nn::Tensor<T> grid_t({kRawChannels, h, w});
    if (mode != ContextMode::NoGaussian) {
      nn::Tensor32 g32 = standardize_grid(grid_features(dispatch(*grid_field, a)), stats);
      if (g32.dim(1) != h || g32.dim(2) != w)
        throw ConfigError("encode: grid and image spatial dimensions differ");
      for (std::size_t i = 0; i < g32.numel(); ++i) grid_t[i] = static_cast<T>(g32[i]);
    }
    grid_leaves[a] = tape.leaf(std::move(grid_t), false);
  }

  std::vector<int> parts;
  int global_token = 0;
  for (int a = 0; a < n_agents; ++a) {
    for (int s = 0; s < n_steps; ++s) {
      const nn::Tensor32& frame = bundle.frames[s][a];
      nn::Tensor<T> img({3, h, w});
      if (mode != ContextMode::NoImage) {
        nn::Tensor32 chw = image_chw(frame);
        for (std::size_t i = 0; i < chw.numel(); ++i) img[i] = static_cast<T>(chw[i]);
      }
      int tokens = net.build_tokens(tape, params, leaves, tape.leaf(std::move(img), false),
                                    grid_leaves[a]);
      // deterministic slot + spatial position embedding
      std::size_t rows = tape.val(tokens).dim(0);
      nn::Tensor<T> pos({rows, f});
      for (std::size_t r = 0; r < rows; ++r) {
        auto e = nn::sinusoidal_embed<T>(static_cast<double>(global_token + static_cast<int>(r)),
                                         f);
        std::copy(e.data.begin(), e.data.end(), pos.data.begin() + r * f);
      }
      global_token += static_cast<int>(rows);
      parts.push_back(tape.add(tokens, tape.leaf(std::move(pos), false)));
    }
  }

  if (net.cfg.use_state) {
    for (int a = 0; a < n_agents; ++a) {
      // gripper position expressed in the agent's own camera frame
      const auto& st = bundle.states.at(a);
      Vec3 p_cam = bundle.cameras.at(a).to_cam(Vec3(st[0], st[1], st[2]));
      nn::Tensor<T> sv({1, 4});
      sv[0] = static_cast<T>(p_cam.x());
      sv[1] = static_cast<T>(p_cam.y());
      sv[2] = static_cast<T>(p_cam.z());
      sv[3] = static_cast<T>(st[3]);
      int tok = net.build_state_token(tape, params, leaves, tape.leaf(std::move(sv), false));
      int pos = tape.leaf(nn::sinusoidal_embed<T>(static_cast<double>(global_token++), f), false);
      parts.push_back(tape.add(tok, pos));
    }
  }

  if (layout_out) {
    layout_out->n_agents = n_agents;
    layout_out->obs_steps = n_steps;
    layout_out->tokens_per_pair = net.cfg.tokens_per_pair();
    layout_out->has_state = net.cfg.use_state;
  }
  return tape.concat_rows(parts);
}

template int encode_observations_on_tape<float>(nn::Tape<float>&, const FusionNet<float>&,
                                                const nn::ParamStore<float>&,
                                                const std::vector<int>&, const ObservationBundle&,
                                                const GaussianField*, const GridStats&,
                                                ConditioningLayout*);
template int encode_observations_on_tape<double>(nn::Tape<double>&, const FusionNet<double>&,
                                                 const nn::ParamStore<double>&,
                                                 const std::vector<int>&,
                                                 const ObservationBundle&, const GaussianField*,
                                                 const GridStats&, ConditioningLayout*);

nn::Tensor32 encode_observations(const FusionNet<float>& net, nn::ParamStore<float>& params,
                                 const ObservationBundle& bundle, const GaussianField* field,
                                 const GridStats& stats, ConditioningLayout* layout_out) {
  nn::Tape<float> tape;
  auto leaves = leaves_for(tape, params, false);
  int cond =
      encode_observations_on_tape(tape, net, params, leaves, bundle, field, stats, layout_out);
  return tape.val(cond);
}

}  // namespace gaudp
