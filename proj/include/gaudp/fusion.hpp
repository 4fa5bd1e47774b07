#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "gaudp/camera.hpp"
#include "gaudp/gaussian.hpp"
#include "gaudp/nn/adam.hpp"
#include "gaudp/nn/tape.hpp"

namespace gaudp {

// Table-3 style context variants. CoarseConcat encodes image and grid with
// separate stems and concatenates at token level; WorldFrame feeds grids
// re-expressed in the world frame.
enum class ContextMode { Full, NoGaussian, NoImage, CoarseConcat, WorldFrame };

std::string context_mode_name(ContextMode mode);
ContextMode context_mode_from_name(const std::string& name);

// Synchronized multi-agent observation window. frames[step][agent] is an
// [H,W,3] image, steps ordered oldest to newest; states are world-frame
// gripper position plus grip flag at the newest step.
struct ObservationBundle {
  std::vector<std::vector<nn::Tensor32>> frames;
  std::vector<std::array<double, 4>> states;  // x,y,z,grip per agent
  std::vector<CameraModel> cameras;           // one view per agent

  int n_agents() const { return frames.empty() ? 0 : static_cast<int>(frames[0].size()); }
  int n_steps() const { return static_cast<int>(frames.size()); }
};

// Per-channel standardization of raw Gaussian grids (mean/std over the
// training set).
struct GridStats {
  std::array<double, kRawChannels> mean{};
  std::array<double, kRawChannels> stddev{};

  GridStats() {
    mean.fill(0.0);
    stddev.fill(1.0);
  }
};

// Routes the subset of the field owned by `agent_id` back to it: exactly the
// map with view_id == agent_id, no cross-view copying.
const GaussianMap& dispatch(const GaussianField& field, int agent_id);

// Raw parameters of a pixel-aligned map as a [14,H,W] feature grid with
// channel layout [mu(3), log_scale(3), quat(4), opacity_logit(1),
// color_raw(3)].
nn::Tensor64 grid_features(const GaussianMap& map);

// Exact inverse of grid_features (restores the spec channel layout).
GaussianMap map_from_grid(const nn::Tensor64& grid, int view_id, Frame frame);

// Standardized float grid ready for the fusion stem.
nn::Tensor32 standardize_grid(const nn::Tensor64& grid, const GridStats& stats);

// [H,W,3] image -> [3,H,W] float tensor.
nn::Tensor32 image_chw(const nn::Tensor32& hwc);
nn::Tensor32 image_chw64(const nn::Tensor64& hwc);

struct FusionConfig {
  int feat = 64;        // F
  int image_size = 64;  // H == W, divisible by 8
  ContextMode mode = ContextMode::Full;
  bool use_state = true;

  int tokens_per_pair() const {
    int t = (image_size / 8) * (image_size / 8);
    return mode == ContextMode::CoarseConcat ? 2 * t : t;
  }
};

// Learnable fusion weights: image stem (two stride-2 convs), 1x1 grid
// projection, two 3x3 trunk convs on the concatenated features, final
// stride-2 pooling; CoarseConcat swaps the shared trunk for per-modality
// trunks. State MLP embeds gripper pose + grip flag.
template <typename T>
struct FusionNet {
  FusionConfig cfg;
  int stem1_w = -1, stem1_b = -1, stem2_w = -1, stem2_b = -1;
  int grid_w = -1, grid_b = -1;
  int trunk1_w = -1, trunk1_b = -1, trunk2_w = -1, trunk2_b = -1;
  int img_trunk1_w = -1, img_trunk1_b = -1, img_trunk2_w = -1, img_trunk2_b = -1;
  int grid_trunk1_w = -1, grid_trunk1_b = -1, grid_trunk2_w = -1, grid_trunk2_b = -1;
  int state_w1 = -1, state_b1 = -1, state_w2 = -1, state_b2 = -1;

  static FusionNet create(nn::ParamStore<T>& params, const FusionConfig& cfg, nn::Rng& rng);

  // image [3,H,W] and grid [14,H,W] leaves -> [T,F] tokens.
  int build_tokens(nn::Tape<T>& tape, const nn::ParamStore<T>& params,
                   const std::vector<int>& param_leaves, int image, int grid) const;
  // state [1,4] leaf -> [1,F] token.
  int build_state_token(nn::Tape<T>& tape, const nn::ParamStore<T>& params,
                        const std::vector<int>& param_leaves, int state) const;
};

// fuse as a standalone operation (fresh tape, shared weights): tokens for
// one (image, grid) pair.
nn::Tensor32 fuse(const FusionNet<float>& net, nn::ParamStore<float>& params,
                  const nn::Tensor32& image, const nn::Tensor32& grid);

struct ConditioningLayout {
  int n_agents = 0;
  int obs_steps = 0;
  int tokens_per_pair = 0;
  bool has_state = false;

  int total_tokens() const {
    return n_agents * obs_steps * tokens_per_pair + (has_state ? n_agents : 0);
  }
  int agent_tokens_begin(int a) const { return a * obs_steps * tokens_per_pair; }
  int agent_tokens_end(int a) const { return (a + 1) * obs_steps * tokens_per_pair; }
  int state_row(int a) const { return n_agents * obs_steps * tokens_per_pair + a; }
};

// Builds the full conditioning token matrix on the tape: per-(agent, step)
// fused tokens in agent-major order, then per-agent state tokens, each with
// a deterministic sinusoidal slot/position embedding added.
template <typename T>
int encode_observations_on_tape(nn::Tape<T>& tape, const FusionNet<T>& net,
                                const nn::ParamStore<T>& params,
                                const std::vector<int>& param_leaves,
                                const ObservationBundle& bundle, const GaussianField* field,
                                const GridStats& stats, ConditioningLayout* layout_out);

// Convenience wrapper evaluating the conditioning to a plain tensor.
nn::Tensor32 encode_observations(const FusionNet<float>& net, nn::ParamStore<float>& params,
                                 const ObservationBundle& bundle, const GaussianField* field,
                                 const GridStats& stats, ConditioningLayout* layout_out = nullptr);

}  // namespace gaudp
