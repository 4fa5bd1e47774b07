#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "gaudp/camera.hpp"
#include "gaudp/fusion.hpp"
#include "gaudp/renderer.hpp"
#include "gaudp/sim/scene.hpp"

namespace gaudp::sim {

enum class EnvStatus { Running, Success, Failure };

struct AgentState {
  Vec3 gripper = Vec3::Zero();
  bool grip = false;
  CameraModel camera;  // mounted, fixed for the episode
};

// Full simulator state; step() is a pure function of (state, action) and the
// success/failure predicates are re-evaluable from it.
struct EnvState {
  TaskSpec task;
  std::uint64_t seed = 0;
  int step_count = 0;
  EnvStatus status = EnvStatus::Running;
  std::vector<AgentState> agents;

  // BarLift2
  std::array<Vec3, 2> bar_end{};
  std::array<int, 2> bar_holder{-1, -1};  // agent index bound to each end
  int hold_counter = 0;

  // LidPlace2
  Vec3 lid_pos = Vec3::Zero();
  Vec3 food_pos = Vec3::Zero();
  Vec3 pot_pos = Vec3::Zero();
  int lid_holder = -1, food_holder = -1;
  bool lid_lifted_latch = false;
  bool early_place = false;
};

// One synchronized multi-view observation.
struct Observation {
  std::vector<nn::Tensor32> rgb;     // per agent [H,W,3]
  std::vector<nn::Tensor64> depth;   // per agent [H,W]; empty unless recorded
  std::vector<std::array<double, 4>> states;  // world gripper pos + grip flag
  std::vector<CameraModel> cameras;
};

struct EnvConfig {
  int image_size = 64;
  double camera_jitter = 0.05;  // per-episode mount perturbation, scene units
  bool render_grippers = true;
};

class SimEnv {
 public:
  SimEnv(const TaskSpec& task, std::uint64_t seed, const EnvConfig& cfg = EnvConfig());

  const EnvState& state() const { return state_; }
  EnvStatus status() const { return state_.status; }
  int n_agents() const { return state_.task.n_agents; }
  std::vector<CameraModel> cameras() const;

  // joint_action is 4*N: per-agent (dx,dy,dz,grip); displacement is clamped
  // to the per-step cap, grip engages when the channel exceeds 0.5.
  EnvStatus step(const std::vector<double>& joint_action);

  // Kinematics only (no rendering); used to re-derive states from recorded
  // actions at dataset-load time.
  static EnvState replay_states(const TaskSpec& task, std::uint64_t seed, const EnvConfig& cfg,
                                const std::vector<std::vector<double>>& actions,
                                std::vector<std::vector<std::array<double, 4>>>* per_step_states);

  Observation observe(bool record_depth) const;

  // World-frame render content for the current state.
  SceneSnapshot snapshot() const;
  RenderOutput render_view(const CameraModel& cam) const;

 private:
  void reset();
  void apply_action(const std::vector<double>& joint_action);
  void update_status();

  EnvConfig cfg_;
  EnvState state_;
  std::vector<RawGaussian> static_set_;
  BodySet bar_, lid_, pot_, food_;
};

// Instantaneous task measurements on a bare state (offline re-evaluation and
// the scripted expert both use these).
double bar_tilt(const EnvState& state);    // degrees
double bar_height(const EnvState& state);  // lower end, scene units

}  // namespace gaudp::sim
