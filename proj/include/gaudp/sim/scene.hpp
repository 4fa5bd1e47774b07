#pragma once

#include <string>
#include <vector>

#include "gaudp/gaussian.hpp"
#include "gaudp/geometry.hpp"

namespace gaudp::sim {

enum class TaskName { BarLift2, LidPlace2 };

std::string task_name(TaskName t);
TaskName task_from_name(const std::string& name);

struct TaskSpec {
  TaskName name = TaskName::BarLift2;
  int n_agents = 2;
  int episode_cap = 40;
  // shared kinematics
  double step_cap = 0.05;      // per-step displacement bound
  double bind_radius = 0.03;   // grasp engages within this distance
  // BarLift2
  double bar_span = 0.6;
  double target_height = 0.20;  // h*
  double tilt_limit_deg = 15.0; // theta*
  int hold_steps = 5;
  // LidPlace2
  double place_radius = 0.06;      // r*
  double lid_height_thresh = 0.15;
  double place_height = 0.12;

  static TaskSpec get(TaskName name);
  void validate() const;
};

// A rigid body carrying its own gaussians in body frame.
struct BodySet {
  std::string name;
  std::vector<RawGaussian> gaussians;  // body frame
};

// World-frame gaussian content assembled for rendering one simulator state.
struct SceneSnapshot {
  const std::vector<RawGaussian>* static_set = nullptr;
  std::vector<std::pair<const BodySet*, RigidTransform>> bodies;  // body -> world
  std::vector<RawGaussian> transient;  // gripper blobs, already world frame
};

// Static table + fixtures (world frame).
std::vector<RawGaussian> make_table_set();

BodySet make_bar_set(double span);
BodySet make_lid_set();
BodySet make_pot_set();
BodySet make_food_set();

// Small per-agent gripper marker; tip color encodes the grip state.
std::vector<RawGaussian> make_gripper_blobs(const Vec3& pos, int agent_id, bool grip_closed);

}  // namespace gaudp::sim
