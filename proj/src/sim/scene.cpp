#include "gaudp/sim/scene.hpp"

#include <cmath>

#include "gaudp/common.hpp"

namespace gaudp::sim {

std::string task_name(TaskName t) {
  return t == TaskName::BarLift2 ? "barlift2" : "lidplace2";
}

TaskName task_from_name(const std::string& name) {
  if (name == "barlift2") return TaskName::BarLift2;
  if (name == "lidplace2") return TaskName::LidPlace2;
  throw ConfigError("unknown task: " + name);
}

TaskSpec TaskSpec::get(TaskName name) {
  TaskSpec spec;
  spec.name = name;
  if (name == TaskName::LidPlace2) spec.episode_cap = 60;
  spec.validate();
  return spec;
}

void TaskSpec::validate() const {
  if (n_agents < 1 || episode_cap < 1 || step_cap <= 0 || bind_radius <= 0 ||
      target_height <= 0 || tilt_limit_deg <= 0 || place_radius <= 0 || lid_height_thresh <= 0)
    throw ConfigError("task spec: constants must be positive");
}

namespace {

RawGaussian blob(const Vec3& mu, const Vec3& sigma, const Vec3& color, double opacity) {
  RawGaussian raw;
  raw.mu = mu;
  raw.log_scale = sigma.array().log();
  raw.rot_raw = Vec4(1, 0, 0, 0);
  raw.opacity_logit = logit(opacity);
  raw.color_raw = Vec3(logit(std::clamp(color.x(), 1e-3, 1 - 1e-3)),
                       logit(std::clamp(color.y(), 1e-3, 1 - 1e-3)),
                       logit(std::clamp(color.z(), 1e-3, 1 - 1e-3)));
  return raw;
}

}  // namespace

std::vector<RawGaussian> make_table_set() {
  std::vector<RawGaussian> set;
  int grid = 10;
  for (int gy = 0; gy < grid; ++gy) {
    for (int gx = 0; gx < grid; ++gx) {
      double x = -0.42 + 0.84 * gx / (grid - 1.0);
      double y = -0.42 + 0.84 * gy / (grid - 1.0);
      bool dark = (gx + gy) % 2;
      Vec3 color = dark ? Vec3(0.32, 0.30, 0.28) : Vec3(0.55, 0.52, 0.47);
      set.push_back(blob(Vec3(x, y, -0.015), Vec3(0.062, 0.062, 0.012), color, 0.93));
    }
  }
  // side rails give the views a horizon reference
  for (int i = 0; i < 6; ++i) {
    double y = -0.4 + 0.8 * i / 5.0;
    set.push_back(blob(Vec3(-0.5, y, 0.02), Vec3(0.02, 0.05, 0.02), Vec3(0.2, 0.25, 0.45), 0.9));
    set.push_back(blob(Vec3(0.5, y, 0.02), Vec3(0.02, 0.05, 0.02), Vec3(0.45, 0.35, 0.2), 0.9));
  }
  return set;
}

BodySet make_bar_set(double span) {
  BodySet body;
  body.name = "bar";
  int n = 9;
  for (int i = 0; i < n; ++i) {
    double x = -span / 2 + span * i / (n - 1.0);
    body.gaussians.push_back(
        blob(Vec3(x, 0, 0), Vec3(0.045, 0.02, 0.02), Vec3(0.78, 0.16, 0.12), 0.95));
  }
  // end markers
  body.gaussians.push_back(
      blob(Vec3(-span / 2, 0, 0.012), Vec3(0.028, 0.028, 0.022), Vec3(0.92, 0.82, 0.15), 0.95));
  body.gaussians.push_back(
      blob(Vec3(span / 2, 0, 0.012), Vec3(0.028, 0.028, 0.022), Vec3(0.92, 0.82, 0.15), 0.95));
  return body;
}

BodySet make_lid_set() {
  BodySet body;
  body.name = "lid";
  for (int i = 0; i < 6; ++i) {
    double ang = 2 * M_PI * i / 6.0;
    body.gaussians.push_back(blob(Vec3(0.05 * std::cos(ang), 0.05 * std::sin(ang), 0),
                                  Vec3(0.035, 0.035, 0.012), Vec3(0.55, 0.68, 0.85), 0.93));
  }
  body.gaussians.push_back(blob(Vec3(0, 0, 0.025), Vec3(0.018, 0.018, 0.018),
                                Vec3(0.85, 0.87, 0.9), 0.95));  // knob
  return body;
}

BodySet make_pot_set() {
  BodySet body;
  body.name = "pot";
  for (int i = 0; i < 8; ++i) {
    double ang = 2 * M_PI * i / 8.0;
    body.gaussians.push_back(blob(Vec3(0.085 * std::cos(ang), 0.085 * std::sin(ang), 0.04),
                                  Vec3(0.025, 0.025, 0.04), Vec3(0.15, 0.2, 0.5), 0.95));
  }
  body.gaussians.push_back(
      blob(Vec3(0, 0, 0.005), Vec3(0.07, 0.07, 0.01), Vec3(0.1, 0.14, 0.35), 0.95));
  return body;
}

BodySet make_food_set() {
  BodySet body;
  body.name = "food";
  body.gaussians.push_back(blob(Vec3(0, 0, 0), Vec3(0.028, 0.028, 0.028),
                                Vec3(0.2, 0.75, 0.25), 0.96));
  return body;
}

std::vector<RawGaussian> make_gripper_blobs(const Vec3& pos, int agent_id, bool grip_closed) {
  std::vector<RawGaussian> set;
  Vec3 body_color = agent_id == 0 ? Vec3(0.15, 0.7, 0.9) : Vec3(0.9, 0.25, 0.8);
  set.push_back(blob(pos + Vec3(0, 0, 0.045), Vec3(0.024, 0.024, 0.035), body_color, 0.96));
  Vec3 tip_color = grip_closed ? Vec3(0.2, 0.9, 0.3) : Vec3(0.92, 0.92, 0.92);
  set.push_back(blob(pos, Vec3(0.016, 0.016, 0.016), tip_color, 0.96));
  return set;
}

}  // namespace gaudp::sim
