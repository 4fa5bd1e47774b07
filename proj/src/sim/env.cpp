#include "gaudp/sim/env.hpp"

#include <algorithm>
#include <cmath>

#include "gaudp/common.hpp"
#include "gaudp/nn/rng.hpp"
#include "gaudp/recon.hpp"

namespace gaudp::sim {

namespace {

constexpr double kDeg = 180.0 / M_PI;

Vec3 clamp_box(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  return Vec3(std::clamp(p.x(), lo.x(), hi.x()), std::clamp(p.y(), lo.y(), hi.y()),
              std::clamp(p.z(), lo.z(), hi.z()));
}

void workspace_box(int agent, Vec3& lo, Vec3& hi) {
  if (agent == 0) {
    lo = Vec3(-0.62, -0.45, 0.0);
    hi = Vec3(0.05, 0.45, 0.55);
  } else {
    lo = Vec3(-0.05, -0.45, 0.0);
    hi = Vec3(0.62, 0.45, 0.55);
  }
}

double bar_tilt_deg(const Vec3& e0, const Vec3& e1) {
  double dz = std::abs(e1.z() - e0.z());
  double horiz = std::hypot(e1.x() - e0.x(), e1.y() - e0.y());
  if (horiz < 1e-9) return 90.0;
  return std::atan2(dz, horiz) * kDeg;
}

RigidTransform bar_pose(const Vec3& e0, const Vec3& e1) {
  RigidTransform pose;
  pose.trans = 0.5 * (e0 + e1);
  Vec3 axis = e1 - e0;
  if (axis.norm() < 1e-9) return pose;
  Vec3 x = axis.normalized();
  Vec3 z = Vec3(0, 0, 1) - x * x.z();
  if (z.norm() < 1e-6) z = Vec3(0, 1, 0);
  z.normalize();
  Vec3 y = z.cross(x);
  Mat3 rot;
  rot.col(0) = x;
  rot.col(1) = y;
  rot.col(2) = z;
  pose.rot = rot;
  return pose;
}

}  // namespace

SimEnv::SimEnv(const TaskSpec& task, std::uint64_t seed, const EnvConfig& cfg) : cfg_(cfg) {
  state_.task = task;
  state_.seed = seed;
  static_set_ = make_table_set();
  bar_ = make_bar_set(task.bar_span);
  lid_ = make_lid_set();
  pot_ = make_pot_set();
  food_ = make_food_set();
  reset();
}

void SimEnv::reset() {
  nn::Rng rng(nn::Rng::derive(state_.seed, 0xC0FFEE));
  const TaskSpec& task = state_.task;
  state_.agents.assign(task.n_agents, AgentState{});

  int size = cfg_.image_size;
  double focal = 1.15 * size;
  for (int a = 0; a < task.n_agents; ++a) {
    double side = a == 0 ? -1.0 : 1.0;
    Vec3 eye(side * 0.88, -0.25, 0.62);
    Vec3 target(side * 0.14, 0.0, 0.05);
    double j = cfg_.camera_jitter;
    eye += Vec3(rng.uniform(-j, j), rng.uniform(-j, j), rng.uniform(-j, j) * 0.6);
    target += Vec3(rng.uniform(-j, j) * 0.8, rng.uniform(-j, j) * 0.8, 0);
    state_.agents[a].camera = CameraModel::look_at(eye, target, focal, focal, size, size);
    state_.agents[a].camera.z_near = 0.1;
    state_.agents[a].camera.z_far = 6.0;
    state_.agents[a].gripper = Vec3(side * 0.38, -0.08, 0.24);
    state_.agents[a].grip = false;
  }

  if (task.name == TaskName::BarLift2) {
    double cx = rng.uniform(-0.1, 0.1);
    double cy = rng.uniform(-0.1, 0.1);
    double theta = rng.uniform(-0.209, 0.209);  // within +/-12 degrees
    Vec3 half(0.5 * task.bar_span * std::cos(theta), 0.5 * task.bar_span * std::sin(theta), 0);
    Vec3 center(cx, cy, 0.02);
    state_.bar_end[0] = center - half;
    state_.bar_end[1] = center + half;
    state_.bar_holder = {-1, -1};
    state_.hold_counter = 0;
  } else {
    // the pot sits in the shared workspace strip so both arms can reach it
    state_.pot_pos = Vec3(-0.02, 0.12 + rng.uniform(-0.04, 0.04), 0.0);
    state_.lid_pos = state_.pot_pos + Vec3(0, 0, 0.085);
    state_.food_pos = Vec3(0.25 + rng.uniform(-0.06, 0.06), -0.12 + rng.uniform(-0.06, 0.06),
                           0.028);
    state_.lid_holder = -1;
    state_.food_holder = -1;
    state_.lid_lifted_latch = false;
    state_.early_place = false;
  }
  state_.step_count = 0;
  state_.status = EnvStatus::Running;
}

std::vector<CameraModel> SimEnv::cameras() const {
  std::vector<CameraModel> cams;
  for (const auto& a : state_.agents) cams.push_back(a.camera);
  return cams;
}

void SimEnv::apply_action(const std::vector<double>& joint_action) {
  const TaskSpec& task = state_.task;
  if (static_cast<int>(joint_action.size()) != 4 * task.n_agents)
    throw ConfigError("env: joint action must have dim 4*N");
  for (double v : joint_action)
    if (!std::isfinite(v)) throw NumericalError("env: NaN in action");

  for (int a = 0; a < task.n_agents; ++a) {
    AgentState& agent = state_.agents[a];
    Vec3 delta(joint_action[4 * a + 0], joint_action[4 * a + 1], joint_action[4 * a + 2]);
    for (int k = 0; k < 3; ++k) delta[k] = std::clamp(delta[k], -task.step_cap, task.step_cap);
    Vec3 lo, hi;
    workspace_box(a, lo, hi);
    agent.gripper = clamp_box(agent.gripper + delta, lo, hi);

    bool cmd = joint_action[4 * a + 3] > 0.5;
    if (!cmd && agent.grip) {
      agent.grip = false;
      if (task.name == TaskName::BarLift2) {
        for (int e = 0; e < 2; ++e)
          if (state_.bar_holder[e] == a) state_.bar_holder[e] = -1;
      } else {
        if (state_.lid_holder == a) state_.lid_holder = -1;
        if (state_.food_holder == a) state_.food_holder = -1;
      }
    }
    agent.grip = cmd;
  }

  // binding: closed grips holding nothing grab the nearest free handle in range
  for (int a = 0; a < state_.task.n_agents; ++a) {
    AgentState& agent = state_.agents[a];
    if (!agent.grip) continue;
    if (task.name == TaskName::BarLift2) {
      bool holds = state_.bar_holder[0] == a || state_.bar_holder[1] == a;
      if (holds) continue;
      int best = -1;
      double best_d = task.bind_radius;
      for (int e = 0; e < 2; ++e) {
        if (state_.bar_holder[e] >= 0) continue;
        double d = (state_.bar_end[e] - agent.gripper).norm();
        if (d < best_d) {
          best_d = d;
          best = e;
        }
      }
      if (best >= 0) state_.bar_holder[best] = a;
    } else {
      bool holds = state_.lid_holder == a || state_.food_holder == a;
      if (holds) continue;
      double d_lid = state_.lid_holder < 0 ? (state_.lid_pos - agent.gripper).norm() : 1e9;
      double d_food = state_.food_holder < 0 ? (state_.food_pos - agent.gripper).norm() : 1e9;
      if (d_lid <= d_food && d_lid < task.bind_radius)
        state_.lid_holder = a;
      else if (d_food < task.bind_radius)
        state_.food_holder = a;
    }
  }

  // bound handles follow their gripper
  if (task.name == TaskName::BarLift2) {
    for (int e = 0; e < 2; ++e)
      if (state_.bar_holder[e] >= 0)
        state_.bar_end[e] = state_.agents[state_.bar_holder[e]].gripper;
  } else {
    if (state_.lid_holder >= 0) state_.lid_pos = state_.agents[state_.lid_holder].gripper;
    if (state_.food_holder >= 0) state_.food_pos = state_.agents[state_.food_holder].gripper;
  }
}

void SimEnv::update_status() {
  const TaskSpec& task = state_.task;
  if (state_.status != EnvStatus::Running) return;

  if (task.name == TaskName::BarLift2) {
    double tilt = bar_tilt_deg(state_.bar_end[0], state_.bar_end[1]);
    if (tilt > task.tilt_limit_deg) {
      state_.status = EnvStatus::Failure;
      return;
    }
    double height = std::min(state_.bar_end[0].z(), state_.bar_end[1].z());
    if (height >= task.target_height)
      ++state_.hold_counter;
    else
      state_.hold_counter = 0;
    if (state_.hold_counter >= task.hold_steps) {
      state_.status = EnvStatus::Success;
      return;
    }
  } else {
    if (state_.lid_pos.z() > task.lid_height_thresh) state_.lid_lifted_latch = true;
    bool released = state_.food_holder < 0;
    double horiz = std::hypot(state_.food_pos.x() - state_.pot_pos.x(),
                              state_.food_pos.y() - state_.pot_pos.y());
    bool in_place = released && horiz < task.place_radius &&
                    state_.food_pos.z() < task.place_height;
    if (in_place) {
      if (!state_.lid_lifted_latch)
        state_.early_place = true;  // placement before the lid came off never counts
      else if (!state_.early_place) {
        state_.status = EnvStatus::Success;
        return;
      }
    }
  }
  if (state_.step_count >= task.episode_cap) state_.status = EnvStatus::Failure;
}

EnvStatus SimEnv::step(const std::vector<double>& joint_action) {
  if (state_.status != EnvStatus::Running) return state_.status;
  apply_action(joint_action);
  ++state_.step_count;
  update_status();
  return state_.status;
}

EnvState SimEnv::replay_states(const TaskSpec& task, std::uint64_t seed, const EnvConfig& cfg,
                               const std::vector<std::vector<double>>& actions,
                               std::vector<std::vector<std::array<double, 4>>>* per_step_states) {
  SimEnv env(task, seed, cfg);
  if (per_step_states) per_step_states->clear();
  for (const auto& action : actions) {
    if (env.status() != EnvStatus::Running) break;
    if (per_step_states) {
      std::vector<std::array<double, 4>> row;
      for (const auto& agent : env.state_.agents)
        row.push_back({agent.gripper.x(), agent.gripper.y(), agent.gripper.z(),
                       agent.grip ? 1.0 : 0.0});
      per_step_states->push_back(std::move(row));
    }
    env.step(action);
  }
  return env.state_;
}

SceneSnapshot SimEnv::snapshot() const {
  SceneSnapshot snap;
  snap.static_set = &static_set_;
  if (state_.task.name == TaskName::BarLift2) {
    snap.bodies.emplace_back(&bar_, bar_pose(state_.bar_end[0], state_.bar_end[1]));
  } else {
    RigidTransform lid_t, pot_t, food_t;
    lid_t.trans = state_.lid_pos;
    pot_t.trans = state_.pot_pos;
    food_t.trans = state_.food_pos;
    snap.bodies.emplace_back(&pot_, pot_t);
    snap.bodies.emplace_back(&lid_, lid_t);
    snap.bodies.emplace_back(&food_, food_t);
  }
  if (cfg_.render_grippers) {
    for (std::size_t a = 0; a < state_.agents.size(); ++a) {
      auto blobs = make_gripper_blobs(state_.agents[a].gripper, static_cast<int>(a),
                                      state_.agents[a].grip);
      snap.transient.insert(snap.transient.end(), blobs.begin(), blobs.end());
    }
  }
  return snap;
}

RenderOutput SimEnv::render_view(const CameraModel& cam) const {
  SceneSnapshot snap = snapshot();
  RenderBatch batch;
  int static_group = static_cast<int>(batch.group_to_cam.size());
  batch.group_to_cam.push_back(cam.pose_world_to_cam);
  for (const auto& raw : *snap.static_set) batch.push(&raw, static_group);
  for (const auto& [body, pose] : snap.bodies) {
    int grp = static_cast<int>(batch.group_to_cam.size());
    batch.group_to_cam.push_back(cam.pose_world_to_cam.compose(pose));
    for (const auto& raw : body->gaussians) batch.push(&raw, grp);
  }
  if (!snap.transient.empty()) {
    int grp = static_cast<int>(batch.group_to_cam.size());
    batch.group_to_cam.push_back(cam.pose_world_to_cam);
    for (const auto& raw : snap.transient) batch.push(&raw, grp);
  }
  RenderOptions opts;
  opts.background = Vec3(0.05, 0.06, 0.08);
  return render_batch(batch, cam, opts);
}

Observation SimEnv::observe(bool record_depth) const {
  Observation obs;
  for (const auto& agent : state_.agents) {
    RenderOutput out = render_view(agent.camera);
    nn::Tensor32 rgb({out.rgb.dim(0), out.rgb.dim(1), 3});
    for (std::size_t i = 0; i < out.rgb.numel(); ++i)
      rgb[i] = static_cast<float>(std::clamp(out.rgb[i], 0.0, 1.0));
    obs.rgb.push_back(std::move(rgb));
    if (record_depth) obs.depth.push_back(masked_normalized_depth(out));
    obs.states.push_back({agent.gripper.x(), agent.gripper.y(), agent.gripper.z(),
                          agent.grip ? 1.0 : 0.0});
    obs.cameras.push_back(agent.camera);
  }
  return obs;
}

double bar_tilt(const EnvState& state) { return bar_tilt_deg(state.bar_end[0], state.bar_end[1]); }

double bar_height(const EnvState& state) {
  return std::min(state.bar_end[0].z(), state.bar_end[1].z());
}

}  // namespace gaudp::sim
