#include "gaudp/sim/expert.hpp"

#include <algorithm>
#include <cmath>

#include "gaudp/common.hpp"

namespace gaudp::sim {

namespace {

// Clamped move toward a target point.
void move_toward(const Vec3& pos, const Vec3& target, double cap, double* out) {
  Vec3 d = target - pos;
  out[0] = std::clamp(d.x(), -cap, cap);
  out[1] = std::clamp(d.y(), -cap, cap);
  out[2] = std::clamp(d.z(), -cap, cap);
}

void barlift_expert(const EnvState& s, std::vector<double>& action) {
  const TaskSpec& task = s.task;
  double cap = task.step_cap;
  bool both_bound = s.bar_holder[0] >= 0 && s.bar_holder[1] >= 0;
  double lift_goal = task.target_height + 0.03;

  for (int a = 0; a < 2; ++a) {
    double* out = &action[4 * a];
    bool holds = s.bar_holder[0] == a || s.bar_holder[1] == a;
    const Vec3& pos = s.agents[a].gripper;
    if (!holds) {
      // agents take the end on their own side (ends are spawn-ordered by x)
      const Vec3& end = s.bar_end[a];
      Vec3 above = end + Vec3(0, 0, 0.07);
      double horiz = std::hypot(pos.x() - end.x(), pos.y() - end.y());
      if (horiz > 0.015) {
        move_toward(pos, above, cap, out);
        out[3] = 0.0;
      } else {
        move_toward(pos, end, cap, out);
        double dist = (pos - end).norm();
        out[3] = dist < 0.02 ? 1.0 : 0.0;
      }
    } else if (!both_bound) {
      out[0] = out[1] = out[2] = 0.0;  // wait for the partner
      out[3] = 1.0;
    } else {
      // synchronized lift: identical dz for both agents
      double height = std::min(s.bar_end[0].z(), s.bar_end[1].z());
      double dz = std::clamp(lift_goal - height, 0.0, cap);
      out[0] = out[1] = 0.0;
      out[2] = dz;
      out[3] = 1.0;
    }
  }
}

void lidplace_expert(const EnvState& s, std::vector<double>& action) {
  const TaskSpec& task = s.task;
  double cap = task.step_cap;

  // agent 0: lift the lid and park it aside
  {
    double* out = &action[0];
    const Vec3& pos = s.agents[0].gripper;
    Vec3 park(-0.34, -0.30, 0.26);
    bool holds = s.lid_holder == 0;
    if (!holds) {
      Vec3 above = s.lid_pos + Vec3(0, 0, 0.06);
      double horiz = std::hypot(pos.x() - s.lid_pos.x(), pos.y() - s.lid_pos.y());
      if (horiz > 0.015) {
        move_toward(pos, above, cap, out);
        out[3] = 0.0;
      } else {
        move_toward(pos, s.lid_pos, cap, out);
        out[3] = (pos - s.lid_pos).norm() < 0.02 ? 1.0 : 0.0;
      }
    } else if (pos.z() < 0.23) {
      out[0] = out[1] = 0.0;
      out[2] = cap;
      out[3] = 1.0;
    } else {
      move_toward(pos, park, cap, out);
      out[3] = 1.0;
    }
  }

  // agent 1: wait for the lid, then pick the food and place it in the pot
  {
    double* out = &action[4];
    const Vec3& pos = s.agents[1].gripper;
    bool holds = s.food_holder == 1;
    if (!s.lid_lifted_latch && !holds) {
      out[0] = out[1] = out[2] = 0.0;
      out[3] = 0.0;
    } else if (!holds) {
      Vec3 above = s.food_pos + Vec3(0, 0, 0.06);
      double horiz = std::hypot(pos.x() - s.food_pos.x(), pos.y() - s.food_pos.y());
      if (horiz > 0.015) {
        move_toward(pos, above, cap, out);
        out[3] = 0.0;
      } else {
        move_toward(pos, s.food_pos, cap, out);
        out[3] = (pos - s.food_pos).norm() < 0.02 ? 1.0 : 0.0;
      }
    } else {
      Vec3 drop = s.pot_pos + Vec3(0, 0, 0.09);
      double horiz = std::hypot(pos.x() - drop.x(), pos.y() - drop.y());
      if (horiz > 0.02) {
        // travel at a safe height
        Vec3 waypoint(drop.x(), drop.y(), std::max(0.2, pos.z()));
        move_toward(pos, waypoint, cap, out);
        out[3] = 1.0;
      } else if (pos.z() > drop.z() + 0.01) {
        move_toward(pos, drop, cap, out);
        out[3] = 1.0;
      } else {
        out[0] = out[1] = out[2] = 0.0;
        out[3] = 0.0;  // release
      }
    }
  }
}

}  // namespace

std::vector<double> scripted_expert(const EnvState& state) {
  if (state.status != EnvStatus::Running)
    throw ConfigError("expert: episode is not running");
  std::vector<double> action(4 * state.task.n_agents, 0.0);
  if (state.task.name == TaskName::BarLift2)
    barlift_expert(state, action);
  else
    lidplace_expert(state, action);
  return action;
}

}  // namespace gaudp::sim
