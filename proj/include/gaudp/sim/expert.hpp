#pragma once

#include <vector>

#include "gaudp/sim/env.hpp"

namespace gaudp::sim {

// Waypoint controller over the privileged simulator state. Pure function of
// the state; BarLift2 waits for both grasps and lifts with equal dz.
std::vector<double> scripted_expert(const EnvState& state);

}  // namespace gaudp::sim
