#pragma once

#include <string>
#include <vector>

namespace gaudp {

struct GradCheckRow {
  std::string name;
  double max_rel = 0;
  double tolerance = 0;
  bool pass = false;
};

// FD verification of every differentiable primitive, a composed tiny
// network, and the renderer; the CLI gradcheck subcommand prints this.
std::vector<GradCheckRow> run_gradcheck_suite();

std::string format_gradcheck(const std::vector<GradCheckRow>& rows);

}  // namespace gaudp
