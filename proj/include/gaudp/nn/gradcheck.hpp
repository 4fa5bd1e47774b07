#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gaudp/nn/tensor.hpp"

namespace gaudp::nn {

struct GradCheckResult {
  double max_rel = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;

  bool pass(double tol) const { return max_rel < tol; }
};

// rel = |a - n| / max(|a|, |n|, floor); parameters where both sides are
// below `floor` count as matching.
inline double rel_error(double analytic, double numeric, double floor) {
  double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

// Central finite differences of `eval_loss` with respect to every element of
// `param`, compared against `analytic` (same shape). The loss callable must
// read the current contents of *param.
inline GradCheckResult fd_check(Tensor64& param, const Tensor64& analytic,
                                const std::function<double()>& eval_loss, double h = 1e-5,
                                double floor = 1e-6) {
  GradCheckResult res;
  for (std::size_t i = 0; i < param.numel(); ++i) {
    double saved = param[i];
    param[i] = saved + h;
    double up = eval_loss();
    param[i] = saved - h;
    double down = eval_loss();
    param[i] = saved;
    double numeric = (up - down) / (2.0 * h);
    double rel = rel_error(analytic[i], numeric, floor);
    if (rel > res.max_rel) {
      res.max_rel = rel;
      res.worst_analytic = analytic[i];
      res.worst_numeric = numeric;
      res.worst_index = i;
    }
    ++res.checked;
  }
  return res;
}

inline GradCheckResult merge(const GradCheckResult& a, const GradCheckResult& b) {
  GradCheckResult out = a.max_rel >= b.max_rel ? a : b;
  out.checked = a.checked + b.checked;
  return out;
}

}  // namespace gaudp::nn
