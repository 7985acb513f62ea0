#pragma once

#include <functional>
#include <vector>

#include "rstripe/types.hpp"

namespace rstripe {

struct MinimizeResult {
  VecX x;
  double f = 0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // best value after each iteration
};

// Simplex minimization in coordinates scaled by `step`; returns the best point
// ever evaluated, so f never exceeds objective(x0).
MinimizeResult nelder_mead(const std::function<double(const VecX&)>& objective, const VecX& x0, const VecX& step,
                           int max_iterations, double size_tolerance = 1e-6);

}  // namespace rstripe
