#include "rstripe/optim.hpp"

#include <cmath>
#include <limits>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

namespace rstripe {

namespace {

struct Bridge {
  const std::function<double(const VecX&)>* fn;
  const VecX* x0;
  const VecX* step;
  VecX best_x;
  double best_f = std::numeric_limits<double>::infinity();
};

constexpr double kPenalty = 1e100;

double evaluate(const gsl_vector* u, void* params) {
  auto* b = static_cast<Bridge*>(params);
  VecX x(b->x0->size());
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = (*b->x0)(i) + (*b->step)(i) * gsl_vector_get(u, i);
  double f = (*b->fn)(x);
  if (!std::isfinite(f)) f = kPenalty;
  if (f < b->best_f) {
    b->best_f = f;
    b->best_x = x;
  }
  return f;
}

}  // namespace

MinimizeResult nelder_mead(const std::function<double(const VecX&)>& objective, const VecX& x0, const VecX& step,
                           int max_iterations, double size_tolerance) {
  const auto dim = static_cast<std::size_t>(x0.size());
  Bridge bridge{&objective, &x0, &step, x0, std::numeric_limits<double>::infinity()};
  MinimizeResult res;

  gsl_set_error_handler_off();
  gsl_multimin_function fn{&evaluate, dim, &bridge};
  gsl_vector* u = gsl_vector_calloc(dim);
  gsl_vector* ss = gsl_vector_alloc(dim);
  gsl_vector_set_all(ss, 1.0);
  gsl_multimin_fminimizer* m = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim);
  gsl_multimin_fminimizer_set(m, &fn, u, ss);

  int it = 0;
  for (; it < max_iterations; ++it) {
    if (gsl_multimin_fminimizer_iterate(m) != GSL_SUCCESS) break;
    res.trace.push_back(bridge.best_f);
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(m), size_tolerance) == GSL_SUCCESS) {
      res.converged = true;
      ++it;
      break;
    }
  }
  gsl_multimin_fminimizer_free(m);
  gsl_vector_free(ss);
  gsl_vector_free(u);

  res.iterations = it;
  res.x = bridge.best_x;
  res.f = bridge.best_f;
  return res;
}

}  // namespace rstripe
