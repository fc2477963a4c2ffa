// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "pemss/common.hpp"

namespace pemss {

// A scalar objective over a flat parameter vector, with its exact gradient.
// `value` may return +inf to signal an evaluation that left the model's
// finite domain (optimizers treat that as a rejected trial point).
struct ObjectiveHandle {
  Index dim = 0;
  std::function<double(const VectorXd&)> value;
  // Computes the value and overwrites `grad` with the gradient.
  std::function<double(const VectorXd&, VectorXd&)> value_and_grad;
};

// Exact value + gradient. Throws NonFiniteValue if the objective leaves the
// finite domain at p.
std::pair<double, VectorXd> eval_value_and_grad(const ObjectiveHandle& obj,
                                                const VectorXd& p);

// Independent oracle: central finite differences, coordinate-wise.
VectorXd finite_diff_grad(const ObjectiveHandle& obj, const VectorXd& p,
                          double h = 1e-6);

// Sum of objectives over the same parameter space.
ObjectiveHandle add_objectives(ObjectiveHandle a, ObjectiveHandle b);

// One coordinate of agreement between an analytic and a reference gradient:
// relative error <= rel_tol where the gradient is meaningfully sized,
// absolute error <= abs_tol otherwise.
inline bool grad_coord_matches(double analytic, double reference,
                               double rel_tol = 1e-5, double abs_tol = 1e-7,
                               double size_floor = 1e-8) {
  const double abs_err = std::abs(analytic - reference);
  if (std::abs(analytic) > size_floor &&
      abs_err <= rel_tol * std::abs(analytic))
    return true;
  return abs_err <= abs_tol;
}

}  // namespace pemss
