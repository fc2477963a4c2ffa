// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pemss/diff.hpp"

namespace pemss {

// Bound-constrained limited-memory quasi-Newton minimizer. Iterates stay
// inside [lower, upper] at every objective evaluation; pass empty bound
// vectors for an unconstrained problem. Objective values of +inf are treated
// as rejected trial points by the line search.

enum class QnStatus {
  GradConverged,      // projected gradient below grad_tol
  StepConverged,      // relative objective decrease below step_tol
  MaxIters,
  LineSearchFailure,  // no acceptable step along any remaining direction
};

std::string qn_status_name(QnStatus s);

struct QnConfig {
  int max_iters = 10000;
  int memory = 10;
  double grad_tol = 1e-8;
  double step_tol = 1e-12;
  double c1 = 1e-4;          // sufficient-decrease constant
  double c2 = 0.9;           // curvature constant
  int max_ls_evals = 30;     // objective evaluations per line search
};

struct QnResult {
  VectorXd x;
  double f = 0.0;
  VectorXd g;
  int iterations = 0;
  int n_evals = 0;
  QnStatus status = QnStatus::MaxIters;
};

QnResult qn_run(const ObjectiveHandle& obj, const VectorXd& x0,
                const VectorXd& lower, const VectorXd& upper,
                const QnConfig& cfg = {});

// First-order warm-start pass: full-gradient Adam with bias correction.
// Returns the last iterate. iters == 0 returns x0 unchanged. Throws
// NonFiniteValue if the objective leaves the finite domain at an iterate.
struct AdamConfig {
  int iters = 1000;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

VectorXd adam_run(const ObjectiveHandle& obj, const VectorXd& x0,
                  const AdamConfig& cfg = {});

}  // namespace pemss
