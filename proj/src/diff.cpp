// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#include "pemss/diff.hpp"

namespace pemss {

std::pair<double, VectorXd> eval_value_and_grad(const ObjectiveHandle& obj,
                                                const VectorXd& p) {
  require(p.size() == obj.dim, "objective: parameter dimension mismatch");
  VectorXd grad;
  const double v = obj.value_and_grad(p, grad);
  if (!std::isfinite(v) || !grad.allFinite())
    throw NonFiniteValue("objective: non-finite value or gradient");
  return {v, std::move(grad)};
}

VectorXd finite_diff_grad(const ObjectiveHandle& obj, const VectorXd& p,
                          double h) {
  require(p.size() == obj.dim, "objective: parameter dimension mismatch");
  VectorXd g(p.size());
  VectorXd q = p;
  for (Index i = 0; i < p.size(); ++i) {
    const double pi = p[i];
    q[i] = pi + h;
    const double fp = obj.value(q);
    q[i] = pi - h;
    const double fm = obj.value(q);
    q[i] = pi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

ObjectiveHandle add_objectives(ObjectiveHandle a, ObjectiveHandle b) {
  require(a.dim == b.dim, "objective: dimension mismatch in sum");
  ObjectiveHandle out;
  out.dim = a.dim;
  out.value = [a, b](const VectorXd& p) { return a.value(p) + b.value(p); };
  out.value_and_grad = [a, b](const VectorXd& p, VectorXd& grad) {
    VectorXd gb;
    const double va = a.value_and_grad(p, grad);
    const double vb = b.value_and_grad(p, gb);
    grad += gb;
    return va + vb;
  };
  return out;
}

}  // namespace pemss
