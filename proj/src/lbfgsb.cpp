// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include <Eigen/LU>

#include "pemss/lbfgsb.hpp"

namespace pemss {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Box {
  const VectorXd* lo = nullptr;  // nullptr means unbounded
  const VectorXd* hi = nullptr;

  double lower(Index i) const { return lo ? (*lo)[i] : -kInf; }
  double upper(Index i) const { return hi ? (*hi)[i] : kInf; }

  void clamp(VectorXd& x) const {
    if (lo) x = x.cwiseMax(*lo);
    if (hi) x = x.cwiseMin(*hi);
  }
};

// Infinity norm of the projected gradient P(x - g) - x.
double proj_grad_norm(const VectorXd& x, const VectorXd& g, const Box& box) {
  double m = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    double step = x[i] - g[i];
    step = std::min(std::max(step, box.lower(i)), box.upper(i));
    m = std::max(m, std::abs(step - x[i]));
  }
  return m;
}

// Limited-memory curvature pairs and the compact representation
//   B = theta I - W K^{-1} W^T,  W = [Y, theta S],
//   K = [-D  L^T; L  theta S^T S]
// with D = diag(s_i^T y_i) and L the strictly lower part of S^T Y.
struct Memory {
  std::deque<VectorXd> s, y;
  double theta = 1.0;
  MatrixXd W;                       // n x 2m
  MatrixXd K;
  Eigen::PartialPivLU<MatrixXd> luK;
  int mw = 0;                       // columns of W

  void clear() {
    s.clear();
    y.clear();
    theta = 1.0;
    mw = 0;
  }

  bool push(const VectorXd& snew, const VectorXd& ynew, int cap) {
    const double sy = snew.dot(ynew);
    if (sy <= 1e-12 * snew.norm() * ynew.norm()) return false;
    s.push_back(snew);
    y.push_back(ynew);
    while ((int)s.size() > cap) {
      s.pop_front();
      y.pop_front();
    }
    theta = ynew.squaredNorm() / sy;
    return true;
  }

  void rebuild(Index n) {
    const int m = (int)s.size();
    mw = 2 * m;
    if (m == 0) return;
    W.resize(n, 2 * m);
    MatrixXd SY(m, m), SS(m, m);
    for (int i = 0; i < m; ++i) {
      W.col(i) = y[i];
      W.col(m + i) = theta * s[i];
      for (int j = 0; j < m; ++j) SY(i, j) = s[i].dot(y[j]);
      for (int j = 0; j <= i; ++j) {
        SS(i, j) = s[i].dot(s[j]);
        SS(j, i) = SS(i, j);
      }
    }
    K.setZero(2 * m, 2 * m);
    K.topLeftCorner(m, m).diagonal() = -SY.diagonal();
    MatrixXd Lstrict = SY.triangularView<Eigen::StrictlyLower>();
    K.topRightCorner(m, m) = Lstrict.transpose();
    K.bottomLeftCorner(m, m) = Lstrict;
    K.bottomRightCorner(m, m) = theta * SS;
    luK.compute(K);
  }

  VectorXd solveK(const VectorXd& r) const { return luK.solve(r); }

  // B v for the quadratic model.
  VectorXd bmul(const VectorXd& v) const {
    VectorXd out = theta * v;
    if (mw > 0) out.noalias() -= W * solveK(W.transpose() * v);
    return out;
  }
};

// Generalized Cauchy point: exact minimizer march of the quadratic model
// along the projected steepest-descent path. Fills xcp and the mask of
// variables that hit their bound on the way.
void cauchy_point(const VectorXd& x, const VectorXd& g, const Box& box,
                  const Memory& mem, VectorXd& xcp,
                  std::vector<char>& at_bound) {
  const Index n = x.size();
  xcp = x;
  at_bound.assign(n, 0);
  VectorXd d(n), t(n);
  std::vector<Index> order;
  order.reserve(n);
  for (Index i = 0; i < n; ++i) {
    double ti;
    if (g[i] < 0.0)
      ti = (box.upper(i) - x[i]) / (-g[i]);
    else if (g[i] > 0.0)
      ti = (x[i] - box.lower(i)) / g[i];
    else
      ti = kInf;
    t[i] = ti;
    d[i] = ti > 0.0 ? -g[i] : 0.0;
    if (ti == 0.0) at_bound[i] = 1;
    if (ti > 0.0 && std::isfinite(ti)) order.push_back(i);
  }
  std::sort(order.begin(), order.end(),
            [&](Index a, Index b) { return t[a] < t[b]; });

  const int mw = mem.mw;
  VectorXd p, c;
  if (mw > 0) {
    p.noalias() = mem.W.transpose() * d;
    c = VectorXd::Zero(mw);
  }
  double fp = -d.squaredNorm();
  double fpp = -mem.theta * fp;
  if (mw > 0) fpp -= p.dot(mem.solveK(p));
  double t_old = 0.0;
  double dt_min = fpp > 0.0 ? -fp / fpp : kInf;

  size_t pos = 0;
  while (pos < order.size()) {
    const Index b = order[pos];
    const double tb = t[b];
    const double dt = tb - t_old;
    if (fp >= 0.0) {
      dt_min = 0.0;
      break;
    }
    if (dt_min < dt) break;
    // walk to the breakpoint: variable b reaches its bound
    const double zb = tb * d[b];
    const double gb = g[b];
    xcp[b] = gb < 0.0 ? box.upper(b) : box.lower(b);
    at_bound[b] = 1;
    if (mw > 0) {
      c += dt * p;
      const VectorXd wb = mem.W.row(b).transpose();
      const VectorXd kc = mem.solveK(c);
      const VectorXd kp = mem.solveK(p);
      const VectorXd kw = mem.solveK(wb);
      fp += dt * fpp + gb * gb + mem.theta * gb * zb - gb * wb.dot(kc);
      fpp -= mem.theta * gb * gb + 2.0 * gb * wb.dot(kp) +
             gb * gb * wb.dot(kw);
      p += gb * wb;
    } else {
      fp += dt * fpp + gb * gb + mem.theta * gb * zb;
      fpp -= mem.theta * gb * gb;
    }
    d[b] = 0.0;
    t_old = tb;
    dt_min = fpp > 0.0 ? -fp / fpp : kInf;
    ++pos;
  }

  if (fp >= 0.0) dt_min = 0.0;
  if (!std::isfinite(dt_min)) dt_min = 0.0;
  dt_min = std::max(dt_min, 0.0);
  const double t_cp = t_old + dt_min;
  for (Index i = 0; i < n; ++i) {
    if (!at_bound[i] && d[i] != 0.0 && t_cp < t[i]) xcp[i] += t_cp * d[i];
    else if (!at_bound[i] && d[i] != 0.0 && t_cp >= t[i]) {
      xcp[i] = g[i] < 0.0 ? box.upper(i) : box.lower(i);
      at_bound[i] = 1;
    }
  }
  box.clamp(xcp);
}

// Minimize the quadratic model over the variables free at the Cauchy point,
// starting from xcp, then backtrack the correction into the box.
VectorXd subspace_step(const VectorXd& x, const VectorXd& g, const Box& box,
                       const Memory& mem, const VectorXd& xcp,
                       const std::vector<char>& at_bound) {
  const Index n = x.size();
  std::vector<Index> free;
  free.reserve(n);
  for (Index i = 0; i < n; ++i)
    if (!at_bound[i]) free.push_back(i);
  VectorXd xbar = xcp;
  if (free.empty()) return xbar;

  // reduced model gradient at xcp
  VectorXd r = g + mem.bmul(xcp - x);
  const Index nf = (Index)free.size();
  VectorXd rf(nf);
  for (Index j = 0; j < nf; ++j) rf[j] = r[free[j]];

  VectorXd df = -rf / mem.theta;
  if (mem.mw > 0) {
    MatrixXd Wf(nf, mem.mw);
    for (Index j = 0; j < nf; ++j) Wf.row(j) = mem.W.row(free[j]);
    // Woodbury solve of (theta I - Wf K^{-1} Wf^T) df = -rf
    MatrixXd N = mem.K - (1.0 / mem.theta) * (Wf.transpose() * Wf);
    VectorXd xi = N.partialPivLu().solve(Wf.transpose() * rf);
    df.noalias() -= (1.0 / (mem.theta * mem.theta)) * (Wf * xi);
  }

  double alpha = 1.0;
  for (Index j = 0; j < nf; ++j) {
    const Index i = free[j];
    if (df[j] > 0.0 && std::isfinite(box.upper(i)))
      alpha = std::min(alpha, (box.upper(i) - xcp[i]) / df[j]);
    else if (df[j] < 0.0 && std::isfinite(box.lower(i)))
      alpha = std::min(alpha, (box.lower(i) - xcp[i]) / df[j]);
  }
  alpha = std::max(alpha, 0.0);
  for (Index j = 0; j < nf; ++j) xbar[free[j]] += alpha * df[j];
  box.clamp(xbar);
  return xbar;
}

struct LsPoint {
  double t = 0.0;
  double f = kInf;
  double dphi = 0.0;
};

// Strong-Wolfe line search along d with every trial clamped to the box.
// Returns true on success with (x, f, g) at the accepted point.
bool wolfe_search(const ObjectiveHandle& obj, const Box& box,
                  const VectorXd& x0, double f0, const VectorXd& g0,
                  const VectorXd& d, double stpmax, const QnConfig& cfg,
                  VectorXd& x_out, double& f_out, VectorXd& g_out,
                  int& n_evals) {
  const double dphi0 = g0.dot(d);
  if (!(dphi0 < 0.0)) return false;
  VectorXd xt, gt;
  int evals = 0;
  auto eval = [&](double t, LsPoint& pt) {
    xt = x0 + t * d;
    box.clamp(xt);
    pt.t = t;
    pt.f = obj.value_and_grad(xt, gt);
    pt.dphi = gt.dot(d);
    ++evals;
    ++n_evals;
  };
  auto accept = [&](const LsPoint& pt) {
    x_out = x0 + pt.t * d;
    box.clamp(x_out);
    f_out = pt.f;
    g_out = gt;  // gt holds the gradient of the last evaluation == pt
    return true;
  };
  auto wolfe_ok = [&](const LsPoint& pt) {
    if (pt.f <= f0 + cfg.c1 * pt.t * dphi0 &&
        std::abs(pt.dphi) <= -cfg.c2 * dphi0)
      return true;
    // approximate variant: near the rounding floor of f the sufficient
    // decrease test is noise; a slope window plus a no-blowup guard on f
    // accepts the same points it would with exact arithmetic
    return pt.f <= f0 + 1e-12 * std::max(1.0, std::abs(f0)) &&
           pt.dphi >= cfg.c2 * dphi0 &&
           pt.dphi <= (2.0 * cfg.c1 - 1.0) * dphi0;
  };

  // cubic minimizer of the interpolant through two slope points; falls back
  // to bisection when degenerate
  auto interp = [](const LsPoint& a, const LsPoint& b) {
    const double d1 = a.dphi + b.dphi - 3.0 * (a.f - b.f) / (a.t - b.t);
    const double disc = d1 * d1 - a.dphi * b.dphi;
    if (disc >= 0.0 && std::isfinite(disc)) {
      const double d2 = std::sqrt(disc) * (b.t > a.t ? 1.0 : -1.0);
      const double t = b.t - (b.t - a.t) * (b.dphi + d2 - d1) /
                               (b.dphi - a.dphi + 2.0 * d2);
      if (std::isfinite(t)) return t;
    }
    return 0.5 * (a.t + b.t);
  };

  LsPoint lo{0.0, f0, dphi0}, probe, hi;
  bool bracketed = false;

  double t = std::min(1.0, stpmax);
  LsPoint prev = lo;
  // bracketing phase
  while (evals < cfg.max_ls_evals) {
    eval(t, probe);
    if (std::isfinite(probe.f) && wolfe_ok(probe)) return accept(probe);
    if (!std::isfinite(probe.f) || probe.f > f0 + cfg.c1 * t * dphi0 ||
        (prev.t > 0.0 && probe.f >= prev.f)) {
      lo = prev;
      hi = probe;
      bracketed = true;
      break;
    }
    if (probe.dphi >= 0.0) {
      lo = probe;
      hi = prev;
      bracketed = true;
      break;
    }
    if (t >= stpmax) return accept(probe);  // best feasible along d
    prev = probe;
    t = std::min(2.0 * t, stpmax);
  }
  if (!bracketed) return false;

  // zoom phase: lo satisfies sufficient decrease (or is the best so far),
  // the minimizer is bracketed between lo and hi
  for (; evals < cfg.max_ls_evals;) {
    double tm;
    if (!std::isfinite(hi.f))
      tm = 0.5 * (lo.t + hi.t);
    else
      tm = interp(lo, hi);
    const double span = std::abs(hi.t - lo.t);
    const double a = std::min(lo.t, hi.t), b = std::max(lo.t, hi.t);
    if (!(tm > a + 0.1 * span) || !(tm < b - 0.1 * span))
      tm = 0.5 * (lo.t + hi.t);
    eval(tm, probe);
    if (std::isfinite(probe.f) && wolfe_ok(probe)) return accept(probe);
    if (!std::isfinite(probe.f) || probe.f > f0 + cfg.c1 * tm * dphi0 ||
        probe.f >= lo.f) {
      hi = probe;
    } else {
      if (probe.dphi * (hi.t - lo.t) >= 0.0) hi = lo;
      lo = probe;
    }
    if (std::abs(hi.t - lo.t) * d.norm() < 1e-16 * (1.0 + x0.norm())) break;
  }
  // fall back to the best sufficient-decrease point found
  if (std::isfinite(lo.f) && lo.t > 0.0 && lo.f < f0) {
    eval(lo.t, probe);
    return accept(probe);
  }
  return false;
}

}  // namespace

std::string qn_status_name(QnStatus s) {
  switch (s) {
    case QnStatus::GradConverged:
      return "grad_converged";
    case QnStatus::StepConverged:
      return "step_converged";
    case QnStatus::MaxIters:
      return "max_iters";
    case QnStatus::LineSearchFailure:
      return "line_search_failure";
  }
  return "unknown";
}

QnResult qn_run(const ObjectiveHandle& obj, const VectorXd& x0,
                const VectorXd& lower, const VectorXd& upper,
                const QnConfig& cfg) {
  const Index n = x0.size();
  require(obj.dim == n, "qn_run: dimension mismatch");
  require(lower.size() == 0 || lower.size() == n,
          "qn_run: lower bound size mismatch");
  require(upper.size() == 0 || upper.size() == n,
          "qn_run: upper bound size mismatch");
  Box box;
  if (lower.size() == n) box.lo = &lower;
  if (upper.size() == n) box.hi = &upper;

  QnResult res;
  res.x = x0;
  box.clamp(res.x);
  res.g.resize(n);
  res.f = obj.value_and_grad(res.x, res.g);
  res.n_evals = 1;
  if (!std::isfinite(res.f))
    throw NonFiniteValue("qn_run: objective not finite at the start point");

  Memory mem;
  VectorXd xcp, xbar, d, xnew, gnew(n);
  std::vector<char> at_bound;

  for (res.iterations = 0; res.iterations < cfg.max_iters;) {
    if (proj_grad_norm(res.x, res.g, box) <= cfg.grad_tol) {
      res.status = QnStatus::GradConverged;
      return res;
    }

    mem.rebuild(n);
    cauchy_point(res.x, res.g, box, mem, xcp, at_bound);
    xbar = subspace_step(res.x, res.g, box, mem, xcp, at_bound);
    d = xbar - res.x;

    bool retried = false;
    for (;;) {
      double stpmax = kInf;
      for (Index i = 0; i < n; ++i) {
        if (d[i] > 0.0 && std::isfinite(box.upper(i)))
          stpmax = std::min(stpmax, (box.upper(i) - res.x[i]) / d[i]);
        else if (d[i] < 0.0 && std::isfinite(box.lower(i)))
          stpmax = std::min(stpmax, (res.x[i] - box.lower(i)) / (-d[i]));
      }
      stpmax = std::min(std::max(stpmax, 1.0), 1e10);

      double fnew;
      const bool ok =
          d.squaredNorm() > 0.0 &&
          wolfe_search(obj, box, res.x, res.f, res.g, d, stpmax, cfg, xnew,
                       fnew, gnew, res.n_evals);
      if (ok) {
        const VectorXd s = xnew - res.x;
        const VectorXd yv = gnew - res.g;
        const double fold = res.f;
        res.x = xnew;
        res.f = fnew;
        res.g = gnew;
        mem.push(s, yv, cfg.memory);
        ++res.iterations;
        if (std::abs(fold - fnew) <=
            cfg.step_tol * std::max({std::abs(fold), std::abs(fnew), 1.0})) {
          res.status = QnStatus::StepConverged;
          return res;
        }
        break;
      }
      if (!retried && mem.mw > 0) {
        // drop the curvature history and retry along projected steepest
        // descent from the same point
        mem.clear();
        mem.rebuild(n);
        cauchy_point(res.x, res.g, box, mem, xcp, at_bound);
        xbar = subspace_step(res.x, res.g, box, mem, xcp, at_bound);
        d = xbar - res.x;
        retried = true;
        continue;
      }
      res.status = QnStatus::LineSearchFailure;
      return res;
    }
  }
  res.status = QnStatus::MaxIters;
  return res;
}

VectorXd adam_run(const ObjectiveHandle& obj, const VectorXd& x0,
                  const AdamConfig& cfg) {
  require(obj.dim == x0.size(), "adam_run: dimension mismatch");
  VectorXd x = x0;
  if (cfg.iters <= 0) return x;
  VectorXd m = VectorXd::Zero(x.size());
  VectorXd v = VectorXd::Zero(x.size());
  VectorXd g(x.size());
  double b1t = 1.0, b2t = 1.0;
  for (int t = 1; t <= cfg.iters; ++t) {
    const double f = obj.value_and_grad(x, g);
    if (!std::isfinite(f))
      throw NonFiniteValue("adam_run: objective not finite at iterate " +
                           std::to_string(t));
    b1t *= cfg.beta1;
    b2t *= cfg.beta2;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const double corr1 = 1.0 - b1t;
    const double corr2 = 1.0 - b2t;
    x -= (cfg.lr / corr1) *
         m.cwiseQuotient(((v / corr2).cwiseSqrt().array() + cfg.eps).matrix());
  }
  return x;
}

}  // namespace pemss
