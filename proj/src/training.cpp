// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#include "pemss/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace pemss {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double group_norm(const VectorXd& tw, const LassoGroup& g) {
  double s = 0.0;
  for (Index i : g.idx) s += tw[i] * tw[i];
  return std::sqrt(s);
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

double regularizer(const Layout& L, const RegConfig& cfg, const VectorXd& tw,
                   VectorXd* grad) {
  require(tw.size() == L.total(), "regularizer: parameter size mismatch");
  const auto theta = tw.head(L.n_theta);
  const auto w0 = tw.tail(L.n_w);
  double r = 0.5 * cfg.rho_theta * theta.squaredNorm() +
             cfg.tau_l1 * theta.lpNorm<1>() + 0.5 * cfg.rho_w0 * w0.squaredNorm();
  if (grad) {
    grad->head(L.n_theta) += cfg.rho_theta * theta;
    if (cfg.tau_l1 > 0)
      grad->head(L.n_theta) +=
          cfg.tau_l1 * theta.array().sign().matrix();
    grad->tail(L.n_w) += cfg.rho_w0 * w0;
  }
  if (cfg.tau_group > 0) {
    require(cfg.group_weights.empty() ||
                cfg.group_weights.size() == cfg.groups.size(),
            "regularizer: one weight per group required");
    for (size_t gi = 0; gi < cfg.groups.size(); ++gi) {
      const auto& g = cfg.groups[gi];
      const double w = cfg.group_weights.empty() ? 1.0 : cfg.group_weights[gi];
      const double n = group_norm(tw, g);
      r += cfg.tau_group * w * n;
      if (grad && n > 0) {
        const double scale = cfg.tau_group * w / n;
        for (Index i : g.idx) (*grad)[i] += scale * tw[i];
      }
    }
  }
  return r;
}

ObjectiveHandle pem_objective(const ModelStructure& ms, const Dataset& d) {
  const Layout L = layout(ms);
  ObjectiveHandle h;
  h.dim = L.total();
  h.value = [ms, d](const VectorXd& tw) { return pem_value(ms, tw, d); };
  h.value_and_grad = [ms, d](const VectorXd& tw, VectorXd& grad) {
    return pem_value_grad(ms, tw, d, grad);
  };
  return h;
}

ObjectiveHandle regularized_objective(const ModelStructure& ms,
                                      const Dataset& d, const RegConfig& reg) {
  const Layout L = layout(ms);
  ObjectiveHandle h;
  h.dim = L.total();
  h.value = [ms, d, reg, L](const VectorXd& tw) {
    const double f = pem_value(ms, tw, d);
    if (!std::isfinite(f)) return f;
    return f + regularizer(L, reg, tw, nullptr);
  };
  h.value_and_grad = [ms, d, reg, L](const VectorXd& tw, VectorXd& grad) {
    const double f = pem_value_grad(ms, tw, d, grad);
    if (!std::isfinite(f)) return f;
    return f + regularizer(L, reg, tw, &grad);
  };
  return h;
}

// ---- l1 splitting ----------------------------------------------------------

ParamVector split_l1(const ParamVector& p, Index n_theta, double tau) {
  require(n_theta >= 0 && n_theta <= p.size(),
          "split_l1: n_theta out of range");
  if (tau <= 0) return p;
  const Index n_w = p.size() - n_theta;
  ParamVector q;
  q.values.resize(n_theta * 2 + n_w);
  q.values.head(n_theta) = p.values.head(n_theta).cwiseMax(0.0);
  q.values.segment(n_theta, n_theta) = (-p.values.head(n_theta)).cwiseMax(0.0);
  q.values.tail(n_w) = p.values.tail(n_w);
  for (const auto& g : p.groups) {
    require(g.hi <= n_theta || g.lo >= n_theta,
            "split_l1: group straddles the theta/w0 boundary");
    if (g.hi <= n_theta) q.groups.push_back({g.name + "+", g.lo, g.hi});
  }
  for (const auto& g : p.groups)
    if (g.hi <= n_theta)
      q.groups.push_back({g.name + "-", g.lo + n_theta, g.hi + n_theta});
  for (const auto& g : p.groups)
    if (g.lo >= n_theta)
      q.groups.push_back({g.name, g.lo + n_theta, g.hi + n_theta});
  q.lower = VectorXd::Constant(q.values.size(), -kInf);
  q.lower.head(2 * n_theta).setZero();
  q.upper = VectorXd::Constant(q.values.size(), kInf);
  if (p.has_bounds()) {
    q.lower.head(n_theta) = q.lower.head(n_theta).cwiseMax(p.lower.head(n_theta));
    q.lower.tail(n_w) = p.lower.tail(n_w);
    q.upper.head(n_theta) = p.upper.head(n_theta).cwiseMax(0.0);
    q.upper.tail(n_w) = p.upper.tail(n_w);
  }
  q.validate();
  return q;
}

VectorXd split_point(const VectorXd& x, Index n_theta) {
  const Index n_w = x.size() - n_theta;
  VectorXd xs(n_theta * 2 + n_w);
  xs.head(n_theta) = x.head(n_theta).cwiseMax(0.0);
  xs.segment(n_theta, n_theta) = (-x.head(n_theta)).cwiseMax(0.0);
  xs.tail(n_w) = x.tail(n_w);
  return xs;
}

VectorXd unsplit_point(const VectorXd& xs, Index n_theta) {
  const Index n_w = xs.size() - 2 * n_theta;
  VectorXd x(n_theta + n_w);
  x.head(n_theta) = xs.head(n_theta) - xs.segment(n_theta, n_theta);
  x.tail(n_w) = xs.tail(n_w);
  return x;
}

ObjectiveHandle split_objective(const ObjectiveHandle& base, Index n_theta,
                                double tau) {
  ObjectiveHandle h;
  h.dim = base.dim + n_theta;
  h.value = [base, n_theta, tau](const VectorXd& xs) {
    const double f = base.value(unsplit_point(xs, n_theta));
    if (!std::isfinite(f)) return f;
    return f + tau * xs.head(2 * n_theta).sum();
  };
  h.value_and_grad = [base, n_theta, tau](const VectorXd& xs, VectorXd& grad) {
    VectorXd gb;
    const double f = base.value_and_grad(unsplit_point(xs, n_theta), gb);
    grad.resize(xs.size());
    if (!std::isfinite(f)) {
      grad.setZero();
      return f;
    }
    const Index n_w = xs.size() - 2 * n_theta;
    grad.head(n_theta) = gb.head(n_theta).array() + tau;
    grad.segment(n_theta, n_theta) = -gb.head(n_theta).array() + tau;
    grad.tail(n_w) = gb.tail(n_w);
    return f + tau * xs.head(2 * n_theta).sum();
  };
  return h;
}

// ---- training pipeline -----------------------------------------------------

namespace {

// Biases the initial state-transition maps toward slow poles: adds c to the
// Ax/Az diagonals (affine families to the constant coefficient, matrix nets
// through the output-layer bias, state nets through the bypass diagonal when
// they have one).
void shift_transition_diag(const ModelStructure& ms, const Layout& L, double c,
                           VectorXd& tw) {
  if (c == 0.0) return;
  const Index nx = ms.nx, nz = ms.nz;
  switch (ms.family) {
    case Family::Lti:
      for (Index i = 0; i < nx; ++i) tw[L.ax + i * nx + i] += c;
      for (Index i = 0; i < nz; ++i) tw[L.az + i * nz + i] += c;
      break;
    case Family::LpvExternal:
    case Family::LpvSelf: {
      const Index rows = ms.mx_rows();
      if (ms.matrix_dep == MatrixDep::Affine) {
        for (Index i = 0; i < nx; ++i) tw[L.mx + i * rows + i] += c;
        for (Index i = 0; i < nz; ++i) tw[L.mz + i * nz + i] += c;
      } else {
        const Index bx =
            L.mx + ffn_param_offset_bias(ms.fmx, ms.fmx.n_layers());
        for (Index i = 0; i < nx; ++i) tw[bx + i * rows + i] += c;
        if (nz > 0) {
          const Index bz =
              L.mz + ffn_param_offset_bias(ms.fmz, ms.fmz.n_layers());
          for (Index i = 0; i < nz; ++i) tw[bz + i * nz + i] += c;
        }
      }
      break;
    }
    case Family::Nonlinear:
      if (ms.fx.bypass) {
        const Index b = L.fx + ffn_param_offset_bypass(ms.fx);
        for (Index i = 0; i < nx; ++i) tw[b + i * nx + i] += c;
      }
      if (nz > 0 && ms.fz.bypass) {
        const Index b = L.fz + ffn_param_offset_bypass(ms.fz);
        for (Index i = 0; i < nz; ++i) tw[b + i * nz + i] += c;
      }
      break;
  }
}

}  // namespace

VectorXd initial_point(const ModelStructure& ms, const TrainConfig& cfg,
                       std::uint64_t seed) {
  const Layout L = layout(ms);
  Rng rng(Rng::derive(seed, 10));
  VectorXd tw = VectorXd::Zero(L.total());
  auto fill_normal = [&](Index off, Index n) {
    for (Index i = 0; i < n; ++i) tw[off + i] = rng.normal(0.0, cfg.init_std);
  };
  auto fill_net = [&](const FfnShape& sh, Index off) {
    init_ffn(sh, tw.data() + off, rng, InitScheme::NormalFanIn, cfg.ffn_gain);
  };
  switch (ms.family) {
    case Family::Lti:
      fill_normal(0, L.n_theta);
      break;
    case Family::LpvExternal:
    case Family::LpvSelf:
      if (ms.matrix_dep == MatrixDep::Affine) {
        fill_normal(L.mx, ms.mx_block() * ms.n_mx_coeff());
        if (ms.nz > 0) fill_normal(L.mz, ms.mz_free() * ms.n_mz_coeff());
      } else {
        fill_net(ms.fmx, L.mx);
        if (ms.nz > 0) fill_net(ms.fmz, L.mz);
      }
      if (ms.family == Family::LpvSelf) fill_net(ms.psi, L.psi);
      break;
    case Family::Nonlinear:
      fill_net(ms.fx, L.fx);
      fill_net(ms.gx, L.gx);
      if (ms.nz > 0) {
        fill_net(ms.fz, L.fz);
        fill_net(ms.gz, L.gz);
      }
      break;
  }
  shift_transition_diag(ms, L, cfg.init_diag, tw);
  return tw;
}

VectorXd reconstruct_initial_state(const ModelStructure& ms,
                                   const VectorXd& theta, const Dataset& d,
                                   double rho_w0, const QnConfig& qn) {
  const Layout L = layout(ms);
  require(theta.size() == L.n_theta, "reconstruct: theta size mismatch");
  const double n = static_cast<double>(d.n());
  ObjectiveHandle h;
  h.dim = L.n_w;
  auto assemble = [&L, theta](const VectorXd& w) {
    VectorXd tw(L.total());
    tw << theta, w;
    return tw;
  };
  h.value = [ms, assemble, d, rho_w0, n](const VectorXd& w) {
    const double f = pem_value(ms, assemble(w), d);
    if (!std::isfinite(f)) return f;
    return n * f + 0.5 * rho_w0 * w.squaredNorm();
  };
  h.value_and_grad = [ms, assemble, d, rho_w0, n, &L](const VectorXd& w,
                                                      VectorXd& grad) {
    VectorXd g;
    const double f = pem_value_grad(ms, assemble(w), d, g);
    grad.resize(w.size());
    if (!std::isfinite(f)) {
      grad.setZero();
      return f;
    }
    grad = n * g.tail(L.n_w) + rho_w0 * w;
    return n * f + 0.5 * rho_w0 * w.squaredNorm();
  };
  const QnResult res = qn_run(h, VectorXd::Zero(L.n_w), {}, {}, qn);
  return res.x;
}

namespace {

struct ScorePair {
  double sim = 0.0;
  double pred = 0.0;
};

// BFR of the predictor and of the plant-only simulation; a rollout that
// leaves the finite domain scores 0.
ScorePair score_model(const ModelStructure& ms, const VectorXd& theta,
                      const VectorXd& w0, const Dataset& d) {
  ScorePair s;
  try {
    const RolloutResult rr = predictor_rollout(ms, theta, w0, d);
    s.pred = bfr(d.y, rr.y_pred);
  } catch (const Error&) {
    s.pred = 0.0;
  }
  try {
    const RolloutResult rr = simulation_rollout(ms, theta, w0.head(ms.nx), d);
    s.sim = bfr(d.y, rr.y_sim);
  } catch (const Error&) {
    s.sim = 0.0;
  }
  return s;
}

Index burn_length(const TrainConfig& cfg, Index n) {
  Index b = cfg.burn_in > 0 ? cfg.burn_in : std::min<Index>(100, n / 10);
  return std::max<Index>(1, std::min(b, n));
}

ScorePair score_fresh(const ModelStructure& ms, const VectorXd& theta,
                      const Dataset& d, const TrainConfig& cfg) {
  QnConfig qn = cfg.qn;
  qn.max_iters = std::min(qn.max_iters, 500);
  VectorXd w0;
  try {
    w0 = reconstruct_initial_state(ms, theta, d.head(burn_length(cfg, d.n())),
                                   cfg.reg.rho_w0, qn);
  } catch (const Error&) {
    w0 = VectorXd::Zero(ms.nx + ms.nz);
  }
  return score_model(ms, theta, w0, d);
}

void fill_group_norms(TrainReport& rep, const Layout& L, const RegConfig& reg,
                      const VectorXd& tw) {
  rep.group_norms.clear();
  if (!reg.groups.empty()) {
    for (const auto& g : reg.groups)
      rep.group_norms.emplace_back(g.name, group_norm(tw, g));
  } else {
    for (const auto& g : L.groups)
      rep.group_norms.emplace_back(g.name, tw.segment(g.lo, g.size()).norm());
  }
}

}  // namespace

TrainReport train(const ModelStructure& ms, const Dataset& train_data,
                  const Dataset* test_data, const TrainConfig& cfg,
                  const VectorXd* tw_init) {
  const auto t0 = std::chrono::steady_clock::now();
  const Layout L = layout(ms);
  TrainReport rep;
  rep.seed = cfg.seed;
  rep.loss = kInf;
  rep.objective = kInf;
  rep.bfr_sim_test = kNan;
  rep.bfr_pred_test = kNan;

  VectorXd x = tw_init ? *tw_init : initial_point(ms, cfg, cfg.seed);
  require(x.size() == L.total(), "train: initial point size mismatch");

  const ObjectiveHandle obj = regularized_objective(ms, train_data, cfg.reg);
  PhaseReport ph;
  ph.name = "fit";
  try {
    if (cfg.adam.iters > 0) {
      x = adam_run(obj, x, cfg.adam);
      ph.adam_iters = cfg.adam.iters;
    }
    QnResult qr;
    if (cfg.reg.tau_l1 > 0) {
      RegConfig smooth = cfg.reg;
      smooth.tau_l1 = 0.0;
      const ObjectiveHandle base =
          regularized_objective(ms, train_data, smooth);
      const ObjectiveHandle sobj =
          split_objective(base, L.n_theta, cfg.reg.tau_l1);
      const ParamVector pv =
          split_l1(make_param_vector(ms, x.head(L.n_theta), x.tail(L.n_w)),
                   L.n_theta, cfg.reg.tau_l1);
      qr = qn_run(sobj, pv.values, pv.lower, pv.upper, cfg.qn);
      x = unsplit_point(qr.x, L.n_theta);
    } else {
      qr = qn_run(obj, x, {}, {}, cfg.qn);
      x = qr.x;
    }
    ph.qn_iters = qr.iterations;
    ph.qn_evals = qr.n_evals;
    ph.f_final = qr.f;
    ph.status = qr.status;
    rep.converged = qr.status == QnStatus::GradConverged ||
                    qr.status == QnStatus::StepConverged;
  } catch (const Error& e) {
    rep.failed = true;
    rep.failure = e.what();
    rep.phases.push_back(ph);
    rep.wall_seconds = elapsed_s(t0);
    return rep;
  }
  rep.phases.push_back(ph);

  rep.theta = x.head(L.n_theta);
  rep.w0 = x.tail(L.n_w);
  rep.loss = pem_value(ms, x, train_data);
  rep.objective = std::isfinite(rep.loss)
                      ? rep.loss + regularizer(L, cfg.reg, x, nullptr)
                      : rep.loss;
  const ScorePair tr = score_model(ms, rep.theta, rep.w0, train_data);
  rep.bfr_sim_train = tr.sim;
  rep.bfr_pred_train = tr.pred;
  if (test_data) {
    const ScorePair te = score_fresh(ms, rep.theta, *test_data, cfg);
    rep.bfr_sim_test = te.sim;
    rep.bfr_pred_test = te.pred;
  }
  fill_group_norms(rep, L, cfg.reg, x);
  rep.wall_seconds = elapsed_s(t0);
  return rep;
}

namespace {

ModelStructure plant_only(const ModelStructure& ms) {
  ModelStructure p = ms;
  p.nz = 0;
  return p;
}

// Copy every theta block the plant layout shares with the full layout
// (theta_x/theta_y, theta_Mx, theta_psi); noise blocks are left untouched.
void copy_plant_theta(const Layout& plant, const VectorXd& th_plant,
                      const Layout& full, VectorXd& th_full) {
  for (const auto& g : plant.groups) {
    if (g.name == "w0" || g.hi > plant.n_theta) continue;
    for (const auto& h : full.groups) {
      if (h.name != g.name) continue;
      require(h.size() == g.size(), "bootstrap: plant block size mismatch");
      th_full.segment(h.lo, h.size()) = th_plant.segment(g.lo, g.size());
    }
  }
}

void init_noise_blocks(const ModelStructure& ms, const Layout& L,
                       const TrainConfig& cfg, VectorXd& theta) {
  if (cfg.noise_init == "zero") return;
  require(cfg.noise_init == "random",
          "bootstrap: noise_init must be random or zero");
  Rng rng(Rng::derive(cfg.seed, 11));
  switch (ms.family) {
    case Family::Lti:
      for (Index i = L.az; i < L.n_theta; ++i)
        theta[i] = rng.normal(0.0, cfg.noise_init_std);
      break;
    case Family::LpvExternal:
    case Family::LpvSelf:
      if (ms.matrix_dep == MatrixDep::Affine) {
        for (Index i = 0; i < ms.mz_free() * ms.n_mz_coeff(); ++i)
          theta[L.mz + i] = rng.normal(0.0, cfg.noise_init_std);
      } else {
        init_ffn(ms.fmz, theta.data() + L.mz, rng, InitScheme::NormalFanIn,
                 cfg.noise_init_std);
      }
      break;
    case Family::Nonlinear:
      init_ffn(ms.fz, theta.data() + L.fz, rng, InitScheme::NormalFanIn,
               cfg.noise_init_std);
      init_ffn(ms.gz, theta.data() + L.gz, rng, InitScheme::NormalFanIn,
               cfg.noise_init_std);
      break;
  }
}

}  // namespace

TrainReport bootstrap_train(const ModelStructure& ms, const Dataset& train_data,
                            const Dataset* test_data, const TrainConfig& cfg) {
  if (ms.nz == 0) return train(ms, train_data, test_data, cfg);
  const auto t0 = std::chrono::steady_clock::now();

  const ModelStructure plant = plant_only(ms);
  TrainConfig cfg1 = cfg;
  cfg1.reg.tau_group = 0.0;
  cfg1.reg.groups.clear();
  cfg1.reg.group_weights.clear();
  TrainReport rep1 = train(plant, train_data, nullptr, cfg1);
  rep1.phases.front().name = "plant";
  if (rep1.failed) {
    rep1.wall_seconds = elapsed_s(t0);
    return rep1;
  }

  const Layout Lp = layout(plant);
  const Layout L = layout(ms);
  VectorXd tw = VectorXd::Zero(L.total());
  copy_plant_theta(Lp, rep1.theta, L, tw);
  {
    VectorXd theta = tw.head(L.n_theta);
    init_noise_blocks(ms, L, cfg, theta);
    tw.head(L.n_theta) = theta;
  }
  tw.segment(L.w0, ms.nx) = rep1.w0.head(ms.nx);

  TrainReport rep = train(ms, train_data, test_data, cfg, &tw);
  rep.phases.front().name = "combined";
  rep.phases.insert(rep.phases.begin(), rep1.phases.front());
  rep.wall_seconds = elapsed_s(t0);
  return rep;
}

namespace {

double selection_metric(const TrainReport& r, bool have_test, int nz,
                        const std::string& select_on) {
  std::string mode = select_on;
  if (mode == "auto") mode = nz > 0 ? "pred" : "sim";
  require(mode == "pred" || mode == "sim",
          "multistart: select_on must be auto, pred or sim");
  if (have_test) return mode == "pred" ? r.bfr_pred_test : r.bfr_sim_test;
  return mode == "pred" ? r.bfr_pred_train : r.bfr_sim_train;
}

}  // namespace

MultistartReport multistart(const ModelStructure& ms, const Dataset& train_data,
                            const Dataset* test_data, const TrainConfig& cfg) {
  std::vector<std::uint64_t> seeds = cfg.seeds;
  if (seeds.empty()) {
    require(cfg.multistart >= 1, "multistart: count must be >= 1");
    for (int i = 0; i < cfg.multistart; ++i)
      seeds.push_back(cfg.seed + static_cast<std::uint64_t>(i));
  }
  MultistartReport out;
  double best_metric = -kInf;
  for (std::uint64_t s : seeds) {
    TrainConfig ci = cfg;
    ci.seed = s;
    TrainReport r;
    try {
      r = cfg.bootstrap ? bootstrap_train(ms, train_data, test_data, ci)
                        : train(ms, train_data, test_data, ci);
    } catch (const Error& e) {
      r = TrainReport{};
      r.seed = s;
      r.failed = true;
      r.failure = e.what();
    }
    if (r.failed) {
      ++out.n_failed;
    } else {
      const double m =
          selection_metric(r, test_data != nullptr, ms.nz, cfg.select_on);
      if (std::isfinite(m) && m > best_metric) {
        best_metric = m;
        out.best = static_cast<int>(out.runs.size());
      }
    }
    out.runs.push_back(std::move(r));
  }
  return out;
}

namespace {

TrainReport run_configured(const ModelStructure& ms, const Dataset& train_data,
                           const Dataset* test_data, const TrainConfig& cfg,
                           const VectorXd* tw_init) {
  if (tw_init == nullptr && (cfg.multistart > 1 || cfg.seeds.size() > 1)) {
    MultistartReport mr = multistart(ms, train_data, test_data, cfg);
    if (mr.best < 0) {
      TrainReport r;
      r.failed = true;
      r.failure = "every multistart run failed";
      if (!mr.runs.empty()) r.failure += ": " + mr.runs.front().failure;
      return r;
    }
    return mr.runs[static_cast<size_t>(mr.best)];
  }
  return cfg.bootstrap && tw_init == nullptr
             ? bootstrap_train(ms, train_data, test_data, cfg)
             : train(ms, train_data, test_data, cfg, tw_init);
}

}  // namespace

SelectReport structure_select(const ModelStructure& ms,
                              const Dataset& train_data,
                              const Dataset* test_data,
                              const TrainConfig& cfg) {
  SelectReport out;
  out.reduced = ms;
  if (cfg.reg.tau_group <= 0) {
    out.stage1 = run_configured(ms, train_data, test_data, cfg, nullptr);
    out.final_run = out.stage1;
    return out;
  }

  const std::vector<LassoGroup> groups = lasso_groups(ms, cfg.targets);
  require(!groups.empty(), "structure selection: no groups to penalize");
  TrainConfig cfg1 = cfg;
  cfg1.reg.groups = groups;
  cfg1.reg.group_weights.clear();
  out.stage1 = run_configured(ms, train_data, test_data, cfg1, nullptr);
  if (out.stage1.failed) {
    out.final_run = out.stage1;
    return out;
  }

  const Layout L = layout(ms);
  VectorXd tw(L.total());
  tw << out.stage1.theta, out.stage1.w0;

  // Optional reweighted rounds: each group is re-penalized with the inverse
  // of its previous norm (normalized to mean weight 1), warm-started.
  for (int round = 0; round < cfg.reweight_iters; ++round) {
    std::vector<double> inv(groups.size());
    double max_n = 0.0;
    for (const auto& g : groups) max_n = std::max(max_n, group_norm(tw, g));
    if (max_n <= 0) break;
    const double floor = 1e-6 * max_n;
    double mean = 0.0;
    for (size_t i = 0; i < groups.size(); ++i) {
      inv[i] = 1.0 / std::max(group_norm(tw, groups[i]), floor);
      mean += inv[i];
    }
    mean /= static_cast<double>(groups.size());
    for (double& w : inv) w /= mean;
    TrainConfig cr = cfg1;
    cr.reg.group_weights = inv;
    cr.adam.iters = 0;
    TrainReport r = train(ms, train_data, test_data, cr, &tw);
    if (r.failed) break;
    out.stage1 = r;
    tw << r.theta, r.w0;
  }

  double max_norm = 0.0;
  std::vector<double> norms(groups.size());
  for (size_t i = 0; i < groups.size(); ++i) {
    norms[i] = group_norm(tw, groups[i]);
    max_norm = std::max(max_norm, norms[i]);
  }
  out.epsilon_group =
      cfg.epsilon_group > 0 ? cfg.epsilon_group : 1e-3 * max_norm;

  std::vector<int> drop_x, drop_z;
  size_t n_below = 0;
  for (size_t i = 0; i < groups.size(); ++i) {
    if (norms[i] >= out.epsilon_group) continue;
    ++n_below;
    out.pruned.push_back(groups[i].name);
    for (Index j : groups[i].idx) tw[j] = 0.0;
    const std::string& name = groups[i].name;
    const int k = std::atoi(name.c_str() + 1);
    if (name[0] == 'x') drop_x.push_back(k);
    if (name[0] == 'z') drop_z.push_back(k);
  }
  if (n_below == groups.size())
    throw AllGroupsPruned("structure selection: threshold " +
                          std::to_string(out.epsilon_group) +
                          " removes every group");

  VectorXd theta2 = tw.head(L.n_theta);
  VectorXd w02 = tw.tail(L.n_w);
  const bool can_reduce =
      ms.family == Family::Lti || (ms.matrix_dep == MatrixDep::Affine &&
                                   ms.family != Family::Nonlinear);
  if ((!drop_x.empty() || !drop_z.empty()) && can_reduce) {
    ReducedModel rm = remove_states(ms, theta2, w02, drop_x, drop_z);
    out.reduced = rm.ms;
    theta2 = rm.theta;
    w02 = rm.w0;
  }

  TrainConfig cfg2 = cfg;
  cfg2.reg.tau_group = 0.0;
  cfg2.reg.groups.clear();
  cfg2.reg.group_weights.clear();
  cfg2.adam.iters = 0;
  VectorXd tw2(theta2.size() + w02.size());
  tw2 << theta2, w02;
  out.final_run = train(out.reduced, train_data, test_data, cfg2, &tw2);
  return out;
}

}  // namespace pemss
