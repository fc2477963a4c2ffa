// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "pemss/benchmarks.hpp"
#include "pemss/metrics.hpp"

namespace pemss {

namespace {

// substream tags of a record seed
constexpr std::uint64_t kTagInput = 0;
constexpr std::uint64_t kTagInnovation = 1;
constexpr std::uint64_t kTagScheduling = 2;
constexpr std::uint64_t kTagTestRecord = 1000;

double sinc(double a) { return a == 0.0 ? 1.0 : std::sin(a) / a; }

}  // namespace

std::string disk_variant_name(DiskVariant v) {
  switch (v) {
    case DiskVariant::Lti:
      return "lti";
    case DiskVariant::LpvExternal:
      return "lpv_external";
    case DiskVariant::LpvSelf:
      return "lpv_self";
  }
  return "?";
}

DiskVariant disk_variant_from_name(const std::string& s) {
  if (s == "lti") return DiskVariant::Lti;
  if (s == "lpv_external") return DiskVariant::LpvExternal;
  if (s == "lpv_self") return DiskVariant::LpvSelf;
  throw SchemaError("unknown benchmark variant: " + s);
}

std::string noise_kind_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::White:
      return "white";
    case NoiseKind::BjLti:
      return "bj_lti";
    case NoiseKind::BjLpv:
      return "bj_lpv";
  }
  return "?";
}

NoiseKind noise_kind_from_name(const std::string& s) {
  if (s == "white") return NoiseKind::White;
  if (s == "bj_lti") return NoiseKind::BjLti;
  if (s == "bj_lpv") return NoiseKind::BjLpv;
  throw SchemaError("unknown noise kind: " + s);
}

MatrixXd DiskParams::a0() const {
  MatrixXd a(2, 2);
  a << a11(), 0.0, ts, 1.0;
  return a;
}

MatrixXd DiskParams::a1() const {
  MatrixXd a(2, 2);
  a << 0.0, a12(), 0.0, 0.0;
  return a;
}

MatrixXd DiskParams::b() const {
  MatrixXd m(2, 1);
  m << b1(), 0.0;
  return m;
}

MatrixXd DiskParams::c() const {
  MatrixXd m(1, 2);
  m << 0.0, 1.0;
  return m;
}

VectorXd random_binary_signal(Index n, Index hold, double lo, double hi,
                              Rng& rng) {
  require(n >= 1 && hold >= 1, "random_binary_signal: bad sizes");
  VectorXd out(n);
  double level = 0.0;
  for (Index k = 0; k < n; ++k) {
    if (k % hold == 0) level = rng.bernoulli() ? hi : lo;
    out[k] = level;
  }
  return out;
}

Generated gen_disk(const DiskParams& dp, const GenSpec& gs) {
  require(gs.n >= 1, "gen_disk: record length must be positive");
  require(gs.p_mag >= 0.0 && gs.p_mag <= 0.5, "gen_disk: p_mag outside [0, 0.5]");
  const Index n = gs.n;
  Rng ru(Rng::derive(gs.seed, kTagInput));
  Rng re(Rng::derive(gs.seed, kTagInnovation));
  Rng rp(Rng::derive(gs.seed, kTagScheduling));

  VectorXd u(n), e(n);
  for (Index k = 0; k < n; ++k) u[k] = ru.normal(0.0, gs.u_std);
  const double sd_e = std::sqrt(gs.noise.var_e);
  for (Index k = 0; k < n; ++k) e[k] = re.normal(0.0, sd_e);

  VectorXd p_ext;
  if (gs.variant == DiskVariant::LpvExternal)
    p_ext = random_binary_signal(n, gs.p_hold, 1.0 - 2.0 * gs.p_mag, 1.0, rp);

  const double a11 = dp.a11(), a12 = dp.a12(), b1 = dp.b1();
  Generated out;
  out.truth.y0.resize(1, n);
  out.truth.v.resize(1, n);
  out.truth.e.resize(1, n);
  VectorXd p_store(n);

  double x1 = 0.0, x2 = 0.0, z = 0.0;
  for (Index k = 0; k < n; ++k) {
    double p;
    switch (gs.variant) {
      case DiskVariant::Lti:
        p = 1.0;
        break;
      case DiskVariant::LpvExternal:
        p = p_ext[k];
        break;
      case DiskVariant::LpvSelf:
        p = sinc(x2);
        break;
    }
    p_store[k] = p;
    out.truth.y0(0, k) = x2;

    double v;
    switch (gs.noise.kind) {
      case NoiseKind::White:
        v = e[k];
        break;
      case NoiseKind::BjLti:
      case NoiseKind::BjLpv: {
        const double q = gs.noise.kind == NoiseKind::BjLti ? 1.0 : p;
        v = z + e[k];
        z = gs.noise.az_at(q) * z + gs.noise.bz_at(q) * e[k];
        break;
      }
    }
    out.truth.v(0, k) = v;
    out.truth.e(0, k) = e[k];

    const double x1n = a11 * x1 + a12 * p * x2 + b1 * u[k];
    const double x2n = dp.ts * x1 + x2;
    x1 = x1n;
    x2 = x2n;
  }

  out.data.u = u.transpose();
  out.data.y = out.truth.y0 + out.truth.v;
  out.data.ts = dp.ts;
  if (gs.store_p && gs.variant != DiskVariant::Lti)
    out.data.p = p_store.transpose();
  out.data.meta["seed"] = std::to_string(gs.seed);
  out.data.validate();
  return out;
}

BenchmarkPair gen_disk_pair(const DiskParams& dp, const GenSpec& gs,
                            Index n_test) {
  BenchmarkPair pair;
  pair.train = gen_disk(dp, gs);
  GenSpec ts = gs;
  ts.n = n_test;
  ts.seed = Rng::derive(gs.seed, kTagTestRecord);
  pair.test = gen_disk(dp, ts);
  return pair;
}

TrueModel true_lti_model(const DiskParams& dp, const NoiseSpec& ns) {
  TrueModel tm;
  tm.ms.family = Family::Lti;
  tm.ms.nx = 2;
  tm.ms.nu = 1;
  tm.ms.ny = 1;
  tm.ms.nz = ns.kind == NoiseKind::White ? 0 : 1;
  LtiParams lp;
  lp.ax = dp.a0() + dp.a1();
  lp.bx = dp.b();
  lp.cx = dp.c();
  lp.dx = MatrixXd::Zero(1, 1);
  if (tm.ms.nz > 0) {
    const double az = ns.az_at(1.0), bz = ns.bz_at(1.0);
    lp.az = MatrixXd::Constant(1, 1, az - bz);
    lp.bz = MatrixXd::Constant(1, 1, bz);
    lp.cz = MatrixXd::Constant(1, 1, -1.0);
  }
  tm.theta = pack_lti(tm.ms, lp);
  tm.w0 = VectorXd::Zero(tm.ms.nx + tm.ms.nz);
  return tm;
}

TrueModel true_lpv_external_model(const DiskParams& dp, const NoiseSpec& ns) {
  TrueModel tm;
  tm.ms.family = Family::LpvExternal;
  tm.ms.nx = 2;
  tm.ms.nu = 1;
  tm.ms.ny = 1;
  tm.ms.np = 1;
  tm.ms.nz = ns.kind == NoiseKind::White ? 0 : 1;
  tm.ms.noise_scheduled = ns.kind == NoiseKind::BjLpv;
  const Layout L = layout(tm.ms);
  tm.theta = VectorXd::Zero(L.n_theta);

  MatrixXd m0(3, 3), m1(3, 3);
  m0.setZero();
  m0.topLeftCorner(2, 2) = dp.a0();
  m0.topRightCorner(2, 1) = dp.b();
  m0.bottomLeftCorner(1, 2) = dp.c();
  m1.setZero();
  m1.topLeftCorner(2, 2) = dp.a1();
  set_lpv_mx_coeff(tm.ms, tm.theta, 0, m0);
  set_lpv_mx_coeff(tm.ms, tm.theta, 1, m1);

  if (tm.ms.nz > 0) {
    const auto one = [](double v) { return MatrixXd::Constant(1, 1, v); };
    if (tm.ms.noise_scheduled) {
      set_lpv_mz_coeff(tm.ms, tm.theta, 0, one(ns.az0 - ns.bz0), one(ns.bz0),
                       one(-1.0));
      set_lpv_mz_coeff(tm.ms, tm.theta, 1, one(ns.az1 - ns.bz1), one(ns.bz1),
                       one(0.0));
    } else {
      const double az = ns.az_at(1.0), bz = ns.bz_at(1.0);
      set_lpv_mz_coeff(tm.ms, tm.theta, 0, one(az - bz), one(bz), one(-1.0));
    }
  }
  tm.w0 = VectorXd::Zero(tm.ms.nx + tm.ms.nz);
  return tm;
}

TrueBaseline true_baseline(const Dataset& d, const Truth& t) {
  require(d.y.rows() == t.y0.rows() && d.y.cols() == t.y0.cols(),
          "true_baseline: record and truth shapes differ");
  TrueBaseline tb;
  tb.bfr_sim = bfr(d.y, t.y0);
  tb.bfr_pred = bfr(d.y, d.y - t.e);
  return tb;
}

}  // namespace pemss
