// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "pemss/benchmarks.hpp"
#include "pemss/model.hpp"

using namespace pemss;

namespace {

Dataset make_record(Rng& rng, int nu, int ny, int np, Index n) {
  Dataset d;
  d.u.resize(nu, n);
  d.y.resize(ny, n);
  for (Index i = 0; i < d.u.size(); ++i) d.u.data()[i] = rng.normal();
  for (Index i = 0; i < d.y.size(); ++i) d.y.data()[i] = rng.normal();
  if (np > 0) {
    d.p.resize(np, n);
    for (Index i = 0; i < d.p.size(); ++i) d.p.data()[i] = rng.normal(0, 0.3);
  }
  return d;
}

ModelStructure scalar_noise_lti() {
  ModelStructure ms;
  ms.family = Family::Lti;
  ms.nx = 1;
  ms.nz = 1;
  return ms;
}

// theta of the 1-state combined model with the plant zeroed and the given
// scalar inverse-noise matrices.
VectorXd scalar_noise_theta(const ModelStructure& ms, double az, double bz,
                            double cz) {
  LtiParams lp;
  lp.ax = MatrixXd::Zero(1, 1);
  lp.bx = MatrixXd::Zero(1, 1);
  lp.cx = MatrixXd::Zero(1, 1);
  lp.dx = MatrixXd::Zero(1, 1);
  lp.az = MatrixXd::Constant(1, 1, az);
  lp.bz = MatrixXd::Constant(1, 1, bz);
  lp.cz = MatrixXd::Constant(1, 1, cz);
  return pack_lti(ms, lp);
}

}  // namespace

TEST_SUITE("models") {

TEST_CASE("plant step with identity dynamics") {
  ModelStructure ms;
  ms.family = Family::Lti;
  ms.nx = 2;
  LtiParams lp;
  lp.ax = MatrixXd::Identity(2, 2);
  lp.bx = MatrixXd::Zero(2, 1);
  lp.cx = (MatrixXd(1, 2) << 0.0, 1.0).finished();
  lp.dx = MatrixXd::Zero(1, 1);
  const VectorXd theta = pack_lti(ms, lp);
  VectorXd x(2), u(1), xn, y0;
  x << 3.0, 4.0;
  u << 1.0;
  plant_step(ms, theta, x, u, nullptr, xn, y0);
  CHECK((xn - x).norm() == 0.0);
  CHECK(y0(0) == 4.0);
}

TEST_CASE("plant step of the linearized disk from rest") {
  DiskParams dp;
  NoiseSpec ns;
  ns.kind = NoiseKind::White;
  const TrueModel tm = true_lti_model(dp, ns);
  VectorXd x = VectorXd::Zero(2), u(1), xn, y0;
  u << 1.0;
  plant_step(tm.ms, tm.theta, x, u, nullptr, xn, y0);
  CHECK(xn(0) == doctest::Approx(0.38125).epsilon(1e-15));  // ts*km/tau
  CHECK(xn(1) == 0.0);
  CHECK(y0(0) == 0.0);
}

TEST_CASE("affine scheduled state matrix at a fixed operating point") {
  ModelStructure ms;
  ms.family = Family::LpvExternal;
  ms.nx = 2;
  ms.nz = 0;
  ms.np = 1;
  const Layout L = layout(ms);
  VectorXd theta = VectorXd::Zero(L.n_theta);
  MatrixXd m0 = MatrixXd::Zero(3, 3), m1 = MatrixXd::Zero(3, 3);
  m0.topLeftCorner(2, 2) = 0.5 * MatrixXd::Identity(2, 2);
  m1.topLeftCorner(2, 2) = 0.1 * MatrixXd::Identity(2, 2);
  set_lpv_mx_coeff(ms, theta, 0, m0);
  set_lpv_mx_coeff(ms, theta, 1, m1);
  VectorXd x(2), u(1), p(1), xn, y0;
  x << 1.0, 1.0;
  u << 0.0;
  p << 2.0;
  plant_step(ms, theta, x, u, &p, xn, y0);
  CHECK(xn(0) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(xn(1) == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("externally scheduled step requires the scheduling signal") {
  ModelStructure ms;
  ms.family = Family::LpvExternal;
  ms.nx = 1;
  ms.nz = 1;
  ms.np = 1;
  const Layout L = layout(ms);
  const VectorXd theta = VectorXd::Zero(L.n_theta);
  VectorXd x(1), u(1), z(1), v(1), xn, y0, zn, e;
  x << 0.0;
  u << 0.0;
  z << 0.0;
  v << 0.0;
  CHECK_THROWS_AS(plant_step(ms, theta, x, u, nullptr, xn, y0),
                  MissingScheduling);
  CHECK_THROWS_AS(
      noise_inverse_step(ms, theta, z, x, u, v, nullptr, zn, e),
      MissingScheduling);
}

TEST_CASE("scalar inverse noise step") {
  const ModelStructure ms = scalar_noise_lti();
  const VectorXd theta = scalar_noise_theta(ms, 0.5, 1.0, 0.3);
  VectorXd z(1), x(1), u(1), v(1), zn, e;
  z << 0.0;
  x << 0.0;
  u << 0.0;
  v << 1.0;
  noise_inverse_step(ms, theta, z, x, u, v, nullptr, zn, e);
  CHECK(zn(0) == 1.0);
  CHECK(e(0) == 1.0);
}

TEST_CASE("noise steps collapse to identity without noise states") {
  ModelStructure ms;
  ms.family = Family::Lti;
  ms.nx = 1;
  ms.nz = 0;
  const VectorXd theta = VectorXd::Zero(layout(ms).n_theta);
  VectorXd z(0), x(1), u(1), v(1), zn, out;
  x << 0.0;
  u << 0.0;
  v << 0.7;
  noise_inverse_step(ms, theta, z, x, u, v, nullptr, zn, out);
  CHECK(out(0) == 0.7);
  CHECK(zn.size() == 0);
  noise_forward_step(ms, theta, z, x, u, v, nullptr, zn, out);
  CHECK(out(0) == 0.7);
}

TEST_CASE("forward noise recursion and its inverse") {
  const ModelStructure ms = scalar_noise_lti();
  const VectorXd theta = scalar_noise_theta(ms, 0.5, 1.0, 0.3);
  const VectorXd x = VectorXd::Zero(1), u = VectorXd::Zero(1);
  VectorXd e_in(3);
  e_in << 1.0, 0.0, 0.0;
  VectorXd expect(3);
  expect << 1.0, -0.3, -0.06;
  VectorXd z = VectorXd::Zero(1), zn, vk, v_seq(3);
  for (int k = 0; k < 3; ++k) {
    noise_forward_step(ms, theta, z, x, u, e_in.segment(k, 1), nullptr, zn,
                       vk);
    v_seq(k) = vk(0);
    z = zn;
  }
  CHECK((v_seq - expect).cwiseAbs().maxCoeff() <= 1e-15);

  z = VectorXd::Zero(1);
  VectorXd ek;
  for (int k = 0; k < 3; ++k) {
    noise_inverse_step(ms, theta, z, x, u, v_seq.segment(k, 1), nullptr, zn,
                       ek);
    CHECK(std::abs(ek(0) - e_in(k)) <= 1e-15);
    z = zn;
  }
}

TEST_CASE("zero innovations stay zero through the forward model") {
  const ModelStructure ms = scalar_noise_lti();
  const VectorXd theta = scalar_noise_theta(ms, 0.5, 1.0, 0.3);
  const VectorXd x = VectorXd::Zero(1), u = VectorXd::Zero(1),
                 e = VectorXd::Zero(1);
  VectorXd z = VectorXd::Zero(1), zn, v;
  for (int k = 0; k < 10; ++k) {
    noise_forward_step(ms, theta, z, x, u, e, nullptr, zn, v);
    CHECK(v(0) == 0.0);
    z = zn;
  }
}

TEST_CASE("network noise maps vanish at zero noise state") {
  ModelStructure ms;
  ms.family = Family::Nonlinear;
  ms.nx = 2;
  ms.nz = 1;
  ms.fx = {{3, 6, 2}, {Activation::Tanh}, false};
  ms.gx = {{3, 6, 1}, {Activation::Swish}, false};
  ms.fz = {{5, 6, 1}, {Activation::Tanh}, true};
  ms.gz = {{4, 6, 1}, {Activation::Sigmoid}, true};
  const Layout L = layout(ms);
  Rng rng(9);
  VectorXd theta(L.n_theta);
  for (Index i = 0; i < theta.size(); ++i) theta[i] = rng.normal(0.0, 0.5);
  VectorXd z = VectorXd::Zero(1), x(2), u(1), v = VectorXd::Zero(1), zn, e;
  x << 0.4, -1.1;
  u << 0.8;
  noise_inverse_step(ms, theta, z, x, u, v, nullptr, zn, e);
  CHECK(zn(0) == 0.0);
  CHECK(e(0) == 0.0);
}

TEST_CASE("separation wrapper pins the constraint for any parameters") {
  Rng rng(13);
  FfnShape fshape{{4, 8, 1}, {Activation::Tanh}, false};
  FfnShape gshape{{3, 8, 1}, {Activation::Sigmoid}, false};
  VectorXd fp(fshape.n_params()), gp(gshape.n_params());
  for (Index i = 0; i < fp.size(); ++i) fp[i] = rng.normal();
  for (Index i = 0; i < gp.size(); ++i) gp[i] = rng.normal();
  // sigmoid hidden layer: the raw nets are nonzero at the origin
  auto f_raw = [&](const VectorXd& z, const VectorXd& x, const VectorXd& u,
                   const VectorXd& v) {
    VectorXd in(4), out;
    in << z, x, u, v;
    FfnScratch ws;
    ffn_forward({&fshape, fp.data()}, in, out, ws);
    return out;
  };
  auto g_raw = [&](const VectorXd& z, const VectorXd& x, const VectorXd& u) {
    VectorXd in(3), out;
    in << z, x, u;
    FfnScratch ws;
    ffn_forward({&gshape, gp.data()}, in, out, ws);
    return out;
  };
  const SeparatedNoiseMaps m = enforce_separation(f_raw, g_raw);
  const VectorXd z0 = VectorXd::Zero(1), v0 = VectorXd::Zero(1);
  for (int t = 0; t < 20; ++t) {
    VectorXd x(1), u(1);
    x << rng.normal();
    u << rng.normal();
    CHECK(g_raw(z0, x, u)(0) != 0.0);
    CHECK(m.g_z(z0, x, u)(0) == 0.0);
    CHECK(m.f_z(z0, x, u, v0)(0) == 0.0);
    VectorXd z(1), v(1);
    z << rng.normal();
    v << rng.normal();
    CHECK(m.g_z(z, x, u)(0) ==
          doctest::Approx(g_raw(z, x, u)(0) - g_raw(z0, x, u)(0)).epsilon(0));
    CHECK(m.f_z(z, x, u, v)(0) != 0.0);
  }
}

TEST_CASE("scheduling map with zero weights is zero") {
  ModelStructure ms;
  ms.family = Family::LpvSelf;
  ms.nx = 2;
  ms.nz = 0;
  ms.np = 1;
  ms.psi = {{3, 6, 1}, {Activation::Swish}, false};
  const VectorXd theta = VectorXd::Zero(layout(ms).n_theta);
  VectorXd x(2), u(1);
  x << 1.0, -2.0;
  u << 0.5;
  CHECK(scheduling_map(ms, theta, x, u)(0) == 0.0);
}

TEST_CASE("predictor equals simulator without a noise model") {
  ModelStructure ms;
  ms.family = Family::Lti;
  ms.nx = 2;
  ms.nz = 0;
  Rng rng(21);
  Dataset d = make_record(rng, 1, 1, 0, 60);
  const Layout L = layout(ms);
  VectorXd tw(L.total());
  for (Index i = 0; i < tw.size(); ++i) tw[i] = rng.normal(0.0, 0.3);
  const VectorXd theta = tw.head(L.n_theta);
  const VectorXd w0 = tw.tail(L.n_w);
  const RolloutResult pr = predictor_rollout(ms, theta, w0, d);
  const RolloutResult sr = simulation_rollout(ms, theta, w0, d);
  CHECK((pr.y_pred - sr.y_sim).norm() == 0.0);
}

TEST_CASE("true model inverts its own record back to the innovations") {
  GenSpec gs;
  gs.seed = 3;
  gs.n = 500;
  const Generated g = gen_disk(DiskParams{}, gs);
  const TrueModel tm = true_lti_model(DiskParams{}, gs.noise);
  const RolloutResult pr = predictor_rollout(tm.ms, tm.theta, tm.w0, g.data);
  const Index burn = 100;
  const double err = (pr.e_pred - g.truth.e)
                         .rightCols(gs.n - burn)
                         .cwiseAbs()
                         .maxCoeff();
  CHECK(err <= 1e-8);
}

TEST_CASE("zero record keeps a zero-bias network model at the origin") {
  ModelStructure ms;
  ms.family = Family::Nonlinear;
  ms.nx = 2;
  ms.nz = 1;
  ms.fx = {{3, 6, 2}, {Activation::Tanh}, false};
  ms.gx = {{3, 6, 1}, {Activation::Swish}, false};
  ms.fz = {{5, 6, 1}, {Activation::Tanh}, false};
  ms.gz = {{4, 6, 1}, {Activation::Swish}, false};
  const Layout L = layout(ms);
  VectorXd theta(L.n_theta);
  Rng rng(17);
  init_ffn(ms.fx, theta.data() + L.fx, rng);
  init_ffn(ms.gx, theta.data() + L.gx, rng);
  init_ffn(ms.fz, theta.data() + L.fz, rng);
  init_ffn(ms.gz, theta.data() + L.gz, rng);
  Dataset d;
  d.u = MatrixXd::Zero(1, 40);
  d.y = MatrixXd::Zero(1, 40);
  const RolloutResult pr =
      predictor_rollout(ms, theta, VectorXd::Zero(3), d);
  VectorXd x0 = VectorXd::Zero(2), u0 = VectorXd::Zero(1), xn, g00;
  plant_step(ms, theta, x0, u0, nullptr, xn, g00);
  CHECK(pr.x.cwiseAbs().maxCoeff() == 0.0);
  CHECK(pr.z.cwiseAbs().maxCoeff() == 0.0);
  for (Index k = 0; k < 40; ++k) CHECK(pr.y_pred(0, k) == g00(0));
}

TEST_CASE("simulation shifts the input through a delay chain") {
  ModelStructure ms;
  ms.family = Family::Lti;
  ms.nx = 2;
  ms.nu = 2;
  ms.ny = 2;
  LtiParams lp;
  lp.ax = MatrixXd::Zero(2, 2);
  lp.bx = MatrixXd::Identity(2, 2);
  lp.cx = MatrixXd::Identity(2, 2);
  lp.dx = MatrixXd::Zero(2, 2);
  const VectorXd theta = pack_lti(ms, lp);
  Rng rng(2);
  Dataset d = make_record(rng, 2, 2, 0, 20);
  VectorXd x0(2);
  x0 << 0.3, -0.4;
  const RolloutResult sr = simulation_rollout(ms, theta, x0, d);
  CHECK((sr.y_sim.col(0) - x0).norm() == 0.0);
  for (Index k = 1; k < 20; ++k)
    CHECK((sr.y_sim.col(k) - d.u.col(k - 1)).norm() == 0.0);
}

TEST_CASE("simulation ignores the noise parameters") {
  ModelStructure ms;
  ms.family = Family::Lti;
  ms.nx = 2;
  ms.nz = 2;
  Rng rng(29);
  Dataset d = make_record(rng, 1, 1, 0, 50);
  const Layout L = layout(ms);
  VectorXd theta(L.n_theta);
  for (Index i = 0; i < theta.size(); ++i) theta[i] = rng.normal(0.0, 0.3);
  VectorXd theta2 = theta;
  theta2.segment(L.az, L.n_theta - L.az).setConstant(7.0);
  VectorXd x0(2);
  x0 << 0.1, -0.2;
  const RolloutResult a = simulation_rollout(ms, theta, x0, d);
  const RolloutResult b = simulation_rollout(ms, theta2, x0, d);
  CHECK((a.y_sim - b.y_sim).norm() == 0.0);
}

TEST_CASE("free response of the linearized disk decays") {
  DiskParams dp;
  NoiseSpec ns;
  ns.kind = NoiseKind::White;
  const TrueModel tm = true_lti_model(dp, ns);
  Dataset d;
  d.u = MatrixXd::Zero(1, 2000);
  d.y = MatrixXd::Zero(1, 2000);
  VectorXd x0(2);
  x0 << 0.0, 0.1;
  const RolloutResult sr = simulation_rollout(tm.ms, tm.theta, x0, d);
  int sign_changes = 0;
  for (Index k = 1; k < 500; ++k)
    if (sr.y_sim(0, k) * sr.y_sim(0, k - 1) < 0.0) ++sign_changes;
  CHECK(sign_changes > 3);  // oscillatory
  CHECK(sr.y_sim.rightCols(100).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("separating a linear innovation system drops the x dependence") {
  MatrixXd A(2, 2), B(2, 1), K(2, 1), C(1, 2);
  A << 0.6, -0.2, 0.1, 0.7;
  B << 1.0, 0.5;
  K << 0.3, -0.4;
  C << 1.0, 2.0;
  StateMap f_w = [&](const VectorXd& w, const VectorXd& u, const VectorXd& e) {
    return VectorXd(A * w + B * u + K * e);
  };
  OutputMap g_w = [&](const VectorXd& w, const VectorXd&) {
    return VectorXd(C * w);
  };
  VectorXd w0(2);
  w0 << 0.2, -0.1;
  const SeparatedSystem s = separate_system(f_w, g_w, w0, 1);
  CHECK((s.x0 - w0).norm() == 0.0);
  CHECK(s.z0.isZero(0.0));
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    VectorXd z(2), xa(2), xb(2), u(1), e(1);
    for (int i = 0; i < 2; ++i) {
      z[i] = rng.normal();
      xa[i] = rng.normal();
      xb[i] = rng.normal();
    }
    u << rng.normal();
    e << rng.normal();
    const VectorXd fa = s.f_z(z, xa, u, e);
    const VectorXd fb = s.f_z(z, xb, u, e);
    CHECK((fa - fb).norm() <= 1e-12);
    CHECK((fa - (A * z + K * e)).norm() <= 1e-12);
    CHECK((s.g_z(z, xa, u) - C * z).norm() <= 1e-12);
  }
}

TEST_CASE("separated trajectories reproduce the joint system") {
  Rng rng(41);
  const int nw = 3, nu = 1, ny = 1, ne = ny;
  FfnShape fshape{{nw + nu + ne, 8, nw}, {Activation::Tanh}, false};
  FfnShape gshape{{nw + nu, 8, ny}, {Activation::Tanh}, false};
  VectorXd fp(fshape.n_params()), gp(gshape.n_params());
  for (Index i = 0; i < fp.size(); ++i) fp[i] = rng.normal(0.0, 0.4);
  for (Index i = 0; i < gp.size(); ++i) gp[i] = rng.normal(0.0, 0.4);
  StateMap f_w = [&](const VectorXd& w, const VectorXd& u, const VectorXd& e) {
    VectorXd in(nw + nu + ne), out;
    in << w, u, e;
    FfnScratch ws;
    ffn_forward({&fshape, fp.data()}, in, out, ws);
    return out;
  };
  OutputMap g_w = [&](const VectorXd& w, const VectorXd& u) {
    VectorXd in(nw + nu), out;
    in << w, u;
    FfnScratch ws;
    ffn_forward({&gshape, gp.data()}, in, out, ws);
    return out;
  };
  VectorXd w0(nw);
  for (int i = 0; i < nw; ++i) w0[i] = rng.normal(0.0, 0.3);
  const SeparatedSystem s = separate_system(f_w, g_w, w0, ne);

  VectorXd w = w0, x = s.x0, z = s.z0;
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    VectorXd u(1), e(1);
    u << rng.normal();
    e << rng.normal(0.0, 0.3);
    const VectorXd y_joint = g_w(w, u) + e;
    const VectorXd y_split = s.g_x(x, u) + s.g_z(z, x, u) + e;
    worst = std::max(worst, (y_joint - y_split).cwiseAbs().maxCoeff());
    w = f_w(w, u, e);
    const VectorXd xn = s.f_x(x, u);
    z = s.f_z(z, x, u, e);
    x = xn;
    worst = std::max(worst, (w - (x + z)).cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("noise channel round-trip over a long record") {
  const ModelStructure ms = scalar_noise_lti();
  const VectorXd theta = scalar_noise_theta(ms, 0.8, 0.5, -0.6);
  Rng rng(55);
  const Index n = 1000;
  MatrixXd e_in(1, n), v_mid(1, n), e_back(1, n);
  for (Index k = 0; k < n; ++k) e_in(0, k) = rng.normal();
  const VectorXd x = VectorXd::Zero(1), u = VectorXd::Zero(1);
  VectorXd z0(1);
  z0 << 0.3;

  VectorXd z = z0, zn, out;
  for (Index k = 0; k < n; ++k) {
    noise_forward_step(ms, theta, z, x, u, e_in.col(k), nullptr, zn, out);
    v_mid.col(k) = out;
    z = zn;
  }
  z = z0;
  for (Index k = 0; k < n; ++k) {
    noise_inverse_step(ms, theta, z, x, u, v_mid.col(k), nullptr, zn, out);
    e_back.col(k) = out;
    z = zn;
  }
  CHECK((e_back - e_in).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("predictor holds the noise state at zero on residual-free data") {
  ModelStructure ms;
  ms.family = Family::Lti;
  ms.nx = 2;
  ms.nz = 1;
  Rng rng(37);
  const Layout L = layout(ms);
  VectorXd theta(L.n_theta), w0(L.n_w);
  for (Index i = 0; i < theta.size(); ++i) theta[i] = rng.normal(0.0, 0.3);
  for (Index i = 0; i < w0.size(); ++i) w0[i] = rng.normal(0.0, 0.3);
  Dataset d = make_record(rng, 1, 1, 0, 120);
  // the x path ignores y, so v from a scratch run is -g_x along that path
  d.y = -predictor_rollout(ms, theta, w0, d).v;
  const RolloutResult pr = predictor_rollout(ms, theta, w0, d);
  CHECK(pr.v.cwiseAbs().maxCoeff() == 0.0);
  CHECK(pr.z.cwiseAbs().maxCoeff() == 0.0);
  CHECK((pr.y_pred - d.y).cwiseAbs().maxCoeff() == 0.0);
  CHECK(pr.e_pred.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("absorbing the scheduling net output layer into the matrices") {
  Rng rng(61);
  ModelStructure a;
  a.family = Family::LpvSelf;
  a.nx = 2;
  a.nz = 0;
  a.np = 2;
  a.psi = {{3, 4, 2}, {Activation::Tanh}, false};
  const Layout La = layout(a);
  VectorXd ta = VectorXd::Zero(La.n_theta);
  std::vector<MatrixXd> mx(3);
  for (int i = 0; i < 3; ++i) {
    const double scale = i == 0 ? 0.15 : 0.05;
    mx[i].setZero(3, 3);
    for (Index r = 0; r < 3; ++r)
      for (Index c = 0; c < 3; ++c) mx[i](r, c) = rng.normal(0.0, scale);
    set_lpv_mx_coeff(a, ta, i, mx[i]);
  }
  init_ffn(a.psi, ta.data() + La.psi, rng);
  // give the output layer a nonzero bias so absorption is exercised fully
  VectorXd b2(2);
  b2 << 0.3, -0.2;
  ta.segment(La.psi + ffn_param_offset_bias(a.psi, 2), 2) = b2;
  const Eigen::Map<const MatrixXd> w2(
      ta.data() + La.psi + ffn_param_offset_weight(a.psi, 2), 2, 4);

  // same map with the features exposed as the scheduling signal
  ModelStructure b;
  b.family = Family::LpvSelf;
  b.nx = 2;
  b.nz = 0;
  b.np = 4;
  b.psi = {{3, 4, 4}, {Activation::Tanh}, false};
  const Layout Lb = layout(b);
  VectorXd tb = VectorXd::Zero(Lb.n_theta);
  set_lpv_mx_coeff(b, tb, 0, mx[0] + b2(0) * mx[1] + b2(1) * mx[2]);
  for (int j = 0; j < 4; ++j)
    set_lpv_mx_coeff(b, tb, j + 1, w2(0, j) * mx[1] + w2(1, j) * mx[2]);
  const Index nl1 = ffn_param_offset_bias(a.psi, 1) + 4;
  tb.segment(Lb.psi, nl1) = ta.segment(La.psi, nl1);
  Eigen::Map<MatrixXd>(tb.data() + Lb.psi + ffn_param_offset_weight(b.psi, 2),
                       4, 4) = MatrixXd::Identity(4, 4);

  Rng rd(7);
  Dataset d = make_record(rd, 1, 1, 0, 100);
  VectorXd x0(2);
  x0 << 0.1, -0.2;
  const RolloutResult ra = simulation_rollout(a, ta, x0, d);
  const RolloutResult rb = simulation_rollout(b, tb, x0, d);
  CHECK((ra.y_sim - rb.y_sim).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("linear network model reproduces the linear family rollout") {
  ModelStructure lti;
  lti.family = Family::Lti;
  lti.nx = 2;
  lti.nz = 1;
  LtiParams lp;
  lp.ax = (MatrixXd(2, 2) << 0.5, -0.3, 0.2, 0.4).finished();
  lp.bx = (MatrixXd(2, 1) << 1.0, 0.5).finished();
  lp.cx = (MatrixXd(1, 2) << 1.0, -1.0).finished();
  lp.dx = MatrixXd::Zero(1, 1);
  lp.az = MatrixXd::Constant(1, 1, 0.7);
  lp.bz = MatrixXd::Constant(1, 1, 0.4);
  lp.cz = MatrixXd::Constant(1, 1, -0.8);
  const VectorXd theta_lti = pack_lti(lti, lp);

  ModelStructure nl;
  nl.family = Family::Nonlinear;
  nl.nx = 2;
  nl.nz = 1;
  nl.fx = {{3, 2}, {}, false};
  nl.gx = {{3, 1}, {}, false};
  nl.fz = {{5, 1}, {}, false};
  nl.gz = {{4, 1}, {}, false};
  const Layout L = layout(nl);
  VectorXd theta_nl = VectorXd::Zero(L.n_theta);
  Eigen::Map<MatrixXd>(theta_nl.data() + L.fx, 2, 3) << lp.ax, lp.bx;
  Eigen::Map<MatrixXd>(theta_nl.data() + L.gx, 1, 3) << lp.cx, lp.dx;
  Eigen::Map<MatrixXd>(theta_nl.data() + L.fz, 1, 5) << lp.az, 0.0, 0.0, 0.0,
      lp.bz;
  Eigen::Map<MatrixXd>(theta_nl.data() + L.gz, 1, 4) << lp.cz, 0.0, 0.0, 0.0;

  Rng rng(77);
  Dataset d = make_record(rng, 1, 1, 0, 50);
  VectorXd w0(3);
  w0 << 0.1, -0.1, 0.2;
  const RolloutResult ra = predictor_rollout(lti, theta_lti, w0, d);
  const RolloutResult rb = predictor_rollout(nl, theta_nl, w0, d);
  CHECK((ra.y_pred - rb.y_pred).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((ra.e_pred - rb.e_pred).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("dropping states keeps the surviving blocks") {
  ModelStructure ms;
  ms.family = Family::Lti;
  ms.nx = 3;
  ms.nz = 1;
  Rng rng(83);
  const Layout L = layout(ms);
  VectorXd theta(L.n_theta), w0(L.n_w);
  for (Index i = 0; i < theta.size(); ++i) theta[i] = rng.normal();
  for (Index i = 0; i < w0.size(); ++i) w0[i] = rng.normal();
  const LtiParams lp = unpack_lti(ms, theta);
  const ReducedModel red = remove_states(ms, theta, w0, {1}, {});
  CHECK(red.ms.nx == 2);
  CHECK(red.ms.nz == 1);
  const LtiParams rp = unpack_lti(red.ms, red.theta);
  CHECK(rp.ax(0, 0) == lp.ax(0, 0));
  CHECK(rp.ax(0, 1) == lp.ax(0, 2));
  CHECK(rp.ax(1, 1) == lp.ax(2, 2));
  CHECK(rp.bx(1, 0) == lp.bx(2, 0));
  CHECK(rp.cx(0, 1) == lp.cx(0, 2));
  CHECK(rp.az(0, 0) == lp.az(0, 0));
  CHECK(red.w0(0) == w0(0));
  CHECK(red.w0(1) == w0(2));
  CHECK(red.w0(2) == w0(3));
}

TEST_CASE("state groups cover their matrix rows and columns") {
  ModelStructure ms;
  ms.family = Family::Lti;
  ms.nx = 2;
  ms.nz = 1;
  LassoTargets t;
  const auto groups = lasso_groups(ms, t);
  REQUIRE(groups.size() == 3);  // x0, x1, z0
  CHECK(groups[0].name == "x0");
  CHECK(groups[1].name == "x1");
  CHECK(groups[2].name == "z0");
  const Layout L = layout(ms);
  // x0: row+col 0 of ax, row 0 of bx, col 0 of cx, w0 entry 0
  for (Index idx : {L.ax + 0, L.ax + 1, L.ax + 2, L.bx + 0, L.cx + 0, L.w0 + 0})
    CHECK(std::find(groups[0].idx.begin(), groups[0].idx.end(), idx) !=
          groups[0].idx.end());
  for (const auto& g : groups)
    for (Index idx : g.idx) CHECK(idx < L.total());
}

}  // TEST_SUITE
