// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "pemss/diff.hpp"
#include "pemss/model.hpp"

using namespace pemss;

namespace {

Dataset make_record(Rng& rng, int nu, int ny, Index n) {
  Dataset d;
  d.u.resize(nu, n);
  d.y.resize(ny, n);
  for (Index i = 0; i < d.u.size(); ++i) d.u.data()[i] = rng.normal();
  for (Index i = 0; i < d.y.size(); ++i) d.y.data()[i] = rng.normal();
  return d;
}

}  // namespace

TEST_SUITE("diff") {

TEST_CASE("value and gradient of a sum of squares") {
  ObjectiveHandle obj;
  obj.dim = 2;
  obj.value = [](const VectorXd& p) { return p.squaredNorm(); };
  obj.value_and_grad = [](const VectorXd& p, VectorXd& g) {
    g = 2.0 * p;
    return p.squaredNorm();
  };
  VectorXd p(2);
  p << 1.0, 2.0;
  auto [f, g] = eval_value_and_grad(obj, p);
  CHECK(f == 5.0);
  CHECK(g(0) == 2.0);
  CHECK(g(1) == 4.0);
}

TEST_CASE("constant objective has zero gradient") {
  ObjectiveHandle obj;
  obj.dim = 3;
  obj.value = [](const VectorXd&) { return 4.5; };
  obj.value_and_grad = [](const VectorXd&, VectorXd& g) {
    g.setZero();
    return 4.5;
  };
  auto [f, g] = eval_value_and_grad(obj, VectorXd::Ones(3));
  CHECK(f == 4.5);
  CHECK(g.isZero(0.0));
}

TEST_CASE("central differences on a cubic") {
  ObjectiveHandle obj;
  obj.dim = 1;
  obj.value = [](const VectorXd& p) { return p(0) * p(0) * p(0); };
  VectorXd p(1);
  p << 2.0;
  const VectorXd fd = finite_diff_grad(obj, p, 1e-5);
  CHECK(fd(0) == doctest::Approx(12.0).epsilon(1e-6));
}

TEST_CASE("central differences are symmetric at a kink") {
  ObjectiveHandle obj;
  obj.dim = 1;
  obj.value = [](const VectorXd& p) { return std::abs(p(0)); };
  const VectorXd fd = finite_diff_grad(obj, VectorXd::Zero(1), 1e-6);
  CHECK(fd(0) == 0.0);
}

TEST_CASE("prediction loss gradient matches finite differences") {
  ModelStructure ms;
  ms.family = Family::Lti;
  ms.nx = 2;
  ms.nz = 1;
  Rng rng(19);
  Dataset d = make_record(rng, 1, 1, 50);
  const Layout L = layout(ms);
  VectorXd tw(L.total());
  for (Index i = 0; i < tw.size(); ++i) tw[i] = rng.normal(0.0, 0.2);
  VectorXd g;
  const double f = pem_value_grad(ms, tw, d, g);
  CHECK(std::isfinite(f));
  ObjectiveHandle obj;
  obj.dim = L.total();
  obj.value = [&](const VectorXd& p) { return pem_value(ms, p, d); };
  const VectorXd fd = finite_diff_grad(obj, tw);
  for (Index i = 0; i < g.size(); ++i) {
    const double rel = std::abs(g[i] - fd[i]) /
                       std::max(1e-8, std::max(std::abs(g[i]), std::abs(fd[i])));
    CHECK(rel <= 1e-6);
  }
}

TEST_CASE("parameter count of the linear combined structure") {
  ModelStructure ms;
  ms.family = Family::Lti;
  ms.nx = 2;
  ms.nz = 1;
  const Layout L = layout(ms);
  CHECK(L.n_theta == 12);  // (4+2) + (2+1) + (1+1) + 1
  CHECK(L.n_w == 3);
  CHECK(L.total() == 15);
}

TEST_CASE("output-error structure drops the noise groups") {
  ModelStructure ms;
  ms.family = Family::Lti;
  ms.nx = 2;
  ms.nz = 0;
  const Layout L = layout(ms);
  CHECK(L.n_theta == 9);
  const ParamVector pv =
      make_param_vector(ms, VectorXd::Zero(9), VectorXd::Zero(2));
  CHECK(!pv.has_group("theta_z"));
  CHECK(!pv.has_group("theta_e"));
  CHECK(pv.has_group("w0"));
}

TEST_CASE("structured pack and unpack round-trip") {
  ModelStructure ms;
  ms.family = Family::Lti;
  ms.nx = 3;
  ms.nz = 2;
  ms.nu = 2;
  ms.ny = 2;
  Rng rng(4);
  const Layout L = layout(ms);
  VectorXd theta(L.n_theta);
  for (Index i = 0; i < theta.size(); ++i) theta[i] = rng.normal();
  const LtiParams lp = unpack_lti(ms, theta);
  CHECK((pack_lti(ms, lp) - theta).norm() == 0.0);
}

TEST_CASE("group map covers the vector in order") {
  ModelStructure ms;
  ms.family = Family::Lti;
  ms.nx = 2;
  ms.nz = 1;
  const ParamVector pv =
      make_param_vector(ms, VectorXd::Zero(12), VectorXd::Zero(3));
  Index at = 0;
  for (const auto& g : pv.groups) {
    CHECK(g.lo == at);
    at = g.hi;
  }
  CHECK(at == pv.size());
}

TEST_CASE("gradient of an input gain is zero when the input is silent") {
  ModelStructure ms;
  ms.family = Family::Lti;
  ms.nx = 2;
  ms.nz = 1;
  Rng rng(23);
  Dataset d = make_record(rng, 1, 1, 30);
  d.u.setZero();
  const Layout L = layout(ms);
  VectorXd tw(L.total());
  for (Index i = 0; i < tw.size(); ++i) tw[i] = rng.normal(0.0, 0.2);
  VectorXd g;
  pem_value_grad(ms, tw, d, g);
  CHECK(g.segment(L.bx, ms.nx).isZero(0.0));  // bx multiplies u only
  CHECK(g.segment(L.dx, 1).isZero(0.0));
}

TEST_CASE("objective sum adds values and gradients") {
  ObjectiveHandle a, b;
  a.dim = b.dim = 2;
  a.value = [](const VectorXd& p) { return p.squaredNorm(); };
  a.value_and_grad = [](const VectorXd& p, VectorXd& g) {
    g = 2.0 * p;
    return p.squaredNorm();
  };
  b.value = [](const VectorXd& p) { return p.sum(); };
  b.value_and_grad = [](const VectorXd& p, VectorXd& g) {
    g.setOnes();
    return p.sum();
  };
  const ObjectiveHandle c = add_objectives(a, b);
  VectorXd p(2);
  p << 1.0, 2.0;
  auto [f, g] = eval_value_and_grad(c, p);
  CHECK(f == doctest::Approx(8.0).epsilon(0));
  CHECK(g(0) == doctest::Approx(3.0).epsilon(0));
  CHECK(g(1) == doctest::Approx(5.0).epsilon(0));
}

TEST_CASE("evaluation is deterministic") {
  ModelStructure ms;
  ms.family = Family::Lti;
  ms.nx = 2;
  ms.nz = 1;
  Rng rng(31);
  Dataset d = make_record(rng, 1, 1, 40);
  const Layout L = layout(ms);
  VectorXd tw(L.total());
  for (Index i = 0; i < tw.size(); ++i) tw[i] = rng.normal(0.0, 0.2);
  VectorXd g1, g2;
  const double f1 = pem_value_grad(ms, tw, d, g1);
  const double f2 = pem_value_grad(ms, tw, d, g2);
  CHECK(f1 == f2);
  CHECK((g1 - g2).norm() == 0.0);
}

}  // TEST_SUITE
