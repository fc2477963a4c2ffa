// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "pemss/nets.hpp"

using namespace pemss;

namespace {

VectorXd fwd(const FfnShape& s, const VectorXd& p, const VectorXd& x) {
  FfnScratch ws;
  VectorXd out;
  ffn_forward(FfnView{&s, p.data()}, x, out, ws);
  return out;
}

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_SUITE("nets") {

TEST_CASE("zero weights give zero output") {
  FfnShape s;
  s.widths = {3, 5, 2};
  s.acts = {Activation::Tanh};
  VectorXd p = VectorXd::Zero(s.n_params());
  VectorXd x(3);
  x << 1.0, -2.0, 0.5;
  CHECK(fwd(s, p, x).isZero(0.0));
}

TEST_CASE("single linear layer is an affine map") {
  FfnShape s;
  s.widths = {1, 1};
  VectorXd p(2);
  p << 2.0, 1.0;  // W = [[2]], b = [1]
  VectorXd x(1);
  x << 3.0;
  CHECK(fwd(s, p, x)(0) == 7.0);
}

TEST_CASE("swish net vanishes at the origin") {
  FfnShape s;
  s.widths = {1, 1, 1};
  s.acts = {Activation::Swish};
  VectorXd p = VectorXd::Zero(s.n_params());
  p[ffn_param_offset_weight(s, 1)] = 1.0;
  p[ffn_param_offset_weight(s, 2)] = 1.0;
  VectorXd x = VectorXd::Zero(1);
  CHECK(fwd(s, p, x)(0) == 0.0);
}

TEST_CASE("activation identities on a grid") {
  double prev_sig = -1.0, prev_tanh = -2.0;
  for (double x = -6.0; x <= 6.0; x += 0.25) {
    const double sig = activate(Activation::Sigmoid, x);
    CHECK(sig == doctest::Approx(sigmoid_ref(x)).epsilon(1e-15));
    CHECK(activate(Activation::Swish, x) ==
          doctest::Approx(x * sigmoid_ref(x)).epsilon(1e-15));
    CHECK(activate(Activation::Tanh, x) ==
          doctest::Approx(std::tanh(x)).epsilon(1e-15));
    CHECK(sig > prev_sig);
    CHECK(activate(Activation::Tanh, x) > prev_tanh);
    prev_sig = sig;
    prev_tanh = activate(Activation::Tanh, x);
  }
}

TEST_CASE("initialization zeroes every bias") {
  FfnShape s;
  s.widths = {4, 6, 3};
  s.acts = {Activation::Sigmoid};
  s.bypass = true;
  VectorXd p(s.n_params());
  Rng rng(11);
  init_ffn(s, p.data(), rng, InitScheme::NormalFanIn, 0.1);
  for (int l = 1; l <= s.n_layers(); ++l) {
    const Index at = ffn_param_offset_bias(s, l);
    CHECK(p.segment(at, s.widths[l]).isZero(0.0));
  }
}

TEST_CASE("xavier weight variance matches fan average") {
  FfnShape s;
  s.widths = {4, 4};
  const int reps = 6250;  // 6250 draws of a 4x4 layer = 1e5 weights
  Rng rng(5);
  double sum = 0.0, sumsq = 0.0;
  VectorXd p(s.n_params());
  for (int r = 0; r < reps; ++r) {
    init_ffn(s, p.data(), rng, InitScheme::Xavier);
    for (Index i = 0; i < 16; ++i) {
      sum += p[i];
      sumsq += p[i] * p[i];
    }
  }
  const double n = 16.0 * reps;
  const double var = sumsq / n - (sum / n) * (sum / n);
  CHECK(var == doctest::Approx(2.0 / 8.0).epsilon(0.05));
}

TEST_CASE("same seed reproduces the parameters") {
  FfnShape s;
  s.widths = {3, 6, 6, 1};
  s.acts = {Activation::Sigmoid, Activation::Swish};
  VectorXd a(s.n_params()), b(s.n_params());
  Rng r1(42), r2(42);
  init_ffn(s, a.data(), r1);
  init_ffn(s, b.data(), r2);
  CHECK(a == b);
}

TEST_CASE("bypass with zero nonlinear path is the bypass matrix") {
  FfnShape s;
  s.widths = {2, 4, 2};
  s.acts = {Activation::Tanh};
  s.bypass = true;
  VectorXd p = VectorXd::Zero(s.n_params());
  MatrixXd bmat(2, 2);
  bmat << 1.0, -2.0, 0.5, 3.0;
  Eigen::Map<MatrixXd>(p.data() + ffn_param_offset_bypass(s), 2, 2) = bmat;
  VectorXd x(2);
  x << 0.7, -1.3;
  CHECK((fwd(s, p, x) - bmat * x).norm() == 0.0);
}

TEST_CASE("forward pass is Lipschitz on sampled pairs") {
  FfnShape s;
  s.widths = {3, 8, 8, 2};
  s.acts = {Activation::Swish, Activation::Tanh};
  VectorXd p(s.n_params());
  Rng rng(7);
  init_ffn(s, p.data(), rng);
  double K = 1.0;
  for (int l = 1; l <= s.n_layers(); ++l)
    K *= FfnView{&s, p.data()}.weight(l).norm() + 1.0;
  for (int t = 0; t < 50; ++t) {
    VectorXd x1(3), x2(3);
    for (int i = 0; i < 3; ++i) {
      x1[i] = rng.normal();
      x2[i] = rng.normal();
    }
    CHECK((fwd(s, p, x1) - fwd(s, p, x2)).norm() <= K * (x1 - x2).norm());
  }
}

TEST_CASE("cached forward and plain forward agree") {
  FfnShape s;
  s.widths = {2, 5, 3};
  s.acts = {Activation::Sigmoid};
  s.bypass = true;
  VectorXd p(s.n_params());
  Rng rng(3);
  init_ffn(s, p.data(), rng);
  FfnCache cache;
  cache.resize(s, 4);
  FfnScratch ws;
  for (Index k = 0; k < 4; ++k) {
    VectorXd x(2);
    x << rng.normal(), rng.normal();
    VectorXd a, b;
    ffn_forward(FfnView{&s, p.data()}, x, a, ws);
    ffn_forward_cached(FfnView{&s, p.data()}, x, cache, k, b, ws);
    CHECK((a - b).norm() == 0.0);
  }
}

TEST_CASE("shape validation rejects inconsistent widths") {
  FfnShape s;
  s.widths = {2, 3, 1};
  s.acts = {};  // needs one activation for the hidden layer
  CHECK_THROWS_AS(s.validate(), DimensionMismatch);
}

}  // TEST_SUITE
