// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "pemss/common.hpp"

namespace pemss {

enum class Activation { Sigmoid, Swish, Tanh };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& s);

double activate(Activation a, double x);
double activate_deriv(Activation a, double pre, double post);

// Multilayer perceptron shape: widths [n_in, h_1, ..., h_{L-1}, n_out] with
// one activation per hidden layer, a linear output layer and an optional
// linear bypass from input to output. L == 1 is a plain affine map.
struct FfnShape {
  std::vector<int> widths;
  std::vector<Activation> acts;
  bool bypass = false;

  int n_layers() const { return static_cast<int>(widths.size()) - 1; }
  int n_in() const { return widths.front(); }
  int n_out() const { return widths.back(); }
  Index n_params() const;
  void validate() const;
};

// Read-only binding of an FfnShape onto a contiguous slice of a flat
// parameter vector. Layout: per layer l=1..L the column-major weight matrix
// then the bias; the bypass matrix, if any, last.
struct FfnView {
  const FfnShape* shape = nullptr;
  const double* p = nullptr;

  Eigen::Map<const MatrixXd> weight(int l) const;
  Eigen::Map<const VectorXd> bias(int l) const;
  Eigen::Map<const MatrixXd> bypass() const;
};

Index ffn_param_offset_weight(const FfnShape& s, int l);
Index ffn_param_offset_bias(const FfnShape& s, int l);
Index ffn_param_offset_bypass(const FfnShape& s);

// Per-step hidden activations of a net evaluated along a rollout; column k
// holds step k. `pre` are layer inputs to the activation, `post` its outputs.
struct FfnCache {
  std::vector<MatrixXd> pre;
  std::vector<MatrixXd> post;
  void resize(const FfnShape& s, Index n);
};

// Reused temporaries for forward/backward passes.
struct FfnScratch {
  VectorXd a;
  VectorXd b;
  void resize(const FfnShape& s);
};

void ffn_forward(const FfnView& v, const Eigen::Ref<const VectorXd>& x,
                 VectorXd& out, FfnScratch& ws);

void ffn_forward_cached(const FfnView& v, const Eigen::Ref<const VectorXd>& x,
                        FfnCache& cache, Index k, VectorXd& out,
                        FfnScratch& ws);

// Reverse pass for step k. Accumulates the parameter gradient into the slice
// `grad` (same layout as the view) and, when `gin` is non-null, the input
// gradient into *gin.
void ffn_backward(const FfnView& v, const Eigen::Ref<const VectorXd>& x,
                  const FfnCache& cache, Index k,
                  const Eigen::Ref<const VectorXd>& gout, double* grad,
                  VectorXd* gin, FfnScratch& ws);

enum class InitScheme { NormalFanIn, Xavier };

// Zero biases; weights zero-mean normal with std gain/sqrt(fan_in)
// (NormalFanIn) or gain*sqrt(2/(fan_in+fan_out)) (Xavier). Draw order is the
// parameter layout order, so a seed fixes the parameters exactly.
void init_ffn(const FfnShape& s, double* p, Rng& rng,
              InitScheme scheme = InitScheme::NormalFanIn, double gain = 1.0);

}  // namespace pemss
