// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#include "pemss/nets.hpp"

namespace pemss {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Sigmoid:
      return "sigmoid";
    case Activation::Swish:
      return "swish";
    case Activation::Tanh:
      return "tanh";
  }
  return "?";
}

Activation activation_from_name(const std::string& s) {
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "swish") return Activation::Swish;
  if (s == "tanh") return Activation::Tanh;
  throw SchemaError("unknown activation: " + s);
}

double activate(Activation a, double x) {
  switch (a) {
    case Activation::Sigmoid:
      return sigmoid(x);
    case Activation::Swish:
      return x * sigmoid(x);
    case Activation::Tanh:
      return std::tanh(x);
  }
  return 0.0;
}

double activate_deriv(Activation a, double pre, double post) {
  switch (a) {
    case Activation::Sigmoid:
      return post * (1.0 - post);
    case Activation::Swish: {
      const double s = sigmoid(pre);
      return s * (1.0 + pre * (1.0 - s));
    }
    case Activation::Tanh:
      return 1.0 - post * post;
  }
  return 0.0;
}

void FfnShape::validate() const {
  require(widths.size() >= 2, "ffn: needs at least input and output widths");
  for (int w : widths) require(w >= 1, "ffn: widths must be positive");
  require(acts.size() + 2 == widths.size(),
          "ffn: one activation per hidden layer required");
}

Index FfnShape::n_params() const {
  Index n = 0;
  for (int l = 1; l <= n_layers(); ++l)
    n += static_cast<Index>(widths[l]) * widths[l - 1] + widths[l];
  if (bypass) n += static_cast<Index>(n_out()) * n_in();
  return n;
}

Index ffn_param_offset_weight(const FfnShape& s, int l) {
  Index at = 0;
  for (int j = 1; j < l; ++j)
    at += static_cast<Index>(s.widths[j]) * s.widths[j - 1] + s.widths[j];
  return at;
}

Index ffn_param_offset_bias(const FfnShape& s, int l) {
  return ffn_param_offset_weight(s, l) +
         static_cast<Index>(s.widths[l]) * s.widths[l - 1];
}

Index ffn_param_offset_bypass(const FfnShape& s) {
  return ffn_param_offset_weight(s, s.n_layers() + 1);
}

Eigen::Map<const MatrixXd> FfnView::weight(int l) const {
  return {p + ffn_param_offset_weight(*shape, l), shape->widths[l],
          shape->widths[l - 1]};
}

Eigen::Map<const VectorXd> FfnView::bias(int l) const {
  return {p + ffn_param_offset_bias(*shape, l), shape->widths[l]};
}

Eigen::Map<const MatrixXd> FfnView::bypass() const {
  return {p + ffn_param_offset_bypass(*shape), shape->n_out(), shape->n_in()};
}

void FfnCache::resize(const FfnShape& s, Index n) {
  const int hidden = s.n_layers() - 1;
  pre.resize(hidden);
  post.resize(hidden);
  for (int l = 0; l < hidden; ++l) {
    pre[l].resize(s.widths[l + 1], n);
    post[l].resize(s.widths[l + 1], n);
  }
}

void FfnScratch::resize(const FfnShape& s) {
  int w = 0;
  for (int x : s.widths) w = std::max(w, x);
  if (a.size() < w) a.resize(w);
  if (b.size() < w) b.resize(w);
}

void ffn_forward(const FfnView& v, const Eigen::Ref<const VectorXd>& x,
                 VectorXd& out, FfnScratch& ws) {
  const FfnShape& s = *v.shape;
  const int L = s.n_layers();
  ws.resize(s);
  VectorXd* cur = &ws.a;
  VectorXd* nxt = &ws.b;
  cur->head(x.size()) = x;
  for (int l = 1; l < L; ++l) {
    const int w = s.widths[l];
    nxt->head(w).noalias() = v.weight(l) * cur->head(s.widths[l - 1]);
    nxt->head(w) += v.bias(l);
    for (int i = 0; i < w; ++i) (*nxt)[i] = activate(s.acts[l - 1], (*nxt)[i]);
    std::swap(cur, nxt);
  }
  out.resize(s.n_out());
  out.noalias() = v.weight(L) * cur->head(s.widths[L - 1]);
  out += v.bias(L);
  if (s.bypass) out.noalias() += v.bypass() * x;
}

void ffn_forward_cached(const FfnView& v, const Eigen::Ref<const VectorXd>& x,
                        FfnCache& cache, Index k, VectorXd& out,
                        FfnScratch& ws) {
  const FfnShape& s = *v.shape;
  const int L = s.n_layers();
  for (int l = 1; l < L; ++l) {
    const int w = s.widths[l];
    auto pre = cache.pre[l - 1].col(k);
    auto post = cache.post[l - 1].col(k);
    if (l == 1)
      pre.noalias() = v.weight(l) * x;
    else
      pre.noalias() = v.weight(l) * cache.post[l - 2].col(k);
    pre += v.bias(l);
    for (int i = 0; i < w; ++i) post[i] = activate(s.acts[l - 1], pre[i]);
  }
  out.resize(s.n_out());
  if (L == 1)
    out.noalias() = v.weight(L) * x;
  else
    out.noalias() = v.weight(L) * cache.post[L - 2].col(k);
  out += v.bias(L);
  if (s.bypass) out.noalias() += v.bypass() * x;
}

void ffn_backward(const FfnView& v, const Eigen::Ref<const VectorXd>& x,
                  const FfnCache& cache, Index k,
                  const Eigen::Ref<const VectorXd>& gout, double* grad,
                  VectorXd* gin, FfnScratch& ws) {
  const FfnShape& s = *v.shape;
  const int L = s.n_layers();
  ws.resize(s);
  VectorXd* g = &ws.a;
  VectorXd* gprev = &ws.b;
  g->head(gout.size()) = gout;
  if (s.bypass) {
    Eigen::Map<MatrixXd> bp(grad + ffn_param_offset_bypass(s), s.n_out(),
                            s.n_in());
    bp.noalias() += gout * x.transpose();
    if (gin) gin->noalias() += v.bypass().transpose() * gout;
  }
  for (int l = L; l >= 1; --l) {
    Eigen::Map<MatrixXd> gw(grad + ffn_param_offset_weight(s, l), s.widths[l],
                            s.widths[l - 1]);
    Eigen::Map<VectorXd> gb(grad + ffn_param_offset_bias(s, l), s.widths[l]);
    const auto& below =
        l == 1 ? x
               : Eigen::Ref<const VectorXd>(cache.post[l - 2].col(k));
    gw.noalias() += g->head(s.widths[l]) * below.transpose();
    gb += g->head(s.widths[l]);
    if (l == 1) {
      if (gin) gin->noalias() += v.weight(1).transpose() * g->head(s.widths[1]);
      break;
    }
    gprev->head(s.widths[l - 1]).noalias() =
        v.weight(l).transpose() * g->head(s.widths[l]);
    for (int i = 0; i < s.widths[l - 1]; ++i)
      (*gprev)[i] *= activate_deriv(s.acts[l - 2], cache.pre[l - 2](i, k),
                                    cache.post[l - 2](i, k));
    std::swap(g, gprev);
  }
}

void init_ffn(const FfnShape& s, double* p, Rng& rng, InitScheme scheme,
              double gain) {
  const int L = s.n_layers();
  for (int l = 1; l <= L; ++l) {
    const int fan_in = s.widths[l - 1];
    const int fan_out = s.widths[l];
    const double sd = scheme == InitScheme::Xavier
                          ? gain * std::sqrt(2.0 / (fan_in + fan_out))
                          : gain / std::sqrt(static_cast<double>(fan_in));
    Eigen::Map<MatrixXd> w(p + ffn_param_offset_weight(s, l), fan_out, fan_in);
    for (Index j = 0; j < w.size(); ++j) w.data()[j] = rng.normal(0.0, sd);
    Eigen::Map<VectorXd> b(p + ffn_param_offset_bias(s, l), fan_out);
    b.setZero();
  }
  if (s.bypass) {
    const double sd = scheme == InitScheme::Xavier
                          ? gain * std::sqrt(2.0 / (s.n_in() + s.n_out()))
                          : gain / std::sqrt(static_cast<double>(s.n_in()));
    Eigen::Map<MatrixXd> bp(p + ffn_param_offset_bypass(s), s.n_out(),
                            s.n_in());
    for (Index j = 0; j < bp.size(); ++j) bp.data()[j] = rng.normal(0.0, sd);
  }
}

}  // namespace pemss
