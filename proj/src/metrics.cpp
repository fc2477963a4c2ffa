// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstdio>
#include <numbers>

#include "pemss/metrics.hpp"

namespace pemss {

double bfr(const MatrixXd& y, const MatrixXd& yhat) {
  require(y.rows() == yhat.rows() && y.cols() == yhat.cols(),
          "bfr: shape mismatch");
  require(y.cols() >= 1, "bfr: empty reference");
  const VectorXd ybar = y.rowwise().mean();
  const double den = (y.colwise() - ybar).squaredNorm();
  if (den <= 0.0)
    throw DegenerateReference("bfr: constant reference signal");
  const double num = (y - yhat).squaredNorm();
  return std::max(0.0, 1.0 - std::sqrt(num / den));
}

double sample_variance(const Eigen::Ref<const VectorXd>& x) {
  require(x.size() >= 2, "sample_variance: needs at least two samples");
  const double m = x.mean();
  return (x.array() - m).square().sum() / double(x.size() - 1);
}

double snr_db(const MatrixXd& signal, const MatrixXd& noise) {
  require(signal.rows() == noise.rows(), "snr_db: channel count mismatch");
  double ps = 0.0, pn = 0.0;
  for (Index i = 0; i < signal.rows(); ++i)
    ps += sample_variance(signal.row(i).transpose());
  for (Index i = 0; i < noise.rows(); ++i)
    pn += sample_variance(noise.row(i).transpose());
  if (pn <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(ps / pn);
}

namespace {

bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_radix2(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / double(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

}  // namespace

std::vector<std::complex<double>> dft(const Eigen::Ref<const VectorXd>& x) {
  const size_t n = size_t(x.size());
  std::vector<std::complex<double>> a(n);
  if (is_pow2(n)) {
    for (size_t i = 0; i < n; ++i) a[i] = x[Index(i)];
    fft_radix2(a);
    return a;
  }
  for (size_t k = 0; k < n; ++k) {
    std::complex<double> s(0.0, 0.0);
    for (size_t j = 0; j < n; ++j) {
      const double ang = -2.0 * std::numbers::pi * double(k) * double(j) /
                         double(n);
      s += x[Index(j)] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    a[k] = s;
  }
  return a;
}

Psd welch_psd(const Eigen::Ref<const VectorXd>& x, const PsdConfig& cfg) {
  require(x.size() >= 2, "welch_psd: signal too short");
  require(cfg.overlap >= 0.0 && cfg.overlap < 1.0,
          "welch_psd: overlap must be in [0, 1)");
  require(cfg.fs > 0.0, "welch_psd: fs must be positive");
  const Index m = std::min<Index>(cfg.nperseg, x.size());
  require(m >= 2, "welch_psd: segment too short");
  const Index hop = std::max<Index>(1, Index(std::llround(double(m) *
                                                          (1.0 - cfg.overlap))));
  // periodic Hann window
  VectorXd w(m);
  for (Index i = 0; i < m; ++i)
    w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * double(i) /
                                 double(m)));
  const double wss = w.squaredNorm();
  const Index nf = m / 2 + 1;
  VectorXd acc = VectorXd::Zero(nf);
  Index nseg = 0;
  for (Index start = 0; start + m <= x.size(); start += hop) {
    VectorXd seg = x.segment(start, m).cwiseProduct(w);
    auto spec = dft(seg);
    for (Index k = 0; k < nf; ++k) acc[k] += std::norm(spec[size_t(k)]);
    ++nseg;
  }
  require(nseg >= 1, "welch_psd: no full segment fits");
  Psd out;
  out.freq.resize(nf);
  out.power.resize(nf);
  const double scale = 1.0 / (cfg.fs * wss * double(nseg));
  for (Index k = 0; k < nf; ++k) {
    out.freq[k] = cfg.fs * double(k) / double(m);
    double p = acc[k] * scale;
    const bool interior = k != 0 && !(m % 2 == 0 && k == nf - 1);
    if (interior) p *= 2.0;
    out.power[k] = p;
  }
  return out;
}

std::string render_report(const std::vector<ReportRow>& rows) {
  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%3s  %3s  %-8s  %9s  %9s  %-4s  %9s\n",
                "nx", "nz", "sched", "BFR train", "BFR test", "type", "time");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf),
                  "%3d  %3d  %-8s  %8.2f%%  %8.2f%%  %-4s  %7.2f s\n", r.nx,
                  r.nz, r.sched.c_str(), 100.0 * r.bfr_train,
                  100.0 * r.bfr_test, r.type.c_str(), r.seconds);
    out += buf;
  }
  return out;
}

}  // namespace pemss
