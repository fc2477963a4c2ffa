// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <vector>

#include "pemss/dataset.hpp"

namespace pemss {

// Best-fit rate of yhat against the reference y (both ny x N), using the
// stacked vector norm over channels:
//   bfr = max(0, 1 - sqrt(sum_k |y_k - yhat_k|^2 / sum_k |y_k - ybar|^2))
// Returned as a fraction in [0, 1]; multiply by 100 to report percent.
// Throws DegenerateReference when y is constant.
double bfr(const MatrixXd& y, const MatrixXd& yhat);

// Unbiased sample variance (N - 1 denominator).
double sample_variance(const Eigen::Ref<const VectorXd>& x);

// 10 log10(sum_ch var(signal) / sum_ch var(noise)); +inf when the noise has
// zero variance.
double snr_db(const MatrixXd& signal, const MatrixXd& noise);

// Full complex DFT; radix-2 when the length is a power of two, direct
// summation otherwise.
std::vector<std::complex<double>> dft(const Eigen::Ref<const VectorXd>& x);

// Welch power spectral density estimate: Hann-windowed overlapping segments,
// one-sided, density scaling (integrates to the signal variance).
struct PsdConfig {
  Index nperseg = 256;
  double overlap = 0.5;  // fraction of nperseg shared by adjacent segments
  double fs = 1.0;
};

struct Psd {
  VectorXd freq;
  VectorXd power;
};

Psd welch_psd(const Eigen::Ref<const VectorXd>& x, const PsdConfig& cfg = {});

// One scored model in the experiment table. BFR values are fractions.
struct ReportRow {
  int nx = 0;
  int nz = 0;
  std::string sched = "-";  // "-", "external", "self"
  double bfr_train = 0.0;
  double bfr_test = 0.0;
  std::string type = "pred";  // "pred" or "sim"
  double seconds = 0.0;
};

// Fixed-width text table, percentages with two decimals. Deterministic for a
// fixed row list; an empty list renders the header only.
std::string render_report(const std::vector<ReportRow>& rows);

}  // namespace pemss
