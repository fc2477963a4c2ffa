// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>

#include "pemss/common.hpp"

namespace pemss {

// One experiment record. Channels are stored channel-major (nu x N etc.) so a
// rollout reads sample k as a contiguous column.
struct Dataset {
  MatrixXd u;  // nu x N
  MatrixXd y;  // ny x N
  MatrixXd p;  // np x N, 0 x 0 when no external scheduling is stored
  double ts = 1.0;
  std::map<std::string, std::string> meta;

  Index n() const { return u.cols(); }
  Index nu() const { return u.rows(); }
  Index ny() const { return y.rows(); }
  Index np() const { return p.size() == 0 ? 0 : p.rows(); }

  void validate() const {
    require(u.cols() == y.cols(), "dataset: u and y sample counts differ");
    if (p.size() != 0)
      require(p.cols() == u.cols(), "dataset: p sample count differs");
    require(u.cols() >= 1, "dataset: empty");
    if (!u.allFinite() || !y.allFinite() || (p.size() != 0 && !p.allFinite()))
      throw NonFiniteValue("dataset: non-finite sample");
  }

  Dataset head(Index m) const {
    Dataset d;
    d.u = u.leftCols(m);
    d.y = y.leftCols(m);
    if (p.size() != 0) d.p = p.leftCols(m);
    d.ts = ts;
    d.meta = meta;
    return d;
  }
};

// Noise-free output, noise realization and driving innovation of a generated
// benchmark dataset. Written alongside the dataset so "true model" baselines
// can be scored without re-simulating.
struct Truth {
  MatrixXd y0;  // ny x N
  MatrixXd v;   // ny x N
  MatrixXd e;   // ny x N
};

}  // namespace pemss
