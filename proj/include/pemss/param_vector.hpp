// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "pemss/common.hpp"

namespace pemss {

// Half-open index range [lo, hi) of a named parameter block.
struct ParamGroup {
  std::string name;
  Index lo = 0;
  Index hi = 0;
  Index size() const { return hi - lo; }
};

// Flat optimization vector plus its block structure and (optional) box
// bounds. Groups are disjoint and cover [0, size()) in order.
struct ParamVector {
  VectorXd values;
  std::vector<ParamGroup> groups;
  VectorXd lower;  // empty means unbounded
  VectorXd upper;

  Index size() const { return values.size(); }

  bool has_bounds() const { return lower.size() != 0; }

  const ParamGroup& group(const std::string& name) const {
    for (const auto& g : groups)
      if (g.name == name) return g;
    throw DimensionMismatch("param vector: no group named " + name);
  }

  bool has_group(const std::string& name) const {
    for (const auto& g : groups)
      if (g.name == name) return true;
    return false;
  }

  Eigen::VectorBlock<const VectorXd> segment(const std::string& name) const {
    const auto& g = group(name);
    return values.segment(g.lo, g.size());
  }

  void validate() const {
    Index at = 0;
    for (const auto& g : groups) {
      require(g.lo == at && g.hi >= g.lo, "param vector: group ranges must be disjoint and ordered");
      at = g.hi;
    }
    require(at == values.size(), "param vector: groups must cover all indices");
    if (has_bounds())
      require(lower.size() == values.size() && upper.size() == values.size(),
              "param vector: bound length mismatch");
  }
};

}  // namespace pemss
