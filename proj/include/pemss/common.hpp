// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace pemss {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Index = Eigen::Index;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};
struct NonFiniteValue : Error {
  using Error::Error;
};
struct MissingScheduling : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct SchemaError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};
struct DegenerateReference : Error {
  using Error::Error;
};
struct TooShort : Error {
  using Error::Error;
};
struct AllGroupsPruned : Error {
  using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw DimensionMismatch(msg);
}

// Deterministic random source. All stochastic features of the library draw
// from this one algorithm so that datasets and initializations are
// reproducible bit-for-bit for a given seed:
//   engine   mt19937_64 (bit-exact per the C++ standard)
//   uniform  (x >> 11) * 2^-53 on [0, 1)
//   normal   Box-Muller transform on uniform pairs, cached second value
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t raw() { return state_(); }

  double uniform01() {
    return static_cast<double>(state_() >> 11) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli() { return uniform01() < 0.5; }

  // Independent deterministic stream for a tagged sub-purpose of a seed.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline bool all_finite(const Eigen::Ref<const MatrixXd>& m) {
  return m.allFinite();
}

}  // namespace pemss
