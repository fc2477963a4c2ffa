// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pemss/model.hpp"

namespace pemss {

// Rotating unbalanced-mass benchmark plant, forward-Euler discretized with
// state x = (velocity, angle) and measured angle:
//   x1+ = (1 - ts/tau) x1 - (m g l ts / J) sin(x2) + (ts km / tau) u
//   x2+ = ts x1 + x2
//   y0  = x2
// The sin term makes the plant an exact self-scheduled LPV system with
// scheduling p = sinc(x2): A(p) = A0 + A1 p.
struct DiskParams {
  double tau = 0.4;       // motor time constant [s]
  double km = 15.25;      // motor gain
  double inertia = 2.4e-4;
  double mass = 0.076;
  double arm = 0.041;     // center-of-mass distance [m]
  double grav = 9.8;
  double ts = 0.01;       // sample time [s]

  double a11() const { return 1.0 - ts / tau; }
  double a12() const { return -mass * grav * arm * ts / inertia; }  // times p
  double b1() const { return ts * km / tau; }

  MatrixXd a0() const;  // constant part of A(p)
  MatrixXd a1() const;  // coefficient of p
  MatrixXd b() const;
  MatrixXd c() const;
};

// Forward Box-Jenkins style noise channel, affine in the scheduling signal:
//   z+ = (az0 + az1 q) z + (bz0 + bz1 q) e,   v = z + e
// with q == 1 for the unscheduled variant. The defaults put the noise pole
// at 0.99 and the zero gain at 0.09 when q == 1.
enum class NoiseKind { White, BjLti, BjLpv };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::BjLti;
  double var_e = 3.75e-3;
  double az0 = 277.0 / 300.0;
  double az1 = 2.0 / 30.0;
  double bz0 = 41.0 / 150.0;
  double bz1 = -11.0 / 60.0;

  double az_at(double q) const { return az0 + az1 * q; }
  double bz_at(double q) const { return bz0 + bz1 * q; }
};

// Which data-generating plant drives the record. LpvSelf is the full
// nonlinear plant (sin path); fitting it with the Nonlinear family uses the
// same records.
enum class DiskVariant { Lti, LpvExternal, LpvSelf };

std::string disk_variant_name(DiskVariant v);
DiskVariant disk_variant_from_name(const std::string& s);
std::string noise_kind_name(NoiseKind k);
NoiseKind noise_kind_from_name(const std::string& s);

struct GenSpec {
  DiskVariant variant = DiskVariant::Lti;
  NoiseSpec noise;
  Index n = 2000;
  std::uint64_t seed = 0;
  double u_std = 1.0;    // white normal input level
  double p_mag = 0.25;   // external scheduling: p in {1 - 2 p_mag, 1}
  Index p_hold = 20;     // external scheduling: samples per binary level
  bool store_p = true;   // keep the scheduling signal as a dataset channel
};

struct Generated {
  Dataset data;
  Truth truth;
};

// One seeded record. Input, innovation and scheduling draws come from
// independent substreams of the seed, so records of different variants that
// share a seed share their input and innovation realizations sample for
// sample.
Generated gen_disk(const DiskParams& dp, const GenSpec& gs);

// Train/test pair: test uses an independent substream of the same seed.
struct BenchmarkPair {
  Generated train;
  Generated test;
};
BenchmarkPair gen_disk_pair(const DiskParams& dp, const GenSpec& gs,
                            Index n_test);

// Piecewise-constant random binary signal in {lo, hi}, redrawn every `hold`
// samples.
VectorXd random_binary_signal(Index n, Index hold, double lo, double hi,
                              Rng& rng);

// The data-generating system in predictor (inverse noise) form, for families
// that can express it exactly.
struct TrueModel {
  ModelStructure ms;
  VectorXd theta;
  VectorXd w0;
};
TrueModel true_lti_model(const DiskParams& dp, const NoiseSpec& ns);
TrueModel true_lpv_external_model(const DiskParams& dp, const NoiseSpec& ns);

// Scores of the data-generating system on its own record, computed from the
// stored noise decomposition: the simulation residual is v, the one-step
// predictor residual is e.
struct TrueBaseline {
  double bfr_sim = 0.0;
  double bfr_pred = 0.0;
};
TrueBaseline true_baseline(const Dataset& d, const Truth& t);

}  // namespace pemss
