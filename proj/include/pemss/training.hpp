// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pemss/lbfgsb.hpp"
#include "pemss/metrics.hpp"
#include "pemss/model.hpp"

namespace pemss {

// R(theta, w0) = rho_theta/2 ||theta||^2 + tau_l1 ||theta||_1
//             + rho_w0/2 ||w0||^2 + tau_group sum_g weight_g ||theta_g||_2
struct RegConfig {
  double rho_theta = 2e-4;
  double tau_l1 = 0.0;
  double rho_w0 = 2e-8;
  double tau_group = 0.0;
  std::vector<LassoGroup> groups;     // consulted when tau_group > 0
  std::vector<double> group_weights;  // empty = all ones
};

// Regularizer value at tw = [theta; w0]; when `grad` is non-null it is
// accumulated into (the l1 and group terms use the zero subgradient at 0).
double regularizer(const Layout& L, const RegConfig& cfg, const VectorXd& tw,
                   VectorXd* grad = nullptr);

// (1/N) sum_k ||e_pred(k)||^2 as an objective over tw = [theta; w0].
// Non-finite rollouts evaluate to +inf with a zero gradient.
ObjectiveHandle pem_objective(const ModelStructure& ms, const Dataset& d);

// pem_objective + regularizer. The l1 term enters through its sign
// subgradient; qn_run consumes the split form below instead when tau_l1 > 0.
ObjectiveHandle regularized_objective(const ModelStructure& ms,
                                      const Dataset& d, const RegConfig& reg);

// ---- l1 splitting ----------------------------------------------------------
// x = [theta; w0]  ->  xs = [theta_plus; theta_minus; w0] with
// theta_plus, theta_minus >= 0 and objective
//   base([theta_plus - theta_minus; w0]) + tau * sum(theta_plus + theta_minus)
// which equals base + tau*||theta||_1 at the canonical split
// theta_plus = max(theta, 0), theta_minus = max(-theta, 0).

// Augments the vector, groups and bounds. tau <= 0 returns `p` unchanged.
ParamVector split_l1(const ParamVector& p, Index n_theta, double tau);
VectorXd split_point(const VectorXd& x, Index n_theta);
VectorXd unsplit_point(const VectorXd& xs, Index n_theta);
ObjectiveHandle split_objective(const ObjectiveHandle& base, Index n_theta,
                                double tau);

// ---- training pipeline -----------------------------------------------------

struct TrainConfig {
  RegConfig reg;
  AdamConfig adam;  // warm start; iters == 0 skips it
  QnConfig qn;
  std::uint64_t seed = 0;
  double init_std = 0.25;  // matrix entries drawn N(0, init_std^2)
  double ffn_gain = 1.0;   // fan-in gain for network blocks
  double init_diag = 0.0;  // added to the Ax/Az diagonals at initialization
  bool bootstrap = false;  // plant-only warm start before the combined fit
  std::string noise_init = "random";  // bootstrap phase 2: random | zero
  double noise_init_std = 1e-2;
  int multistart = 1;
  std::vector<std::uint64_t> seeds;  // overrides {seed .. seed+multistart-1}
  std::string select_on = "auto";    // auto | pred | sim
  Index burn_in = 0;  // test-set w0 reconstruction prefix; 0 = min(100, N/10)
  double epsilon_group = 0.0;  // zeroing threshold; 0 = 1e-3 * largest norm
  int reweight_iters = 0;      // extra inverse-norm reweighted rounds
  LassoTargets targets;        // which groups structure selection penalizes
};

struct PhaseReport {
  std::string name;
  int adam_iters = 0;
  int qn_iters = 0;
  int qn_evals = 0;
  double f_final = 0.0;  // regularized objective after the phase
  QnStatus status = QnStatus::MaxIters;
};

// BFR values are fractions in [0, 1]; test fields are NaN when no test set
// was supplied. Diverging rollouts score 0.
struct TrainReport {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  bool converged = false;  // last phase stopped on a tolerance
  std::vector<PhaseReport> phases;
  double wall_seconds = 0.0;
  double loss = 0.0;       // mean squared prediction-residual norm
  double objective = 0.0;  // loss + regularizer
  double bfr_sim_train = 0.0;
  double bfr_pred_train = 0.0;
  double bfr_sim_test = 0.0;
  double bfr_pred_test = 0.0;
  std::vector<std::pair<std::string, double>> group_norms;
  VectorXd theta;
  VectorXd w0;
};

// Seeded initial point [theta; w0]: matrix blocks N(0, init_std^2), network
// blocks fan-in initialized, w0 = 0. init_diag biases the state-transition
// diagonals toward slow dynamics (affine constant coefficient, output bias
// of matrix nets, bypass diagonal of state nets that have one).
VectorXd initial_point(const ModelStructure& ms, const TrainConfig& cfg,
                       std::uint64_t seed);

// Adam warm start followed by quasi-Newton refinement (on the split problem
// when tau_l1 > 0). `tw_init` overrides the seeded initial point. Scores on
// `test` (nullable) use an initial state reconstructed from its prefix.
TrainReport train(const ModelStructure& ms, const Dataset& train_data,
                  const Dataset* test_data, const TrainConfig& cfg,
                  const VectorXd* tw_init = nullptr);

// Two-phase fit: the plant-only structure (nz = 0) is trained first, then
// the combined model starts from the phase-1 plant parameters with noise
// blocks drawn N(0, noise_init_std^2) ("zero" initializes them exactly zero,
// leaving the phase-1 loss unchanged at the phase-2 starting point).
TrainReport bootstrap_train(const ModelStructure& ms, const Dataset& train_data,
                            const Dataset* test_data, const TrainConfig& cfg);

struct MultistartReport {
  std::vector<TrainReport> runs;
  int best = -1;  // index into runs, -1 when every run failed
  int n_failed = 0;
};

// Independent seeded runs; failures are recorded and excluded. Selection
// takes the highest test BFR (predictor BFR when nz > 0, simulation BFR
// otherwise; train-data BFR when no test set is given), ties by run order.
MultistartReport multistart(const ModelStructure& ms, const Dataset& train_data,
                            const Dataset* test_data, const TrainConfig& cfg);

// argmin over w0 of sum_{k < n} ||e_pred(k)||^2 + rho_w0/2 ||w0||^2 with
// theta frozen, over the prefix record `d`.
VectorXd reconstruct_initial_state(const ModelStructure& ms,
                                   const VectorXd& theta, const Dataset& d,
                                   double rho_w0, const QnConfig& qn = {});

struct SelectReport {
  TrainReport stage1;                // group-penalized fit
  double epsilon_group = 0.0;        // threshold actually applied
  std::vector<std::string> pruned;   // zeroed group names
  ModelStructure reduced;
  TrainReport final_run;             // re-estimate with tau_group = 0
};

// Group-lasso structure selection: fit with tau_group > 0 on the groups
// named by cfg.targets, zero every group whose norm falls below the
// threshold, drop state dimensions whose groups vanished, then re-estimate
// the surviving parameters with tau_group = 0 from the pruned warm start.
// tau_group == 0 reduces to a plain fit with no pruning. Throws
// AllGroupsPruned when the threshold removes every group.
SelectReport structure_select(const ModelStructure& ms,
                              const Dataset& train_data,
                              const Dataset* test_data,
                              const TrainConfig& cfg);

}  // namespace pemss
