// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "pemss/benchmarks.hpp"
#include "pemss/serialize.hpp"
#include "pemss/training.hpp"

namespace pemss {

// One experiment: how to generate (or find) the data, what structure to fit
// and how to train it. Parsed from a json config file with a fixed schema;
// unknown keys are errors, missing keys take the defaults below. Every
// command persists the fully resolved config next to its outputs.
struct ExperimentConfig {
  DiskParams disk;
  GenSpec gen;
  Index n_test = 2000;
  ModelStructure model;
  TrainConfig train;
  bool has_model = false;  // config carried a model section
  bool has_train = false;  // config carried a train section
};

ExperimentConfig experiment_from_json(const std::string& text);
std::string experiment_to_json(const ExperimentConfig& cfg);

ExperimentConfig load_experiment(const std::string& path);

// "0..9" -> 0,1,...,9;  "1,5,7" -> 1,5,7;  "4" -> 4.
std::vector<std::uint64_t> parse_seed_list(const std::string& s);

// Scores of one model on one record. BFR values are fractions.
struct ScoreCard {
  double bfr_sim = 0.0;
  double bfr_pred = 0.0;
  double var_v = 0.0;  // variance of y - g_x(x, u), summed over channels
  double var_e = 0.0;  // variance of the prediction residual
  Index n = 0;
  Index burn_in = 0;
};

// Writes train/test records with truth sidecars and the resolved config:
// train.csv, train_truth.csv, test.csv, test_truth.csv, config.json.
void cmd_generate(const ExperimentConfig& cfg, const std::string& out_dir);

// Fits cfg.model on data_dir/train.csv (scoring against data_dir/test.csv
// when present) and writes model.json, report.json and config.json. Runs a
// multistart when the config lists several seeds. Returns the best report.
TrainReport cmd_train(const ExperimentConfig& cfg, const std::string& data_dir,
                      const std::string& out_dir);

// Scores a saved model on a record: reconstructs the initial state from the
// record prefix, then writes scores.json and residual periodograms
// (psd_v.csv, psd_e.csv; channel-suffixed when ny > 1) to out_dir.
ScoreCard cmd_eval(const std::string& model_path, const std::string& data_path,
                   const std::string& out_dir, Index burn_in = 0,
                   double rho_w0 = 2e-8);

// Group-lasso structure selection on data_dir/train.csv; writes the pruned
// model, report.json with before/after group norms, and config.json.
SelectReport cmd_select(const ExperimentConfig& cfg,
                        const std::string& data_dir,
                        const std::string& out_dir);

}  // namespace pemss
