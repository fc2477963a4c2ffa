// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "pemss/metrics.hpp"
#include "pemss/model.hpp"

namespace pemss {

// ---- text files -------------------------------------------------------------

// Writes to `<path>.tmp` and renames, so readers never observe a partial
// file. Creates parent directories as needed.
void write_text_atomic(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

// ---- dataset CSV ------------------------------------------------------------

// Column layout: k,u1..u{nu}[,p1..p{np}],y1..y{ny}; one row per sample,
// values printed with %.17g, LF line endings. A `<path>.meta` sidecar holds
// key=value lines; the sample time is stored there under `ts`.
void write_dataset_csv(const std::string& path, const Dataset& d);
Dataset read_dataset_csv(const std::string& path);

// Truth sidecar for generated benchmarks: k,y0_*,v_*,e_* columns with the
// noise-free output, the noise realization and the driving innovation.
void write_truth_csv(const std::string& path, const Truth& t);
Truth read_truth_csv(const std::string& path, int ny);

// Two columns: freq,power.
void write_psd_csv(const std::string& path, const Psd& p);

// ---- model JSON ---------------------------------------------------------------

// Self-describing versioned document carrying the structure and the flat
// parameter blocks, so a saved model round-trips bit-exactly.
std::string model_to_json(const ModelStructure& ms, const VectorXd& theta,
                          const VectorXd& w0);

struct LoadedModel {
  ModelStructure ms;
  VectorXd theta;
  VectorXd w0;
};

LoadedModel model_from_json(const std::string& text);

void save_model(const std::string& path, const ModelStructure& ms,
                const VectorXd& theta, const VectorXd& w0);
LoadedModel load_model(const std::string& path);

}  // namespace pemss
