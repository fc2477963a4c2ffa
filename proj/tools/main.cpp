// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
//
// pemss <command> [options]
//
//   generate   write a seeded benchmark record pair to --out
//   train      fit a model to --data per --config, write model + report
//   eval       score a saved model on a dataset, write scores + periodograms
//   select     group-penalized fit, prune state groups, re-estimate
//
// Output directory resolution: --out if given, else $PEMSS_OUT_ROOT/<command>,
// else ./out. All outputs are deterministic for a fixed config and seed.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pemss/cli.hpp"

namespace fs = std::filesystem;
using namespace pemss;

namespace {

std::string resolve_out(const std::string& out, const std::string& command) {
  if (!out.empty()) return out;
  if (const char* root = std::getenv("PEMSS_OUT_ROOT"))
    return (fs::path(root) / command).string();
  return "out";
}

void print_bfr_line(const char* tag, double train_v, double test_v) {
  if (std::isnan(test_v))
    std::printf("  %-10s train %6.2f\n", tag, 100.0 * train_v);
  else
    std::printf("  %-10s train %6.2f   test %6.2f\n", tag, 100.0 * train_v,
                100.0 * test_v);
}

void print_report(const TrainReport& r) {
  std::printf("seed %llu: loss %.6e, %s, %.1fs\n",
              static_cast<unsigned long long>(r.seed), r.loss,
              r.converged ? "converged" : "not converged", r.wall_seconds);
  print_bfr_line("BFR sim", r.bfr_sim_train, r.bfr_sim_test);
  print_bfr_line("BFR pred", r.bfr_pred_train, r.bfr_pred_test);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prediction-error identification of state-space models"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir, model_path, data_path, seeds_arg;
  std::uint64_t seed = 0;
  int multistart = 0, reweight = 0;
  long long burn = 0;
  bool plant_only = false;

  CLI::App* gen = app.add_subcommand("generate", "write a benchmark record");
  gen->add_option("--config", config_path, "experiment config (json)")
      ->required();
  gen->add_option("--out", out_dir, "output directory");
  gen->add_option("--seed", seed, "override the generator seed");
  const bool* gen_has_seed = nullptr;

  CLI::App* tr = app.add_subcommand("train", "fit a model to a record");
  tr->add_option("--config", config_path, "experiment config (json)")
      ->required();
  tr->add_option("--data", data_dir, "directory holding train.csv (+test.csv)")
      ->required();
  tr->add_option("--out", out_dir, "output directory");
  tr->add_option("--seed", seed, "override the training seed");
  tr->add_option("--seeds", seeds_arg, "seed list, e.g. 0..9 or 1,5,7");
  tr->add_option("--multistart", multistart, "number of consecutive seeds");
  tr->add_flag("--plant-only", plant_only, "drop the noise model (nz = 0)");

  CLI::App* ev = app.add_subcommand("eval", "score a saved model");
  ev->add_option("--model", model_path, "model file (json)")->required();
  ev->add_option("--data", data_path, "dataset file (csv)")->required();
  ev->add_option("--out", out_dir, "output directory");
  ev->add_option("--burn", burn, "initial-state reconstruction window");

  CLI::App* sel = app.add_subcommand("select", "prune state order by group norm");
  sel->add_option("--config", config_path, "experiment config (json)")
      ->required();
  sel->add_option("--data", data_dir, "directory holding train.csv (+test.csv)")
      ->required();
  sel->add_option("--out", out_dir, "output directory");
  sel->add_option("--seed", seed, "override the training seed");
  sel->add_flag("--reweight", reweight, "norm-adaptive reweighting rounds");

  CLI11_PARSE(app, argc, argv);
  (void)gen_has_seed;

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const std::string out = resolve_out(out_dir, command);
    fs::create_directories(out);

    if (*gen) {
      ExperimentConfig cfg = load_experiment(config_path);
      if (gen->count("--seed") > 0) cfg.gen.seed = seed;
      cmd_generate(cfg, out);
      std::printf("generate: %lld train + %lld test samples (%s, seed %llu) -> %s\n",
                  static_cast<long long>(cfg.gen.n),
                  static_cast<long long>(cfg.n_test),
                  disk_variant_name(cfg.gen.variant).c_str(),
                  static_cast<unsigned long long>(cfg.gen.seed), out.c_str());
    } else if (*tr) {
      ExperimentConfig cfg = load_experiment(config_path);
      if (tr->count("--seed") > 0) cfg.train.seed = seed;
      if (!seeds_arg.empty()) cfg.train.seeds = parse_seed_list(seeds_arg);
      if (multistart > 0) cfg.train.multistart = multistart;
      if (plant_only) {
        cfg.model.nz = 0;
        cfg.train.bootstrap = false;
      }
      const TrainReport best = cmd_train(cfg, data_dir, out);
      print_report(best);
      std::printf("train: model + report -> %s\n", out.c_str());
    } else if (*ev) {
      const ScoreCard sc = cmd_eval(model_path, data_path, out, burn);
      std::printf("eval: n %lld, burn %lld\n", static_cast<long long>(sc.n),
                  static_cast<long long>(sc.burn_in));
      std::printf("  BFR sim  %6.2f\n  BFR pred %6.2f\n", 100.0 * sc.bfr_sim,
                  100.0 * sc.bfr_pred);
      std::printf("  Var(v) %.6e\n  Var(e) %.6e\n", sc.var_v, sc.var_e);
      std::printf("eval: scores + periodograms -> %s\n", out.c_str());
    } else if (*sel) {
      ExperimentConfig cfg = load_experiment(config_path);
      if (sel->count("--seed") > 0) cfg.train.seed = seed;
      if (reweight > 0) cfg.train.reweight_iters = reweight;
      const SelectReport sr = cmd_select(cfg, data_dir, out);
      std::printf("select: epsilon %.3e, pruned %zu group(s)\n",
                  sr.epsilon_group, sr.pruned.size());
      for (const auto& name : sr.pruned) std::printf("  - %s\n", name.c_str());
      std::printf("select: nx %lld -> %lld, nz %lld -> %lld\n",
                  static_cast<long long>(cfg.model.nx),
                  static_cast<long long>(sr.reduced.nx),
                  static_cast<long long>(cfg.model.nz),
                  static_cast<long long>(sr.reduced.nz));
      print_report(sr.final_run);
      std::printf("select: model + report -> %s\n", out.c_str());
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "%s: %s\n", command.c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s: %s\n", command.c_str(), e.what());
    return 1;
  }
  return 0;
}
