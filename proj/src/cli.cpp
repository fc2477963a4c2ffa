// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#include "pemss/cli.hpp"

#include <cmath>
#include <filesystem>

#include <json.hpp>

#include "json_util.hpp"

namespace pemss {

namespace fs = std::filesystem;

namespace {

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

// ---- config <-> json --------------------------------------------------------

json noise_to_json(const NoiseSpec& n) {
  json j;
  j["kind"] = noise_kind_name(n.kind);
  j["var_e"] = n.var_e;
  j["az0"] = n.az0;
  j["az1"] = n.az1;
  j["bz0"] = n.bz0;
  j["bz1"] = n.bz1;
  return j;
}

NoiseSpec noise_from_json(const json& j) {
  check_keys(j, {"kind", "var_e", "az0", "az1", "bz0", "bz1"},
             "config benchmark.noise");
  NoiseSpec n;
  if (j.contains("kind"))
    n.kind = noise_kind_from_name(j.at("kind").get<std::string>());
  n.var_e = j.value("var_e", n.var_e);
  n.az0 = j.value("az0", n.az0);
  n.az1 = j.value("az1", n.az1);
  n.bz0 = j.value("bz0", n.bz0);
  n.bz1 = j.value("bz1", n.bz1);
  return n;
}

json disk_to_json(const DiskParams& d) {
  json j;
  j["tau"] = d.tau;
  j["km"] = d.km;
  j["inertia"] = d.inertia;
  j["mass"] = d.mass;
  j["arm"] = d.arm;
  j["grav"] = d.grav;
  j["ts"] = d.ts;
  return j;
}

DiskParams disk_from_json(const json& j) {
  check_keys(j, {"tau", "km", "inertia", "mass", "arm", "grav", "ts"},
             "config benchmark.disk");
  DiskParams d;
  d.tau = j.value("tau", d.tau);
  d.km = j.value("km", d.km);
  d.inertia = j.value("inertia", d.inertia);
  d.mass = j.value("mass", d.mass);
  d.arm = j.value("arm", d.arm);
  d.grav = j.value("grav", d.grav);
  d.ts = j.value("ts", d.ts);
  return d;
}

json train_to_json(const TrainConfig& t) {
  json j;
  j["rho_theta"] = t.reg.rho_theta;
  j["tau_l1"] = t.reg.tau_l1;
  j["rho_w0"] = t.reg.rho_w0;
  j["tau_group"] = t.reg.tau_group;
  j["adam"] = {{"iters", t.adam.iters},
               {"lr", t.adam.lr},
               {"beta1", t.adam.beta1},
               {"beta2", t.adam.beta2},
               {"eps", t.adam.eps}};
  j["qn"] = {{"max_iters", t.qn.max_iters},
             {"memory", t.qn.memory},
             {"grad_tol", t.qn.grad_tol},
             {"step_tol", t.qn.step_tol},
             {"c1", t.qn.c1},
             {"c2", t.qn.c2},
             {"max_ls_evals", t.qn.max_ls_evals}};
  j["seed"] = t.seed;
  j["seeds"] = t.seeds;
  j["multistart"] = t.multistart;
  j["init_std"] = t.init_std;
  j["ffn_gain"] = t.ffn_gain;
  j["init_diag"] = t.init_diag;
  j["bootstrap"] = t.bootstrap;
  j["noise_init"] = t.noise_init;
  j["noise_init_std"] = t.noise_init_std;
  j["select_on"] = t.select_on;
  j["burn_in"] = t.burn_in;
  j["epsilon_group"] = t.epsilon_group;
  j["reweight_iters"] = t.reweight_iters;
  j["targets"] = {{"x_states", t.targets.x_states},
                  {"z_states", t.targets.z_states},
                  {"p_entries", t.targets.p_entries}};
  return j;
}

TrainConfig train_from_json(const json& j) {
  check_keys(j, {"rho_theta", "tau_l1",    "rho_w0",        "tau_group",
                 "adam",      "qn",        "seed",          "seeds",
                 "multistart", "init_std", "ffn_gain",      "init_diag",
                 "bootstrap", "noise_init", "noise_init_std", "select_on",
                 "burn_in",   "epsilon_group", "reweight_iters", "targets"},
             "config train");
  TrainConfig t;
  t.reg.rho_theta = j.value("rho_theta", t.reg.rho_theta);
  t.reg.tau_l1 = j.value("tau_l1", t.reg.tau_l1);
  t.reg.rho_w0 = j.value("rho_w0", t.reg.rho_w0);
  t.reg.tau_group = j.value("tau_group", t.reg.tau_group);
  if (j.contains("adam")) {
    const json& a = j.at("adam");
    check_keys(a, {"iters", "lr", "beta1", "beta2", "eps"}, "config train.adam");
    t.adam.iters = a.value("iters", t.adam.iters);
    t.adam.lr = a.value("lr", t.adam.lr);
    t.adam.beta1 = a.value("beta1", t.adam.beta1);
    t.adam.beta2 = a.value("beta2", t.adam.beta2);
    t.adam.eps = a.value("eps", t.adam.eps);
  }
  if (j.contains("qn")) {
    const json& q = j.at("qn");
    check_keys(q,
               {"max_iters", "memory", "grad_tol", "step_tol", "c1", "c2",
                "max_ls_evals"},
               "config train.qn");
    t.qn.max_iters = q.value("max_iters", t.qn.max_iters);
    t.qn.memory = q.value("memory", t.qn.memory);
    t.qn.grad_tol = q.value("grad_tol", t.qn.grad_tol);
    t.qn.step_tol = q.value("step_tol", t.qn.step_tol);
    t.qn.c1 = q.value("c1", t.qn.c1);
    t.qn.c2 = q.value("c2", t.qn.c2);
    t.qn.max_ls_evals = q.value("max_ls_evals", t.qn.max_ls_evals);
  }
  t.seed = j.value("seed", t.seed);
  if (j.contains("seeds"))
    t.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  t.multistart = j.value("multistart", t.multistart);
  t.init_std = j.value("init_std", t.init_std);
  t.ffn_gain = j.value("ffn_gain", t.ffn_gain);
  t.init_diag = j.value("init_diag", t.init_diag);
  t.bootstrap = j.value("bootstrap", t.bootstrap);
  t.noise_init = j.value("noise_init", t.noise_init);
  t.noise_init_std = j.value("noise_init_std", t.noise_init_std);
  t.select_on = j.value("select_on", t.select_on);
  t.burn_in = j.value("burn_in", t.burn_in);
  t.epsilon_group = j.value("epsilon_group", t.epsilon_group);
  t.reweight_iters = j.value("reweight_iters", t.reweight_iters);
  if (j.contains("targets")) {
    const json& g = j.at("targets");
    check_keys(g, {"x_states", "z_states", "p_entries"},
               "config train.targets");
    t.targets.x_states = g.value("x_states", t.targets.x_states);
    t.targets.z_states = g.value("z_states", t.targets.z_states);
    t.targets.p_entries = g.value("p_entries", t.targets.p_entries);
  }
  return t;
}

// ---- reports ----------------------------------------------------------------

json report_to_json(const TrainReport& r) {
  json j;
  j["seed"] = r.seed;
  j["failed"] = r.failed;
  if (r.failed) j["failure"] = r.failure;
  j["converged"] = r.converged;
  j["wall_seconds"] = r.wall_seconds;
  j["loss"] = r.loss;
  j["objective"] = r.objective;
  j["bfr"] = {{"sim_train", r.bfr_sim_train},
              {"pred_train", r.bfr_pred_train},
              {"sim_test", r.bfr_sim_test},
              {"pred_test", r.bfr_pred_test}};
  json phases = json::array();
  for (const auto& p : r.phases)
    phases.push_back({{"name", p.name},
                      {"adam_iters", p.adam_iters},
                      {"qn_iters", p.qn_iters},
                      {"qn_evals", p.qn_evals},
                      {"f_final", p.f_final},
                      {"status", qn_status_name(p.status)}});
  j["phases"] = phases;
  json norms = json::array();
  for (const auto& [name, v] : r.group_norms) norms.push_back({name, v});
  j["group_norms"] = norms;
  return j;
}

Dataset read_required_dataset(const std::string& path) {
  if (!fs::exists(path)) throw IoError("dataset not found: " + path);
  return read_dataset_csv(path);
}

std::string sched_label(const ModelStructure& ms) {
  switch (ms.family) {
    case Family::LpvExternal:
      return "external";
    case Family::LpvSelf:
      return "self";
    default:
      return "-";
  }
}

std::string report_table(const ModelStructure& ms, const TrainReport& r) {
  ReportRow sim{static_cast<int>(ms.nx), static_cast<int>(ms.nz),
                sched_label(ms),         r.bfr_sim_train,
                r.bfr_sim_test,          "sim",
                r.wall_seconds};
  ReportRow pred = sim;
  pred.bfr_train = r.bfr_pred_train;
  pred.bfr_test = r.bfr_pred_test;
  pred.type = "pred";
  return render_report({sim, pred});
}

}  // namespace

ExperimentConfig experiment_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  check_keys(j, {"benchmark", "model", "train"}, "config");
  ExperimentConfig cfg;
  try {
    if (j.contains("benchmark")) {
      const json& b = j.at("benchmark");
      check_keys(b,
                 {"variant", "n_train", "n_test", "seed", "u_std", "p_mag",
                  "p_hold", "store_p", "noise", "disk"},
                 "config benchmark");
      if (b.contains("variant"))
        cfg.gen.variant =
            disk_variant_from_name(b.at("variant").get<std::string>());
      cfg.gen.n = b.value("n_train", cfg.gen.n);
      cfg.n_test = b.value("n_test", cfg.n_test);
      cfg.gen.seed = b.value("seed", cfg.gen.seed);
      cfg.gen.u_std = b.value("u_std", cfg.gen.u_std);
      cfg.gen.p_mag = b.value("p_mag", cfg.gen.p_mag);
      cfg.gen.p_hold = b.value("p_hold", cfg.gen.p_hold);
      cfg.gen.store_p = b.value("store_p", cfg.gen.store_p);
      if (b.contains("noise")) cfg.gen.noise = noise_from_json(b.at("noise"));
      if (b.contains("disk")) cfg.disk = disk_from_json(b.at("disk"));
    }
    if (j.contains("model")) {
      cfg.model = structure_from_json(j.at("model"), "config model");
      cfg.has_model = true;
    }
    if (j.contains("train")) {
      cfg.train = train_from_json(j.at("train"));
      cfg.has_train = true;
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("config: ") + e.what());
  }
  return cfg;
}

std::string experiment_to_json(const ExperimentConfig& cfg) {
  json j;
  json b;
  b["variant"] = disk_variant_name(cfg.gen.variant);
  b["n_train"] = cfg.gen.n;
  b["n_test"] = cfg.n_test;
  b["seed"] = cfg.gen.seed;
  b["u_std"] = cfg.gen.u_std;
  b["p_mag"] = cfg.gen.p_mag;
  b["p_hold"] = cfg.gen.p_hold;
  b["store_p"] = cfg.gen.store_p;
  b["noise"] = noise_to_json(cfg.gen.noise);
  b["disk"] = disk_to_json(cfg.disk);
  j["benchmark"] = b;
  if (cfg.has_model) j["model"] = structure_to_json(cfg.model);
  if (cfg.has_train) j["train"] = train_to_json(cfg.train);
  return j.dump(2) + "\n";
}

ExperimentConfig load_experiment(const std::string& path) {
  return experiment_from_json(read_text(path));
}

void cmd_generate(const ExperimentConfig& cfg, const std::string& out_dir) {
  const BenchmarkPair bp = gen_disk_pair(cfg.disk, cfg.gen, cfg.n_test);
  write_dataset_csv(join(out_dir, "train.csv"), bp.train.data);
  write_truth_csv(join(out_dir, "train_truth.csv"), bp.train.truth);
  write_dataset_csv(join(out_dir, "test.csv"), bp.test.data);
  write_truth_csv(join(out_dir, "test_truth.csv"), bp.test.truth);
  write_text_atomic(join(out_dir, "config.json"), experiment_to_json(cfg));
}

TrainReport cmd_train(const ExperimentConfig& cfg, const std::string& data_dir,
                      const std::string& out_dir) {
  if (!cfg.has_model) throw ConfigError("train: config has no model section");
  if (!cfg.has_train) throw ConfigError("train: config has no train section");
  const Dataset train_data = read_required_dataset(join(data_dir, "train.csv"));
  Dataset test_data;
  const bool have_test = fs::exists(join(data_dir, "test.csv"));
  if (have_test) test_data = read_dataset_csv(join(data_dir, "test.csv"));
  const Dataset* test = have_test ? &test_data : nullptr;

  json runs = json::array();
  TrainReport best;
  if (cfg.train.multistart > 1 || cfg.train.seeds.size() > 1) {
    MultistartReport mr = multistart(cfg.model, train_data, test, cfg.train);
    for (const auto& r : mr.runs) runs.push_back(report_to_json(r));
    if (mr.best < 0)
      throw NonFiniteValue("train: every multistart run failed");
    best = mr.runs[static_cast<size_t>(mr.best)];
  } else {
    best = cfg.train.bootstrap
               ? bootstrap_train(cfg.model, train_data, test, cfg.train)
               : train(cfg.model, train_data, test, cfg.train);
    runs.push_back(report_to_json(best));
    if (best.failed) {
      json rj;
      rj["best"] = report_to_json(best);
      rj["runs"] = runs;
      write_text_atomic(join(out_dir, "report.json"), rj.dump(2) + "\n");
      throw NonFiniteValue("train: run failed: " + best.failure);
    }
  }
  save_model(join(out_dir, "model.json"), cfg.model, best.theta, best.w0);
  json rj;
  rj["best"] = report_to_json(best);
  rj["runs"] = runs;
  write_text_atomic(join(out_dir, "report.json"), rj.dump(2) + "\n");
  write_text_atomic(join(out_dir, "report.txt"), report_table(cfg.model, best));
  write_text_atomic(join(out_dir, "config.json"), experiment_to_json(cfg));
  return best;
}

ScoreCard cmd_eval(const std::string& model_path, const std::string& data_path,
                   const std::string& out_dir, Index burn_in, double rho_w0) {
  const LoadedModel m = load_model(model_path);
  const Dataset d = read_required_dataset(data_path);
  if (d.nu() != m.ms.nu || d.ny() != m.ms.ny)
    throw DimensionMismatch("eval: dataset channels do not match the model");

  ScoreCard sc;
  sc.n = d.n();
  Index burn = burn_in > 0 ? burn_in : std::min<Index>(100, d.n() / 10);
  sc.burn_in = std::max<Index>(1, std::min(burn, d.n()));
  QnConfig qn;
  qn.max_iters = 500;
  const VectorXd w0 = reconstruct_initial_state(
      m.ms, m.theta, d.head(sc.burn_in), rho_w0, qn);

  const RolloutResult pr = predictor_rollout(m.ms, m.theta, w0, d);
  sc.bfr_pred = bfr(d.y, pr.y_pred);
  const RolloutResult sr =
      simulation_rollout(m.ms, m.theta, w0.head(m.ms.nx), d);
  sc.bfr_sim = bfr(d.y, sr.y_sim);
  for (Index c = 0; c < d.ny(); ++c) {
    sc.var_v += sample_variance(pr.v.row(c).transpose());
    sc.var_e += sample_variance(pr.e_pred.row(c).transpose());
  }

  PsdConfig pc;
  pc.fs = 1.0 / d.ts;
  pc.nperseg = std::min<Index>(256, d.n());
  for (Index c = 0; c < d.ny(); ++c) {
    const std::string suffix =
        d.ny() == 1 ? "" : "_" + std::to_string(c + 1);
    write_psd_csv(join(out_dir, "psd_v" + suffix + ".csv"),
                  welch_psd(pr.v.row(c).transpose(), pc));
    write_psd_csv(join(out_dir, "psd_e" + suffix + ".csv"),
                  welch_psd(pr.e_pred.row(c).transpose(), pc));
  }

  json j;
  j["model"] = model_path;
  j["dataset"] = data_path;
  j["n"] = sc.n;
  j["burn_in"] = sc.burn_in;
  j["bfr_sim"] = sc.bfr_sim;
  j["bfr_pred"] = sc.bfr_pred;
  j["var_v"] = sc.var_v;
  j["var_e"] = sc.var_e;
  write_text_atomic(join(out_dir, "scores.json"), j.dump(2) + "\n");
  return sc;
}

SelectReport cmd_select(const ExperimentConfig& cfg,
                        const std::string& data_dir,
                        const std::string& out_dir) {
  if (!cfg.has_model) throw ConfigError("select: config has no model section");
  if (!cfg.has_train) throw ConfigError("select: config has no train section");
  const Dataset train_data = read_required_dataset(join(data_dir, "train.csv"));
  Dataset test_data;
  const bool have_test = fs::exists(join(data_dir, "test.csv"));
  if (have_test) test_data = read_dataset_csv(join(data_dir, "test.csv"));
  const Dataset* test = have_test ? &test_data : nullptr;

  SelectReport sr = structure_select(cfg.model, train_data, test, cfg.train);
  if (sr.final_run.failed)
    throw NonFiniteValue("select: fit failed: " + sr.final_run.failure);

  // after-norms over the surviving state groups, named like the stage-1 ones
  std::vector<std::pair<std::string, double>> after;
  if (cfg.train.reg.tau_group > 0) {
    const std::vector<LassoGroup> groups =
        lasso_groups(sr.reduced, cfg.train.targets);
    VectorXd tw(sr.final_run.theta.size() + sr.final_run.w0.size());
    tw << sr.final_run.theta, sr.final_run.w0;
    for (const auto& g : groups) {
      double s = 0.0;
      for (Index i : g.idx) s += tw[i] * tw[i];
      after.emplace_back(g.name, std::sqrt(s));
    }
  }

  save_model(join(out_dir, "model.json"), sr.reduced, sr.final_run.theta,
             sr.final_run.w0);
  json j;
  j["stage1"] = report_to_json(sr.stage1);
  j["epsilon_group"] = sr.epsilon_group;
  j["pruned"] = sr.pruned;
  j["reduced"] = structure_to_json(sr.reduced);
  j["final"] = report_to_json(sr.final_run);
  json an = json::array();
  for (const auto& [name, v] : after) an.push_back({name, v});
  j["group_norms_after"] = an;
  write_text_atomic(join(out_dir, "report.json"), j.dump(2) + "\n");
  write_text_atomic(join(out_dir, "report.txt"),
                    report_table(sr.reduced, sr.final_run));
  write_text_atomic(join(out_dir, "config.json"), experiment_to_json(cfg));
  return sr;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  const auto dots = s.find("..");
  if (dots != std::string::npos) {
    const std::uint64_t lo = std::stoull(s.substr(0, dots));
    const std::uint64_t hi = std::stoull(s.substr(dots + 2));
    if (hi < lo) throw ConfigError("seed range is empty: " + s);
    for (std::uint64_t v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  size_t pos = 0;
  while (pos < s.size()) {
    const auto comma = s.find(',', pos);
    const std::string tok = s.substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!tok.empty()) out.push_back(std::stoull(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw ConfigError("empty seed list: " + s);
  return out;
}

}  // namespace pemss
