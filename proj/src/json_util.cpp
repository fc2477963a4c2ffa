// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#include "json_util.hpp"

namespace pemss {

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (item.key() == a) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

json shape_to_json(const FfnShape& s) {
  json j;
  j["widths"] = s.widths;
  std::vector<std::string> acts;
  for (auto a : s.acts) acts.push_back(activation_name(a));
  j["acts"] = acts;
  j["bypass"] = s.bypass;
  return j;
}

FfnShape shape_from_json(const json& j, const std::string& where) {
  check_keys(j, {"widths", "acts", "bypass"}, where);
  FfnShape s;
  try {
    s.widths = j.at("widths").get<std::vector<int>>();
    for (const auto& a : j.at("acts"))
      s.acts.push_back(activation_from_name(a.get<std::string>()));
    s.bypass = j.value("bypass", false);
  } catch (const json::exception& e) {
    throw SchemaError(where + ": " + e.what());
  }
  return s;
}

json structure_to_json(const ModelStructure& ms) {
  json s;
  s["family"] = family_name(ms.family);
  s["nx"] = ms.nx;
  s["nz"] = ms.nz;
  s["nu"] = ms.nu;
  s["ny"] = ms.ny;
  s["np"] = ms.np;
  s["matrix_dep"] = matrix_dep_name(ms.matrix_dep);
  s["noise_scheduled"] = ms.noise_scheduled;
  if (ms.family == Family::LpvSelf) s["psi"] = shape_to_json(ms.psi);
  if ((ms.family == Family::LpvExternal || ms.family == Family::LpvSelf) &&
      ms.matrix_dep == MatrixDep::Ffn) {
    s["fmx"] = shape_to_json(ms.fmx);
    if (ms.nz > 0) s["fmz"] = shape_to_json(ms.fmz);
  }
  if (ms.family == Family::Nonlinear) {
    s["fx"] = shape_to_json(ms.fx);
    s["gx"] = shape_to_json(ms.gx);
    if (ms.nz > 0) {
      s["fz"] = shape_to_json(ms.fz);
      s["gz"] = shape_to_json(ms.gz);
    }
  }
  return s;
}

ModelStructure structure_from_json(const json& j, const std::string& where) {
  check_keys(j,
             {"family", "nx", "nz", "nu", "ny", "np", "matrix_dep",
              "noise_scheduled", "psi", "fmx", "fmz", "fx", "gx", "fz", "gz"},
             where);
  ModelStructure ms;
  try {
    ms.family = family_from_name(j.at("family").get<std::string>());
    ms.nx = j.at("nx").get<int>();
    ms.nz = j.value("nz", 0);
    ms.nu = j.value("nu", 1);
    ms.ny = j.value("ny", 1);
    ms.np = j.value("np", 0);
    if (j.contains("matrix_dep"))
      ms.matrix_dep = matrix_dep_from_name(j.at("matrix_dep").get<std::string>());
    ms.noise_scheduled = j.value("noise_scheduled", false);
    auto shape = [&](const char* k) {
      return shape_from_json(j.at(k), where + "." + k);
    };
    if (j.contains("psi")) ms.psi = shape("psi");
    if (j.contains("fmx")) ms.fmx = shape("fmx");
    if (j.contains("fmz")) ms.fmz = shape("fmz");
    if (j.contains("fx")) ms.fx = shape("fx");
    if (j.contains("gx")) ms.gx = shape("gx");
    if (j.contains("fz")) ms.fz = shape("fz");
    if (j.contains("gz")) ms.gz = shape("gz");
  } catch (const json::exception& e) {
    throw SchemaError(where + ": " + e.what());
  }
  ms.validate();
  return ms;
}

std::vector<double> to_std(const VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

VectorXd from_std(const std::vector<double>& v) {
  VectorXd out(Index(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out[Index(i)] = v[i];
  return out;
}

}  // namespace pemss
