// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "json_util.hpp"
#include "pemss/serialize.hpp"

namespace pemss {

namespace fs = std::filesystem;
using nlohmann::json;

void write_text_atomic(const std::string& path, const std::string& text) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("rename failed: " + target.string() + ": " +
                        ec.message());
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

void fmt_value(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

std::string matrix_csv(const std::string& header,
                       const std::vector<const MatrixXd*>& blocks) {
  std::string out = header;
  out += '\n';
  const Index n = blocks.empty() ? 0 : blocks.front()->cols();
  for (Index k = 0; k < n; ++k) {
    out += std::to_string(k);
    for (const MatrixXd* b : blocks)
      for (Index i = 0; i < b->rows(); ++i) {
        out += ',';
        fmt_value(out, (*b)(i, k));
      }
    out += '\n';
  }
  return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

// Counts channels named <prefix>1..<prefix>n at position `at` onward.
int count_channel(const std::vector<std::string>& cols, size_t& at,
                  const std::string& prefix) {
  int n = 0;
  while (at < cols.size() &&
         cols[at] == prefix + std::to_string(n + 1)) {
    ++n;
    ++at;
  }
  return n;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(where + ": bad numeric value '" + s + "'");
  }
}

}  // namespace

void write_dataset_csv(const std::string& path, const Dataset& d) {
  d.validate();
  std::string header = "k";
  for (Index i = 1; i <= d.nu(); ++i) header += ",u" + std::to_string(i);
  for (Index i = 1; i <= d.np(); ++i) header += ",p" + std::to_string(i);
  for (Index i = 1; i <= d.ny(); ++i) header += ",y" + std::to_string(i);
  std::vector<const MatrixXd*> blocks{&d.u};
  if (d.np() > 0) blocks.push_back(&d.p);
  blocks.push_back(&d.y);
  write_text_atomic(path, matrix_csv(header, blocks));

  std::string meta;
  meta += "ts=";
  fmt_value(meta, d.ts);
  meta += '\n';
  for (const auto& [k, v] : d.meta) meta += k + "=" + v + "\n";
  write_text_atomic(path + ".meta", meta);
}

Dataset read_dataset_csv(const std::string& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  const auto cols = split(line, ',');
  if (cols.empty() || cols[0] != "k")
    throw ParseError(path + ": header must start with k");
  size_t at = 1;
  const int nu = count_channel(cols, at, "u");
  const int np = count_channel(cols, at, "p");
  const int ny = count_channel(cols, at, "y");
  if (nu == 0 || ny == 0 || at != cols.size())
    throw ParseError(path + ": header is not k,u*,p*,y*");

  Index n = 0;
  std::vector<double> store;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto parts = split(line, ',');
    if ((int)parts.size() != 1 + nu + np + ny)
      throw ParseError(path + ": row " + std::to_string(n) +
                       " has wrong column count");
    for (size_t i = 1; i < parts.size(); ++i)
      store.push_back(parse_double(parts[i], path));
    ++n;
  }
  if (n == 0) throw ParseError(path + ": no samples");
  Dataset d;
  d.u.resize(nu, n);
  if (np > 0) d.p.resize(np, n);
  d.y.resize(ny, n);
  const int stride = nu + np + ny;
  for (Index k = 0; k < n; ++k) {
    const double* row = store.data() + Index(stride) * k;
    for (int i = 0; i < nu; ++i) d.u(i, k) = row[i];
    for (int i = 0; i < np; ++i) d.p(i, k) = row[nu + i];
    for (int i = 0; i < ny; ++i) d.y(i, k) = row[nu + np + i];
  }

  const std::string meta_path = path + ".meta";
  if (fs::exists(meta_path)) {
    std::istringstream ms(read_text(meta_path));
    while (std::getline(ms, line)) {
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ParseError(meta_path + ": line without '='");
      std::string key = line.substr(0, eq);
      std::string val = line.substr(eq + 1);
      if (!val.empty() && val.back() == '\r') val.pop_back();
      if (key == "ts")
        d.ts = parse_double(val, meta_path);
      else
        d.meta[key] = val;
    }
  }
  d.validate();
  return d;
}

void write_truth_csv(const std::string& path, const Truth& t) {
  require(t.y0.rows() == t.v.rows() && t.v.rows() == t.e.rows() &&
              t.y0.cols() == t.v.cols() && t.v.cols() == t.e.cols(),
          "truth: shape mismatch");
  const Index ny = t.y0.rows();
  std::string header = "k";
  for (Index i = 1; i <= ny; ++i) header += ",y0_" + std::to_string(i);
  for (Index i = 1; i <= ny; ++i) header += ",v_" + std::to_string(i);
  for (Index i = 1; i <= ny; ++i) header += ",e_" + std::to_string(i);
  write_text_atomic(path, matrix_csv(header, {&t.y0, &t.v, &t.e}));
}

Truth read_truth_csv(const std::string& path, int ny) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  std::vector<double> store;
  Index n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto parts = split(line, ',');
    if ((int)parts.size() != 1 + 3 * ny)
      throw ParseError(path + ": wrong column count");
    for (size_t i = 1; i < parts.size(); ++i)
      store.push_back(parse_double(parts[i], path));
    ++n;
  }
  Truth t;
  t.y0.resize(ny, n);
  t.v.resize(ny, n);
  t.e.resize(ny, n);
  for (Index k = 0; k < n; ++k) {
    const double* row = store.data() + Index(3 * ny) * k;
    for (int i = 0; i < ny; ++i) t.y0(i, k) = row[i];
    for (int i = 0; i < ny; ++i) t.v(i, k) = row[ny + i];
    for (int i = 0; i < ny; ++i) t.e(i, k) = row[2 * ny + i];
  }
  return t;
}

void write_psd_csv(const std::string& path, const Psd& p) {
  std::string out = "freq,power\n";
  for (Index k = 0; k < p.freq.size(); ++k) {
    fmt_value(out, p.freq[k]);
    out += ',';
    fmt_value(out, p.power[k]);
    out += '\n';
  }
  write_text_atomic(path, out);
}

std::string model_to_json(const ModelStructure& ms, const VectorXd& theta,
                          const VectorXd& w0) {
  const Layout L = layout(ms);
  require(theta.size() == L.n_theta, "model_to_json: theta size mismatch");
  require(w0.size() == L.n_w, "model_to_json: w0 size mismatch");
  json j;
  j["format"] = "pemss-model";
  j["format_version"] = 1;
  j["structure"] = structure_to_json(ms);
  j["theta"] = to_std(theta);
  j["w0"] = to_std(w0);
  return j.dump(2) + "\n";
}

LoadedModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ParseError(std::string("model json: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "pemss-model")
      throw SchemaError("model json: unexpected format tag");
    if (j.at("format_version").get<int>() != 1)
      throw SchemaError("model json: unsupported format_version");
    LoadedModel m;
    m.ms = structure_from_json(j.at("structure"), "model json structure");
    m.theta = from_std(j.at("theta").get<std::vector<double>>());
    m.w0 = from_std(j.at("w0").get<std::vector<double>>());
    const Layout L = layout(m.ms);
    require(m.theta.size() == L.n_theta, "model json: theta size mismatch");
    require(m.w0.size() == L.n_w, "model json: w0 size mismatch");
    return m;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("model json: ") + e.what());
  }
}

void save_model(const std::string& path, const ModelStructure& ms,
                const VectorXd& theta, const VectorXd& w0) {
  write_text_atomic(path, model_to_json(ms, theta, w0));
}

LoadedModel load_model(const std::string& path) {
  return model_from_json(read_text(path));
}

}  // namespace pemss
