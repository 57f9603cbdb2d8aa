/*
 Copyright 2026 The AGAIL Lab Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#ifndef AGAIL_EXPERIMENT_HPP_
#define AGAIL_EXPERIMENT_HPP_

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "agail/numcore.hpp"
#include "agail/trainer.hpp"

namespace agail {

inline constexpr const char* kVersion = "agail-lab 1.0.0";
inline constexpr const char* kMetricsHeader = "iter,true_return,composed_reward,d_bce,q_nll,kl,entropy,seconds";

inline std::string to_string(RewardForm f) { return f == RewardForm::Probability ? "prob" : "neg_log"; }

inline RewardForm reward_form_from_string(const std::string& s) {
  if (s == "prob") return RewardForm::Probability;
  if (s == "neg_log") return RewardForm::NegLogOneMinusProb;
  throw InputError("unknown reward form '" + s + "' (expected prob or neg_log)");
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline long long parse_integer(const std::string& key, const std::string& v) {
  long long x = 0;
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return x;
}

inline int parse_int(const std::string& key, const std::string& v) {
  const long long x = parse_integer(key, v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
    throw ConfigError(key + ": value out of range");
  return static_cast<int>(x);
}

inline double parse_real(const std::string& key, const std::string& v) {
  double x = 0.0;
  if (!parse_double(v, x)) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int(key, trim(item)));
  return out;
}

}  // namespace detail

/// Ordered key/value pairs read from a config file. Later keys win.
using Settings = std::vector<std::pair<std::string, std::string>>;

/**
 * Reads `key = value` lines. `[section]` headers only group keys visually:
 * the namespace stays flat. `#` starts a comment.
 */
inline Settings parse_config(std::istream& in) {
  Settings out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    std::string body = detail::trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') throw ParseError("unterminated section header", line_no, body.size());
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no, 0);
    std::string key = detail::trim(std::string_view(body).substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line_no, 0);
    out.emplace_back(std::move(key), detail::trim(std::string_view(body).substr(eq + 1)));
  }
  return out;
}

inline Settings parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path);
  return parse_config(in);
}

inline void apply_setting(TrainConfig& cfg, const std::string& key, const std::string& v) {
  using namespace detail;
  if (key == "algorithm" || key == "algo") cfg.algorithm = algorithm_from_string(v);
  else if (key == "env") cfg.env = v;
  else if (key == "eta") cfg.eta = parse_real(key, v);
  else if (key == "alpha") cfg.alpha = parse_real(key, v);
  else if (key == "beta") cfg.beta = v == "auto" ? std::nullopt : std::optional<double>(parse_real(key, v));
  else if (key == "lambda1") cfg.lambda1 = parse_real(key, v);
  else if (key == "lambda2") cfg.lambda2 = parse_real(key, v);
  else if (key == "gamma") cfg.gamma = v == "auto" ? std::nullopt : std::optional<double>(parse_real(key, v));
  else if (key == "gae_lambda") cfg.gae_lambda = parse_real(key, v);
  else if (key == "batch_timesteps")
    cfg.batch_timesteps = v == "auto" ? std::nullopt : std::optional<int>(parse_int(key, v));
  else if (key == "iterations" || key == "iters") cfg.iterations = parse_int(key, v);
  else if (key == "seed") {
    const long long s = parse_integer(key, v);
    if (s < 0) throw ConfigError("seed must be non-negative");
    cfg.seed = static_cast<std::uint64_t>(s);
  } else if (key == "demos" || key == "demo_path") cfg.demo_path = v;
  else if (key == "hidden") cfg.hidden = parse_int_list(key, v);
  else if (key == "max_kl") cfg.trpo.max_kl = parse_real(key, v);
  else if (key == "cg_iters") cfg.trpo.cg_iters = parse_int(key, v);
  else if (key == "cg_damping") cfg.trpo.cg_damping = parse_real(key, v);
  else if (key == "backtrack_coeff") cfg.trpo.backtrack_coeff = parse_real(key, v);
  else if (key == "backtrack_steps") cfg.trpo.backtrack_steps = parse_int(key, v);
  else if (key == "accept_ratio") cfg.trpo.accept_ratio = parse_real(key, v);
  else if (key == "fvp_stride") cfg.trpo.fvp_stride = parse_int(key, v);
  else if (key == "value_lr") cfg.value_lr = parse_real(key, v);
  else if (key == "value_epochs") cfg.value_epochs = parse_int(key, v);
  else if (key == "value_minibatch") cfg.value_minibatch = parse_int(key, v);
  else if (key == "value_updates_trunk") cfg.value_updates_trunk = parse_bool(key, v);
  else if (key == "d_lr") cfg.d_lr = parse_real(key, v);
  else if (key == "d_steps") cfg.d_steps = parse_int(key, v);
  else if (key == "d_batch") cfg.d_batch = parse_int(key, v);
  else if (key == "reward_form") cfg.reward_form = reward_form_from_string(v);
  else if (key == "q_lr") cfg.q_lr = parse_real(key, v);
  else if (key == "q_steps") cfg.q_steps = parse_int(key, v);
  else if (key == "q_batch") cfg.q_batch = parse_int(key, v);
  else if (key == "bc_lr") cfg.bc_lr = parse_real(key, v);
  else if (key == "bc_batch") cfg.bc_batch = parse_int(key, v);
  else if (key == "eval_episodes") cfg.eval_episodes = parse_int(key, v);
  else if (key == "timing") cfg.timing = parse_bool(key, v);
  else if (key == "checkpoint_every") cfg.checkpoint_every = parse_int(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

inline void apply_settings(TrainConfig& cfg, const Settings& s) {
  for (const auto& [k, v] : s) apply_setting(cfg, k, v);
}

/// Fully resolved config as `key = value` lines; parse_config plus
/// apply_settings reproduces it.
inline std::string config_text(const TrainConfig& cfg) {
  std::ostringstream o;
  auto line = [&](const char* k, const std::string& v) { o << k << " = " << v << '\n'; };
  auto real = [](double x) { return format_double(x); };
  std::string hidden;
  for (std::size_t i = 0; i < cfg.hidden.size(); ++i) hidden += (i ? "," : "") + std::to_string(cfg.hidden[i]);
  std::optional<EnvSpec> spec;
  try {
    spec = make_env(cfg.env)->spec();
  } catch (const InputError&) {
  }
  line("algorithm", to_string(cfg.algorithm));
  line("env", cfg.env);
  line("eta", real(cfg.eta));
  line("alpha", real(cfg.alpha));
  line("beta", real(cfg.resolved_beta()));
  line("lambda1", real(cfg.lambda1));
  line("lambda2", real(cfg.lambda2));
  line("gamma", spec ? real(cfg.resolved_gamma(*spec)) : (cfg.gamma ? real(*cfg.gamma) : "auto"));
  line("gae_lambda", real(cfg.gae_lambda));
  line("batch_timesteps", spec ? std::to_string(cfg.resolved_batch(*spec))
                               : (cfg.batch_timesteps ? std::to_string(*cfg.batch_timesteps) : "auto"));
  line("iterations", std::to_string(cfg.iterations));
  line("seed", std::to_string(cfg.seed));
  if (!cfg.demo_path.empty()) line("demos", cfg.demo_path);
  line("hidden", hidden);
  line("max_kl", real(cfg.trpo.max_kl));
  line("cg_iters", std::to_string(cfg.trpo.cg_iters));
  line("cg_damping", real(cfg.trpo.cg_damping));
  line("backtrack_coeff", real(cfg.trpo.backtrack_coeff));
  line("backtrack_steps", std::to_string(cfg.trpo.backtrack_steps));
  line("accept_ratio", real(cfg.trpo.accept_ratio));
  line("fvp_stride", std::to_string(cfg.trpo.fvp_stride));
  line("value_lr", real(cfg.value_lr));
  line("value_epochs", std::to_string(cfg.value_epochs));
  line("value_minibatch", std::to_string(cfg.value_minibatch));
  line("value_updates_trunk", cfg.value_updates_trunk ? "true" : "false");
  line("d_lr", real(cfg.d_lr));
  line("d_steps", std::to_string(cfg.d_steps));
  line("d_batch", std::to_string(cfg.d_batch));
  line("reward_form", to_string(cfg.reward_form));
  line("q_lr", real(cfg.q_lr));
  line("q_steps", std::to_string(cfg.q_steps));
  line("q_batch", std::to_string(cfg.q_batch));
  line("bc_lr", real(cfg.bc_lr));
  line("bc_batch", std::to_string(cfg.bc_batch));
  line("eval_episodes", std::to_string(cfg.eval_episodes));
  line("timing", cfg.timing ? "true" : "false");
  line("checkpoint_every", std::to_string(cfg.checkpoint_every));
  return o.str();
}

// ---------------------------------------------------------------------------
// Metrics CSV

inline void write_metrics_row(std::ostream& out, const IterationMetrics& m) {
  out << m.iter << ',' << format_double(m.true_return) << ',' << format_double(m.composed_reward) << ','
      << format_double(m.d_bce) << ',' << format_double(m.q_nll) << ',' << format_double(m.kl) << ','
      << format_double(m.entropy) << ',' << format_double(m.seconds) << '\n';
}

inline void write_metrics(std::ostream& out, const std::vector<IterationMetrics>& rows) {
  out << kMetricsHeader << '\n';
  for (const auto& m : rows) write_metrics_row(out, m);
}

inline std::vector<IterationMetrics> read_metrics(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kMetricsHeader)
    throw ParseError("metrics header mismatch", 1, 0);
  std::vector<IterationMetrics> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(detail::trim(cell));
    if (f.size() != 8) throw ParseError("expected 8 fields", line_no, 0);
    IterationMetrics m;
    try {
      m.iter = detail::parse_int("iter", f[0]);
      double* dst[] = {&m.true_return, &m.composed_reward, &m.d_bce, &m.q_nll, &m.kl, &m.entropy, &m.seconds};
      for (int i = 0; i < 7; ++i)
        if (!parse_double(f[static_cast<std::size_t>(i) + 1], *dst[i])) throw InputError("not a number");
    } catch (const std::exception& e) {
      throw ParseError(std::string("bad metrics field: ") + e.what(), line_no, 0);
    }
    rows.push_back(m);
  }
  return rows;
}

inline std::vector<IterationMetrics> read_metrics_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open metrics file " + path);
  return read_metrics(in);
}

// ---------------------------------------------------------------------------
// Run manifest

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::ostringstream o;
  for (unsigned int i = 0; i < len; ++i) o << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return o.str();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream o;
  o << in.rdbuf();
  return o.str();
}

inline std::string file_sha256(const std::string& path) { return sha256_hex(read_file(path)); }

struct RunManifest {
  TrainConfig config;
  std::string demo_digest;  // empty when the run uses no demonstrations
  std::string version = kVersion;
  std::map<std::string, std::string> outputs;
};

inline void write_manifest(std::ostream& out, const RunManifest& m) {
  out << "# AGAIL-RUN v1\n";
  out << "version = " << m.version << '\n';
  out << "demo_sha256 = " << (m.demo_digest.empty() ? "none" : m.demo_digest) << '\n';
  for (const auto& [k, v] : m.outputs) out << "output." << k << " = " << v << '\n';
  out << "[config]\n" << config_text(m.config);
}

inline RunManifest read_manifest(std::istream& in) {
  RunManifest m;
  for (const auto& [k, v] : parse_config(in)) {
    if (k == "version") m.version = v;
    else if (k == "demo_sha256") m.demo_digest = v == "none" ? "" : v;
    else if (k.rfind("output.", 0) == 0) m.outputs[k.substr(7)] = v;
    else apply_setting(m.config, k, v);
  }
  return m;
}

inline RunManifest read_manifest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest " + path);
  return read_manifest(in);
}

// ---------------------------------------------------------------------------
// Cross-seed report

struct CurvePoint {
  int iter = 0;
  double mean = 0.0;
  double std = 0.0;  // sample std across runs; 0 for a single run
};

struct Report {
  std::string env;  // empty when no run carried a manifest
  std::vector<double> final_returns;
  double final_mean = 0.0;
  double final_std = 0.0;
  std::vector<CurvePoint> curve;
};

inline double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/**
 * Aggregates true-return curves over runs. The curve covers the iterations
 * every run reached; the summary uses each run's last row. `envs` may hold
 * one entry per run (empty string = unknown) and must agree where known.
 */
inline Report make_report(const std::vector<std::vector<IterationMetrics>>& runs,
                          const std::vector<std::string>& envs = {}) {
  if (runs.empty()) throw InputError("report: no runs");
  Report r;
  for (const auto& e : envs) {
    if (e.empty()) continue;
    if (r.env.empty()) r.env = e;
    else if (e != r.env) throw InputError("report: runs mix environments '" + r.env + "' and '" + e + "'");
  }
  std::size_t common = runs.front().size();
  for (const auto& run : runs) {
    if (run.empty()) throw InputError("report: a run has no metrics rows");
    common = std::min(common, run.size());
    r.final_returns.push_back(run.back().true_return);
  }
  r.final_mean = mean_of(r.final_returns);
  r.final_std = sample_std(r.final_returns);
  for (std::size_t i = 0; i < common; ++i) {
    std::vector<double> v;
    for (const auto& run : runs) v.push_back(run[i].true_return);
    r.curve.push_back({runs.front()[i].iter, mean_of(v), sample_std(v)});
  }
  return r;
}

inline void write_curve(std::ostream& out, const Report& r) {
  out << "iter,mean_return,std_return,lower,upper\n";
  for (const auto& p : r.curve)
    out << p.iter << ',' << format_double(p.mean) << ',' << format_double(p.std) << ','
        << format_double(p.mean - p.std) << ',' << format_double(p.mean + p.std) << '\n';
}

inline void write_summary(std::ostream& out, const Report& r, const std::string& label) {
  std::ostringstream cell;
  cell << std::fixed << std::setprecision(1) << r.final_mean << " +- " << r.final_std;
  out << "| run | env | n | final return |\n|---|---|---|---|\n";
  out << "| " << label << " | " << (r.env.empty() ? "?" : r.env) << " | " << r.final_returns.size() << " | "
      << cell.str() << " |\n";
}

}  // namespace agail

#endif  // AGAIL_EXPERIMENT_HPP_
