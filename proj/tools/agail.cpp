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

// agail: expert | record | train | report

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "agail/demos.hpp"
#include "agail/experiment.hpp"
#include "agail/policy.hpp"
#include "agail/trainer.hpp"

namespace fs = std::filesystem;
using namespace agail;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;

fs::path output_root() {
  const char* env = std::getenv("AGAIL_OUT_DIR");
  return env && *env ? fs::path(env) : fs::path("runs");
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void save_policy(const fs::path& p, const StochasticPolicy& policy, const TrainConfig& cfg) {
  ensure_parent(p);
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  write_policy(out, policy, cfg.env, to_string(cfg.algorithm));
}

PolicyCheckpoint load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open policy checkpoint " + path);
  return read_policy(in);
}

struct ExpertArgs {
  std::string env = "cartpole";
  int iters = 100;
  std::uint64_t seed = 0;
  std::string out;
  int eval_episodes = 100;
};

int cmd_expert(const ExpertArgs& a) {
  TrainConfig cfg;
  cfg.algorithm = Algorithm::TRPO;
  cfg.env = a.env;
  cfg.iterations = a.iters;
  cfg.seed = a.seed;
  make_env(cfg.env);
  const fs::path out = a.out.empty() ? output_root() / "experts" / (a.env + "_seed" + std::to_string(a.seed) + ".policy")
                                     : fs::path(a.out);
  TrainHooks hooks;
  hooks.on_divergence = [&](const StochasticPolicy& p) {
    fs::path d = out;
    save_policy(d.replace_extension(".diverged.policy"), p, cfg);
  };
  auto res = train_trpo_true(cfg, hooks);
  save_policy(out, res.policy, cfg);
  auto env = make_env(cfg.env);
  auto ev = evaluate(res.policy, *env, a.eval_episodes, cfg.seed + 1000);
  std::cout << "expert " << out.string() << " return " << ev.mean << " +- " << ev.std << " over " << a.eval_episodes
            << " episodes\n";
  return kExitOk;
}

struct RecordArgs {
  std::string policy;
  std::string env;
  int episodes = 25;
  double eta = 0.0;
  std::uint64_t seed = 0;
  bool greedy = false;
  std::string out;
};

int cmd_record(const RecordArgs& a) {
  if (!(a.eta >= 0 && a.eta <= 1)) throw InputError("--eta must lie in [0, 1]");
  if (a.episodes <= 0) throw InputError("--episodes must be positive");
  PolicyCheckpoint ck = load_policy(a.policy);
  const std::string env_name = a.env.empty() ? ck.env : a.env;
  if (env_name != ck.env) throw InputError("checkpoint was trained on '" + ck.env + "', not '" + env_name + "'");
  auto env = make_env(env_name);
  const StochasticPolicy& pi = ck.policy;
  auto trajs = record(
      [&](const Vector& obs, Rng& rng) { return a.greedy ? pi.mode(obs) : pi.act(obs, rng).first; }, *env, a.episodes,
      a.seed);
  IncompleteDemoSet set = mask(trajs, a.eta, a.seed, env_name);
  const fs::path out = a.out.empty() ? output_root() / "demos" /
                                           (env_name + "_eta" + format_double(a.eta) + "_seed" +
                                            std::to_string(a.seed) + ".demos")
                                     : fs::path(a.out);
  ensure_parent(out);
  save(set, out.string());
  double ret = 0.0;
  for (const auto& t : trajs) ret += true_return(t, 1.0);
  std::cout << "recorded " << set.trajectories.size() << " episodes (" << set.num_states() << " states, "
            << set.num_actions() << " actions kept, mean return " << ret / static_cast<double>(trajs.size())
            << ") to " << out.string() << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string config;
  std::optional<std::string> algo, env, demos;
  std::optional<double> eta;
  std::optional<std::uint64_t> seed;
  std::optional<int> iters;
  std::string out;
  std::vector<std::string> sets;
};

int cmd_train(const TrainArgs& a) {
  TrainConfig cfg;
  if (!a.config.empty()) apply_settings(cfg, parse_config_file(a.config));
  if (a.algo) apply_setting(cfg, "algorithm", *a.algo);
  if (a.env) cfg.env = *a.env;
  if (a.eta) cfg.eta = *a.eta;
  if (a.seed) cfg.seed = *a.seed;
  if (a.iters) cfg.iterations = *a.iters;
  if (a.demos) cfg.demo_path = *a.demos;
  for (const auto& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw InputError("--set expects key=value, got '" + s + "'");
    apply_setting(cfg, detail::trim(s.substr(0, eq)), detail::trim(s.substr(eq + 1)));
  }
  cfg.validate();
  make_env(cfg.env);

  std::optional<IncompleteDemoSet> demos;
  std::string digest;
  if (cfg.algorithm != Algorithm::TRPO) {
    if (cfg.demo_path.empty()) throw ConfigError(to_string(cfg.algorithm) + " needs --demos");
    digest = file_sha256(cfg.demo_path);
    demos = load(cfg.demo_path);
  }

  const fs::path dir = a.out.empty() ? output_root() / (to_string(cfg.algorithm) + "_" + cfg.env + "_eta" +
                                                        format_double(cfg.eta) + "_seed" + std::to_string(cfg.seed))
                                     : fs::path(a.out);
  fs::create_directories(dir);
  RunManifest manifest;
  manifest.config = cfg;
  manifest.demo_digest = digest;
  manifest.outputs = {{"metrics", (dir / "metrics.csv").string()}, {"policy", (dir / "final.policy").string()}};
  {
    std::ofstream mf(dir / "manifest.txt");
    write_manifest(mf, manifest);
  }

  std::ofstream csv(dir / "metrics.csv");
  csv << kMetricsHeader << '\n';
  TrainHooks hooks;
  hooks.on_iteration = [&](const IterationMetrics& m, const StochasticPolicy& p) {
    write_metrics_row(csv, m);
    csv.flush();
    const int done = m.iter + 1;
    if (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0)
      save_policy(dir / ("checkpoint_" + std::to_string(done) + ".policy"), p, cfg);
  };
  hooks.on_divergence = [&](const StochasticPolicy& p) { save_policy(dir / "diverged.policy", p, cfg); };
  TrainResult res;
  try {
    res = train(cfg, demos ? &*demos : nullptr, hooks);
  } catch (const DivergenceError& e) {
    std::cerr << "train: diverged: " << e.what() << "\n";
    return kExitDiverged;
  }
  save_policy(dir / "final.policy", res.policy, cfg);
  std::cout << "run " << dir.string() << ": " << res.metrics.size() << " iterations, final return "
            << (res.metrics.empty() ? 0.0 : res.metrics.back().true_return) << "\n";
  return kExitOk;
}

struct ReportArgs {
  std::vector<std::string> files;
  std::string out;
  std::string label = "run";
};

int cmd_report(const ReportArgs& a) {
  std::vector<std::vector<IterationMetrics>> runs;
  std::vector<std::string> envs;
  for (const auto& f : a.files) {
    runs.push_back(read_metrics_file(f));
    const fs::path manifest = fs::path(f).parent_path() / "manifest.txt";
    envs.push_back(fs::exists(manifest) ? read_manifest_file(manifest.string()).config.env : "");
  }
  Report r = make_report(runs, envs);
  write_summary(std::cout, r, a.label);
  const fs::path out = a.out.empty() ? output_root() / "report_curve.csv" : fs::path(a.out);
  ensure_parent(out);
  std::ofstream curve(out);
  if (!curve) throw std::runtime_error("cannot write " + out.string());
  write_curve(curve, r);
  std::cout << "curve data: " << out.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Imitation learning from incomplete demonstrations"};
  app.require_subcommand(1);

  ExpertArgs ea;
  auto* expert = app.add_subcommand("expert", "Train a TRPO expert on the true reward");
  expert->add_option("--env", ea.env, "cartpole, pendulum or pointmass");
  expert->add_option("--iters", ea.iters)->check(CLI::NonNegativeNumber);
  expert->add_option("--seed", ea.seed);
  expert->add_option("--out", ea.out, "checkpoint path");
  expert->add_option("--eval-episodes", ea.eval_episodes)->check(CLI::PositiveNumber);

  RecordArgs ra;
  auto* rec = app.add_subcommand("record", "Record expert demonstrations and mask actions");
  rec->add_option("--policy", ra.policy, "expert checkpoint")->required();
  rec->add_option("--env", ra.env, "defaults to the checkpoint's environment");
  rec->add_option("--episodes", ra.episodes);
  rec->add_option("--eta", ra.eta, "fraction of actions hidden");
  rec->add_option("--seed", ra.seed);
  rec->add_flag("--greedy", ra.greedy, "act with the policy mode instead of sampling");
  rec->add_option("--out", ra.out, "demo file path");

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train agail, gail, state_gail, trpo or bc");
  tr->add_option("--config", ta.config, "key = value config file")->check(CLI::ExistingFile);
  tr->add_option("--algo", ta.algo);
  tr->add_option("--env", ta.env);
  tr->add_option("--eta", ta.eta);
  tr->add_option("--seed", ta.seed);
  tr->add_option("--iters", ta.iters);
  tr->add_option("--demos", ta.demos);
  tr->add_option("--out", ta.out, "run directory");
  tr->add_option("--set", ta.sets, "extra key=value overrides");

  ReportArgs pa;
  auto* rep = app.add_subcommand("report", "Summarise metrics files across seeds");
  rep->add_option("files", pa.files, "metrics.csv files")->required()->check(CLI::ExistingFile);
  rep->add_option("--out", pa.out, "curve CSV path");
  rep->add_option("--label", pa.label);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*expert) return cmd_expert(ea);
    if (*rec) return cmd_record(ra);
    if (*tr) return cmd_train(ta);
    if (*rep) return cmd_report(pa);
  } catch (const DivergenceError& e) {
    std::cerr << "error: diverged: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
