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

#ifndef AGAIL_DEMOS_HPP_
#define AGAIL_DEMOS_HPP_

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "agail/envs.hpp"
#include "agail/numcore.hpp"

namespace agail {

// Expert trajectory with some actions hidden. states and rewards are
// complete; actions[t] is empty where the action was masked out.
struct IncompleteTrajectory {
  std::vector<Vector> states;
  std::vector<std::optional<Vector>> actions;
  std::vector<double> rewards;
  bool terminated = false;

  std::size_t size() const { return states.size(); }
  std::size_t present_actions() const {
    return static_cast<std::size_t>(std::count_if(actions.begin(), actions.end(), [](const auto& a) { return a.has_value(); }));
  }
  bool operator==(const IncompleteTrajectory& o) const {
    if (states.size() != o.states.size() || actions.size() != o.actions.size() || rewards != o.rewards ||
        terminated != o.terminated)
      return false;
    for (std::size_t i = 0; i < states.size(); ++i)
      if (!same_values(states[i], o.states[i])) return false;
    for (std::size_t i = 0; i < actions.size(); ++i) {
      if (actions[i].has_value() != o.actions[i].has_value()) return false;
      if (actions[i] && !same_values(*actions[i], *o.actions[i])) return false;
    }
    return true;
  }
};

struct IncompleteDemoSet {
  std::string env;
  double eta = 0.0;
  std::uint64_t source_seed = 0;
  std::vector<IncompleteTrajectory> trajectories;

  std::size_t num_states() const {
    std::size_t n = 0;
    for (const auto& t : trajectories) n += t.size();
    return n;
  }
  std::size_t num_actions() const {
    std::size_t n = 0;
    for (const auto& t : trajectories) n += t.present_actions();
    return n;
  }
  bool operator==(const IncompleteDemoSet& o) const {
    // Bitwise comparison so that NaN-free round-trips are checked exactly.
    return env == o.env && std::bit_cast<std::uint64_t>(eta) == std::bit_cast<std::uint64_t>(o.eta) &&
           source_seed == o.source_seed && trajectories == o.trajectories;
  }
};

/// Rolls out `n_episodes` with a stochastic sampler `sample(obs, rng) ->
/// action`. Episode i draws from its own stream derived from `seed`.
template <typename Sampler>
std::vector<Trajectory> record(Sampler&& sample, const Environment& env, int n_episodes, std::uint64_t seed) {
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(std::max(n_episodes, 0)));
  for (int i = 0; i < n_episodes; ++i) {
    Rng rng = make_rng(seed, {0x7265636fULL, static_cast<std::uint64_t>(i)});
    out.push_back(rollout_episode(env, [&](const Vector& obs) { return sample(obs, rng); }, rng));
  }
  return out;
}

inline std::size_t kept_action_count(double eta, std::size_t n) {
  return static_cast<std::size_t>(std::llround((1.0 - eta) * static_cast<double>(n)));
}

/// Hides actions: in each trajectory exactly round((1 - eta) * n) uniformly
/// chosen timesteps keep their action.
inline IncompleteDemoSet mask(const std::vector<Trajectory>& trajectories, double eta, std::uint64_t seed,
                              std::string env_name = {}) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw InputError("mask: eta must lie in [0, 1]");
  IncompleteDemoSet set;
  set.env = std::move(env_name);
  set.eta = eta;
  set.source_seed = seed;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& t = trajectories[i];
    if (t.actions.size() != t.states.size() || t.rewards.size() != t.states.size())
      throw InputError("mask: trajectory arrays misaligned");
    Rng rng = make_rng(seed, {0x6d61736bULL, i});
    std::vector<std::size_t> idx(t.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t keep = kept_action_count(eta, t.size());
    IncompleteTrajectory it;
    it.states = t.states;
    it.rewards = t.rewards;
    it.terminated = t.terminated;
    it.actions.resize(t.size());
    for (std::size_t k = 0; k < keep; ++k) it.actions[idx[k]] = t.actions[idx[k]];
    set.trajectories.push_back(std::move(it));
  }
  return set;
}

// ---------------------------------------------------------------------------
// File format
//
//   AGAIL-DEMOS v1 env=<name> eta=<float> seed=<int>
//   {"states": [[...], ...], "actions": [[...] | null, ...], "rewards": [...], "terminated": bool}
//   ...one JSON object per trajectory...
//   END <trajectory count>
//
// A masked action is the JSON null token. The END line guards against
// files truncated on a line boundary.

namespace detail {

inline nlohmann::json vec_json(const Vector& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Vector json_vec(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw std::invalid_argument("expected a number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

}  // namespace detail

inline void save(const IncompleteDemoSet& set, std::ostream& out) {
  out << "AGAIL-DEMOS v1 env=" << set.env << " eta=" << format_double(set.eta) << " seed=" << set.source_seed << '\n';
  for (const auto& t : set.trajectories) {
    nlohmann::json j;
    j["states"] = nlohmann::json::array();
    for (const auto& s : t.states) j["states"].push_back(detail::vec_json(s));
    j["actions"] = nlohmann::json::array();
    for (const auto& a : t.actions) j["actions"].push_back(a ? detail::vec_json(*a) : nlohmann::json(nullptr));
    j["rewards"] = t.rewards;
    j["terminated"] = t.terminated;
    out << j.dump() << '\n';
  }
  out << "END " << set.trajectories.size() << '\n';
}

inline void save(const IncompleteDemoSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  save(set, out);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline IncompleteDemoSet load(std::istream& in) {
  detail::LineReader reader{in};
  IncompleteDemoSet set;
  const std::string header = reader.next("demo header");
  auto tok = detail::split_ws(header);
  if (tok.size() != 5 || tok[0] != "AGAIL-DEMOS" || tok[1] != "v1" || !tok[2].starts_with("env=") ||
      !tok[3].starts_with("eta=") || !tok[4].starts_with("seed="))
    throw ParseError("expected 'AGAIL-DEMOS v1 env=<name> eta=<float> seed=<int>'", 1, 0);
  set.env = std::string(tok[2].substr(4));
  if (!parse_double(tok[3].substr(4), set.eta) || !(set.eta >= 0 && set.eta <= 1))
    throw ParseError("bad eta", 1, static_cast<std::size_t>(tok[3].data() - header.data()) + 4);
  {
    auto s = tok[4].substr(5);
    auto res = std::from_chars(s.data(), s.data() + s.size(), set.source_seed);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
      throw ParseError("bad seed", 1, static_cast<std::size_t>(s.data() - header.data()));
  }

  while (true) {
    std::string line = reader.next("trajectory or END line");
    if (line.starts_with("END")) {
      auto et = detail::split_ws(line);
      if (et.size() != 2 || detail::parse_count(et[1], reader.line_no) != set.trajectories.size())
        throw ParseError("END count does not match the number of trajectories", reader.line_no, 0);
      break;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed trajectory: ") + e.what(), reader.line_no, e.byte > 0 ? e.byte - 1 : 0);
    }
    IncompleteTrajectory t;
    try {
      for (const auto& s : j.at("states")) t.states.push_back(detail::json_vec(s));
      for (const auto& a : j.at("actions")) {
        if (a.is_null()) {
          t.actions.emplace_back();
        } else {
          t.actions.emplace_back(detail::json_vec(a));
        }
      }
      t.rewards = j.at("rewards").get<std::vector<double>>();
      t.terminated = j.at("terminated").get<bool>();
    } catch (const std::exception& e) {
      throw ParseError(std::string("malformed trajectory: ") + e.what(), reader.line_no, 0);
    }
    if (t.actions.size() != t.states.size() || t.rewards.size() != t.states.size())
      throw ParseError("trajectory arrays have different lengths", reader.line_no, 0);
    set.trajectories.push_back(std::move(t));
  }
  return set;
}

inline IncompleteDemoSet load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open demo file '" + path + "'");
  return load(in);
}

// ---------------------------------------------------------------------------
// Sampling

/// Uniform with-replacement sample over every demonstrated state.
inline std::vector<Vector> sample_expert_states(const IncompleteDemoSet& set, int batch_size, Rng& rng) {
  const std::size_t total = set.num_states();
  if (total == 0) throw InputError("sample_expert_states: demo set has no states");
  std::vector<Vector> out;
  if (batch_size <= 0) return out;
  // Flat index -> (trajectory, step).
  std::vector<std::size_t> starts;
  starts.reserve(set.trajectories.size());
  std::size_t acc = 0;
  for (const auto& t : set.trajectories) {
    starts.push_back(acc);
    acc += t.size();
  }
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  out.reserve(static_cast<std::size_t>(batch_size));
  for (int b = 0; b < batch_size; ++b) {
    const std::size_t k = pick(rng);
    const std::size_t ti = static_cast<std::size_t>(std::upper_bound(starts.begin(), starts.end(), k) - starts.begin()) - 1;
    out.push_back(set.trajectories[ti].states[k - starts[ti]]);
  }
  return out;
}

struct ExpertPairs {
  std::vector<Vector> states;
  std::vector<Vector> actions;
  bool empty() const { return states.empty(); }
};

// Every (state, action) whose action survived masking, in file order.
inline ExpertPairs demonstrated_pairs(const IncompleteDemoSet& set) {
  ExpertPairs pool;
  for (const auto& t : set.trajectories)
    for (std::size_t i = 0; i < t.size(); ++i)
      if (t.actions[i]) {
        pool.states.push_back(t.states[i]);
        pool.actions.push_back(*t.actions[i]);
      }
  return pool;
}

/// Uniform with-replacement sample over the surviving (s_E, a_E) pairs. An
/// empty result means there is nothing to guide with.
inline ExpertPairs sample_expert_action_pairs(const IncompleteDemoSet& set, int batch_size, Rng& rng) {
  ExpertPairs pool = demonstrated_pairs(set);
  ExpertPairs out;
  if (pool.empty() || batch_size <= 0) return out;
  std::uniform_int_distribution<std::size_t> pick(0, pool.states.size() - 1);
  for (int b = 0; b < batch_size; ++b) {
    const std::size_t k = pick(rng);
    out.states.push_back(pool.states[k]);
    out.actions.push_back(pool.actions[k]);
  }
  return out;
}

}  // namespace agail

#endif  // AGAIL_DEMOS_HPP_
