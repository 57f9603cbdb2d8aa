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

#ifndef AGAIL_NUMCORE_HPP_
#define AGAIL_NUMCORE_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

namespace agail {

using Vector = Eigen::VectorXd;
// Batches are stored column-per-sample.
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

// Caller supplied something with the wrong shape or outside its domain.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Experiment description is inconsistent (missing demos, bad coefficients).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numeric quantity went non-finite during optimization.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t offset)
      : std::runtime_error(what + " (line " + std::to_string(line) +
                           ", offset " + std::to_string(offset) + ")"),
        line_(line),
        offset_(offset) {}

  std::size_t line() const { return line_; }
  std::size_t offset() const { return offset_; }

 private:
  std::size_t line_;
  std::size_t offset_;
};

/// Derives an independent generator from a base seed and a path of tags,
/// e.g. make_rng(seed, {kRolloutStream, iteration}).
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * tags.size());
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto t : tags) push(t);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

// Size-safe elementwise equality.
inline bool same_values(const Vector& a, const Vector& b) {
  return a.size() == b.size() && std::equal(a.data(), a.data() + a.size(), b.data());
}

// ---------------------------------------------------------------------------
// Text encoding of doubles. Shortest round-trip representation, so a value
// written and read back is bit-identical.

inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view text, double& out) {
  if (text == "nan") {
    out = std::nan("");
    return true;
  }
  auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

// ---------------------------------------------------------------------------
// Multilayer perceptron

enum class Activation { Tanh, Identity, Sigmoid };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "identity";
}

inline Activation activation_from_string(std::string_view s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw InputError("unknown activation '" + std::string(s) + "'");
}

inline void apply_activation(Activation a, Matrix& z) {
  switch (a) {
    case Activation::Tanh: z = z.array().tanh(); break;
    case Activation::Sigmoid: z = (1.0 + (-z.array()).exp()).inverse(); break;
    case Activation::Identity: break;
  }
}

// Derivative expressed through the activation output y.
inline Matrix activation_slope(Activation a, const Matrix& y) {
  switch (a) {
    case Activation::Tanh: return (1.0 - y.array().square()).matrix();
    case Activation::Sigmoid: return (y.array() * (1.0 - y.array())).matrix();
    case Activation::Identity: break;
  }
  return Matrix::Ones(y.rows(), y.cols());
}

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::Identity;

  int in_dim() const { return static_cast<int>(weight.cols()); }
  int out_dim() const { return static_cast<int>(weight.rows()); }
  int num_params() const { return static_cast<int>(weight.size() + bias.size()); }
};

class Mlp {
 public:
  // Per-layer inputs and outputs of one batched forward pass.
  struct Tape {
    std::vector<Matrix> inputs;
    std::vector<Matrix> outputs;
    const Matrix& result() const { return outputs.back(); }
  };

  struct Gradients {
    Vector params;  // same layout as params()
    Matrix input;   // in_dim x batch
  };

  Mlp() = default;

  explicit Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw InputError("mlp needs at least one layer");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.bias.size() != l.weight.rows())
        throw InputError("layer " + std::to_string(i) + ": bias/weight mismatch");
      if (i > 0 && l.in_dim() != layers_[i - 1].out_dim())
        throw InputError("layer " + std::to_string(i) + ": input does not chain");
    }
  }

  /// Builds a network with layer widths `sizes` (input first). Weights and
  /// biases are uniform in +-1/sqrt(fan_in); the last layer is further
  /// multiplied by `output_scale`.
  static Mlp make(const std::vector<int>& sizes, Activation hidden, Activation output,
                  Rng& rng, double output_scale = 1.0) {
    if (sizes.size() < 2) throw InputError("mlp needs input and output sizes");
    std::vector<Layer> layers;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      const int in = sizes[i], out = sizes[i + 1];
      if (in <= 0 || out <= 0) throw InputError("layer sizes must be positive");
      const bool last = i + 2 == sizes.size();
      const double bound = (last ? output_scale : 1.0) / std::sqrt(static_cast<double>(in));
      std::uniform_real_distribution<double> u(-bound, bound);
      Layer l;
      l.weight.resize(out, in);
      for (int r = 0; r < out; ++r)
        for (int c = 0; c < in; ++c) l.weight(r, c) = u(rng);
      l.bias.resize(out);
      for (int r = 0; r < out; ++r) l.bias(r) = u(rng);
      l.activation = last ? output : hidden;
      layers.push_back(std::move(l));
    }
    return Mlp(std::move(layers));
  }

  int input_dim() const { return layers_.front().in_dim(); }
  int output_dim() const { return layers_.back().out_dim(); }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  int num_params() const {
    int n = 0;
    for (const auto& l : layers_) n += l.num_params();
    return n;
  }

  Vector forward(const Vector& x) const {
    Matrix X = x;
    return forward(X).col(0);
  }

  Matrix forward(const Matrix& X) const {
    check_input(X);
    Matrix a = X;
    for (const auto& l : layers_) {
      Matrix z = l.weight * a;
      z.colwise() += l.bias;
      apply_activation(l.activation, z);
      a = std::move(z);
    }
    return a;
  }

  Tape record(const Matrix& X) const {
    check_input(X);
    Tape tape;
    tape.inputs.reserve(layers_.size());
    tape.outputs.reserve(layers_.size());
    const Matrix* a = &X;
    for (const auto& l : layers_) {
      tape.inputs.push_back(*a);
      Matrix z = l.weight * (*a);
      z.colwise() += l.bias;
      apply_activation(l.activation, z);
      tape.outputs.push_back(std::move(z));
      a = &tape.outputs.back();
    }
    return tape;
  }

  /// Gradients of sum_j <upstream.col(j), f(X.col(j))>, summed over the batch.
  Gradients backward(const Tape& tape, const Matrix& upstream) const {
    if (tape.outputs.size() != layers_.size())
      throw InputError("tape does not belong to this network");
    const Matrix& y = tape.result();
    if (upstream.rows() != y.rows() || upstream.cols() != y.cols())
      throw InputError("upstream gradient shape mismatch");
    Gradients g;
    g.params.resize(num_params());
    Matrix delta = upstream;
    int offset = g.params.size();
    for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i) {
      const auto& l = layers_[i];
      delta.array() *= activation_slope(l.activation, tape.outputs[i]).array();
      offset -= l.num_params();
      Eigen::Map<Matrix> dW(g.params.data() + offset, l.out_dim(), l.in_dim());
      dW.noalias() = delta * tape.inputs[i].transpose();
      g.params.segment(offset + l.weight.size(), l.out_dim()) = delta.rowwise().sum();
      Matrix next = l.weight.transpose() * delta;
      delta = std::move(next);
    }
    g.input = std::move(delta);
    return g;
  }

  /// Forward-mode directional derivative of the output along a parameter
  /// direction (and optionally an input direction).
  Matrix jvp(const Tape& tape, const Vector& dparams, const Matrix* dinput = nullptr) const {
    if (dparams.size() != num_params()) throw InputError("direction size mismatch");
    const Index batch = tape.inputs.front().cols();
    Matrix da = dinput ? *dinput : Matrix::Zero(input_dim(), batch);
    int offset = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      Eigen::Map<const Matrix> dW(dparams.data() + offset, l.out_dim(), l.in_dim());
      Matrix dz = dW * tape.inputs[i] + l.weight * da;
      dz.colwise() += dparams.segment(offset + l.weight.size(), l.out_dim());
      dz.array() *= activation_slope(l.activation, tape.outputs[i]).array();
      da = std::move(dz);
      offset += l.num_params();
    }
    return da;
  }

  // Flat layout: for each layer, weight (column-major) then bias.
  Vector params() const {
    Vector p(num_params());
    int offset = 0;
    for (const auto& l : layers_) {
      p.segment(offset, l.weight.size()) = Eigen::Map<const Vector>(l.weight.data(), l.weight.size());
      offset += l.weight.size();
      p.segment(offset, l.bias.size()) = l.bias;
      offset += l.bias.size();
    }
    return p;
  }

  void set_params(const Vector& p) {
    if (p.size() != num_params()) throw InputError("parameter vector size mismatch");
    int offset = 0;
    for (auto& l : layers_) {
      Eigen::Map<Vector>(l.weight.data(), l.weight.size()) = p.segment(offset, l.weight.size());
      offset += l.weight.size();
      l.bias = p.segment(offset, l.bias.size());
      offset += l.bias.size();
    }
  }

 private:
  using Index = Eigen::Index;

  void check_input(const Matrix& X) const {
    if (layers_.empty()) throw InputError("empty network");
    if (X.rows() != input_dim())
      throw InputError("input has " + std::to_string(X.rows()) + " rows, network expects " +
                       std::to_string(input_dim()));
  }

  std::vector<Layer> layers_;
};

/// Single-sample convenience: gradients of <upstream, net(x)>.
inline Mlp::Gradients backward(const Mlp& net, const Vector& x, const Vector& upstream) {
  Matrix X = x;
  Matrix G = upstream;
  return net.backward(net.record(X), G);
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  Vector first_moment;
  Vector second_moment;
  long step_count = 0;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  AdamState(Eigen::Index n, double lr) : first_moment(Vector::Zero(n)), second_moment(Vector::Zero(n)), learning_rate(lr) {}
};

/// One bias-corrected Adam descent step on `params`.
inline void adam_step(Vector& params, const Vector& grads, AdamState& state) {
  if (grads.size() != params.size()) throw InputError("gradient/parameter size mismatch");
  if (!grads.allFinite()) throw TrainingError("non-finite gradient passed to adam_step");
  if (state.first_moment.size() == 0) {
    state.first_moment = Vector::Zero(params.size());
    state.second_moment = Vector::Zero(params.size());
  }
  if (state.first_moment.size() != params.size()) throw InputError("adam state shape mismatch");
  ++state.step_count;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads;
  state.second_moment =
      state.beta2 * state.second_moment + (1.0 - state.beta2) * grads.array().square().matrix();
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  params.array() -= state.learning_rate * (state.first_moment.array() / c1) /
                    ((state.second_moment.array() / c2).sqrt() + state.epsilon);
}

// ---------------------------------------------------------------------------
// Serialization
//
//   mlp <n_layers>
//   layer <in> <out> <activation>
//   <weights, row-major, space separated>
//   <bias, space separated>

namespace detail {

struct LineReader {
  std::istream& in;
  std::size_t line_no = 0;

  std::string next(const char* what) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(std::string("unexpected end of input, expected ") + what, line_no + 1, 0);
    ++line_no;
    return line;
  }
};

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::vector<double> parse_values(const std::string& line, std::size_t expected, std::size_t line_no) {
  auto tokens = split_ws(line);
  if (tokens.size() != expected)
    throw ParseError("expected " + std::to_string(expected) + " values, found " + std::to_string(tokens.size()), line_no, 0);
  std::vector<double> v(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    if (!parse_double(tokens[i], v[i]))
      throw ParseError("malformed number '" + std::string(tokens[i]) + "'", line_no,
                       static_cast<std::size_t>(tokens[i].data() - line.data()));
  }
  return v;
}

inline std::size_t parse_count(std::string_view tok, std::size_t line_no) {
  std::size_t v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw ParseError("malformed count '" + std::string(tok) + "'", line_no, 0);
  return v;
}

}  // namespace detail

inline void write_values(std::ostream& out, const double* data, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i) out << ' ';
    out << format_double(data[i]);
  }
  out << '\n';
}

inline void write_mlp(std::ostream& out, const Mlp& net) {
  out << "mlp " << net.layers().size() << '\n';
  for (const auto& l : net.layers()) {
    out << "layer " << l.in_dim() << ' ' << l.out_dim() << ' ' << to_string(l.activation) << '\n';
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = l.weight;
    write_values(out, rm.data(), rm.size());
    write_values(out, l.bias.data(), l.bias.size());
  }
}

inline Mlp read_mlp(detail::LineReader& reader) {
  auto header = reader.next("mlp header");
  auto tok = detail::split_ws(header);
  if (tok.size() != 2 || tok[0] != "mlp") throw ParseError("expected 'mlp <n_layers>'", reader.line_no, 0);
  const std::size_t n = detail::parse_count(tok[1], reader.line_no);
  if (n == 0) throw ParseError("mlp with zero layers", reader.line_no, 0);
  std::vector<Layer> layers;
  for (std::size_t i = 0; i < n; ++i) {
    auto lh = reader.next("layer header");
    auto lt = detail::split_ws(lh);
    if (lt.size() != 4 || lt[0] != "layer") throw ParseError("expected 'layer <in> <out> <activation>'", reader.line_no, 0);
    const std::size_t in = detail::parse_count(lt[1], reader.line_no);
    const std::size_t out = detail::parse_count(lt[2], reader.line_no);
    Layer l;
    try {
      l.activation = activation_from_string(lt[3]);
    } catch (const InputError& e) {
      throw ParseError(e.what(), reader.line_no, static_cast<std::size_t>(lt[3].data() - lh.data()));
    }
    const std::string w_line = reader.next("weights");
    auto w = detail::parse_values(w_line, in * out, reader.line_no);
    l.weight = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        w.data(), static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    const std::string b_line = reader.next("bias");
    auto b = detail::parse_values(b_line, out, reader.line_no);
    l.bias = Eigen::Map<Vector>(b.data(), static_cast<Eigen::Index>(out));
    layers.push_back(std::move(l));
  }
  try {
    return Mlp(std::move(layers));
  } catch (const InputError& e) {
    throw ParseError(e.what(), reader.line_no, 0);
  }
}

inline Mlp read_mlp(std::istream& in) {
  detail::LineReader reader{in};
  return read_mlp(reader);
}

}  // namespace agail

#endif  // AGAIL_NUMCORE_HPP_
