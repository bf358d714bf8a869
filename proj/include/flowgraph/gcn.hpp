#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "flowgraph/error.hpp"
#include "flowgraph/linalg.hpp"
#include "flowgraph/spectral.hpp"
#include "flowgraph/text.hpp"

namespace flowgraph::gcn {

using linalg::Matrix;

inline constexpr std::size_t kInputDim = 8;
inline constexpr std::size_t kClasses = 2;

enum class Variant {
  gcn,   // first-order propagation with the renormalized adjacency
  cheb,  // order-k Chebyshev filter on the scaled Laplacian
};

inline std::string_view to_string(Variant v) { return v == Variant::gcn ? "gcn" : "cheb"; }

inline Variant parse_variant(std::string_view s) {
  if (s == "gcn") return Variant::gcn;
  if (s == "cheb") return Variant::cheb;
  throw InvalidParameter("unknown GCN variant '" + std::string(s) + "'");
}

/// Two-layer graph convolutional classifier. Each layer holds one weight
/// block per propagation term (a single block for `gcn`, k + 1 blocks for
/// orders 0..k of `cheb`) and a bias row.
struct GcnModel {
  Variant variant = Variant::gcn;
  std::size_t k = 1;
  std::size_t hidden = 16;
  std::uint64_t seed = 0;
  std::vector<Matrix> w0;  // kInputDim x hidden
  std::vector<Matrix> w1;  // hidden x kClasses
  Matrix b0;               // 1 x hidden
  Matrix b1;               // 1 x kClasses

  std::size_t terms() const { return variant == Variant::gcn ? 1 : k + 1; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& m : w0) n += m.size();
    for (const auto& m : w1) n += m.size();
    return n + b0.size() + b1.size();
  }

  std::vector<Matrix*> parameters() {
    std::vector<Matrix*> p;
    for (auto& m : w0) p.push_back(&m);
    for (auto& m : w1) p.push_back(&m);
    p.push_back(&b0);
    p.push_back(&b1);
    return p;
  }

  friend bool operator==(const GcnModel&, const GcnModel&) = default;
};

namespace detail {

/// Uniform double in [0, 1) from the top 53 bits; independent of the
/// standard library's distribution implementations.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline void glorot_fill(Matrix& m, std::mt19937_64& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (double& v : m.data()) v = s * (2.0 * unit_uniform(rng) - 1.0);
}

}  // namespace detail

/// Glorot-uniform weights, zero biases.
inline GcnModel init_model(Variant variant, std::size_t k, std::size_t hidden, std::uint64_t seed) {
  if (hidden == 0) throw InvalidParameter("hidden size must be >= 1");
  if (variant == Variant::cheb && k < 1) throw InvalidParameter("Chebyshev order k must be >= 1");
  GcnModel m;
  m.variant = variant;
  m.k = variant == Variant::gcn ? 1 : k;
  m.hidden = hidden;
  m.seed = seed;
  std::mt19937_64 rng(seed);
  for (std::size_t t = 0; t < m.terms(); ++t) {
    m.w0.emplace_back(kInputDim, hidden);
    detail::glorot_fill(m.w0.back(), rng);
  }
  for (std::size_t t = 0; t < m.terms(); ++t) {
    m.w1.emplace_back(hidden, kClasses);
    detail::glorot_fill(m.w1.back(), rng);
  }
  m.b0 = Matrix(1, hidden);
  m.b1 = Matrix(1, kClasses);
  return m;
}

/// One graph ready for the network: propagation operator (renormalized
/// adjacency or scaled Laplacian), node features, labels, and the cached
/// first-layer propagation terms of the features.
struct GraphInput {
  Variant variant = Variant::gcn;
  std::size_t k = 1;
  Matrix propagator;
  Matrix features;             // n x kInputDim
  std::vector<int> labels;     // 0 normal, 1 attack
  std::vector<Matrix> feature_terms;

  std::size_t nodes() const { return features.rows(); }
};

/// Propagation terms of `h`: [A h] for gcn, [T_0 h, ..., T_k h] for cheb.
inline std::vector<Matrix> propagate(Variant variant, std::size_t k, const Matrix& propagator, const Matrix& h) {
  if (variant == Variant::gcn) return {linalg::matmul(propagator, h)};
  return spectral::chebyshev_basis(propagator, h, k);
}

/// Adjoint of `propagate`: sum_j S_j^T g_j. Both operators are symmetric.
inline Matrix propagate_adjoint(Variant variant, const Matrix& propagator, const std::vector<Matrix>& grads) {
  if (variant == Variant::gcn) return linalg::matmul(propagator, grads.front());
  return spectral::chebyshev_combine(propagator, grads);
}

inline GraphInput make_input(Variant variant, std::size_t k, Matrix propagator, Matrix features,
                             std::vector<int> labels) {
  if (features.cols() != kInputDim) throw InvalidParameter("feature dimension must be 8");
  if (features.rows() == 0) throw InvalidParameter("graph must have at least one node");
  if (propagator.rows() != features.rows() || propagator.cols() != features.rows() ||
      labels.size() != features.rows())
    throw InvalidParameter("graph input shape mismatch");
  GraphInput in;
  in.variant = variant;
  in.k = variant == Variant::gcn ? 1 : k;
  in.propagator = std::move(propagator);
  in.features = std::move(features);
  in.labels = std::move(labels);
  in.feature_terms = propagate(in.variant, in.k, in.propagator, in.features);
  return in;
}

template <typename Node>
int node_label(const Node& n) {
  if constexpr (requires { n.hard_label; })
    return static_cast<int>(n.hard_label);
  else
    return static_cast<int>(n.label);
}

/// Builds the network input of a SnapshotGraph or ClusteredGraph from its
/// scaled node features and (hard) labels.
template <typename Graph>
GraphInput prepare(const Graph& graph, Variant variant, std::size_t k, bool weighted_adjacency = false) {
  const std::size_t n = graph.nodes.size();
  Matrix x(n, kInputDim);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < kInputDim; ++d) x(i, d) = graph.nodes[i].features[d];
    labels[i] = node_label(graph.nodes[i]);
  }
  Matrix prop = variant == Variant::gcn ? spectral::normalize_renormalized(graph, weighted_adjacency)
                                        : spectral::scaled_laplacian(graph, weighted_adjacency).matrix;
  return make_input(variant, k, std::move(prop), std::move(x), std::move(labels));
}

struct Activations {
  Matrix pre;     // first-layer pre-activation
  Matrix hidden;  // relu(pre)
  std::vector<Matrix> hidden_terms;
  Matrix scores;
  Matrix probs;
};

inline void add_row(Matrix& m, const Matrix& row) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) += row(0, j);
}

inline Matrix column_sums(const Matrix& m) {
  Matrix s(1, m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) s(0, j) += m(i, j);
  return s;
}

inline void check_compatible(const GcnModel& model, const GraphInput& input) {
  if (model.variant != input.variant || model.terms() != input.feature_terms.size())
    throw InvalidParameter("graph input was prepared for a different model variant");
}

inline Matrix softmax_rows(const Matrix& z) {
  Matrix p(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double m = z(i, 0);
    for (std::size_t c = 1; c < z.cols(); ++c) m = std::max(m, z(i, c));
    double s = 0.0;
    for (std::size_t c = 0; c < z.cols(); ++c) s += (p(i, c) = std::exp(z(i, c) - m));
    for (std::size_t c = 0; c < z.cols(); ++c) p(i, c) /= s;
  }
  return p;
}

inline Activations forward_full(const GcnModel& model, const GraphInput& input) {
  check_compatible(model, input);
  Activations a;
  a.pre = Matrix(input.nodes(), model.hidden);
  for (std::size_t t = 0; t < model.terms(); ++t) a.pre += linalg::matmul(input.feature_terms[t], model.w0[t]);
  add_row(a.pre, model.b0);
  a.hidden = a.pre;
  for (double& v : a.hidden.data()) v = v > 0.0 ? v : 0.0;
  a.hidden_terms = propagate(model.variant, model.k, input.propagator, a.hidden);
  a.scores = Matrix(input.nodes(), kClasses);
  for (std::size_t t = 0; t < model.terms(); ++t) a.scores += linalg::matmul(a.hidden_terms[t], model.w1[t]);
  add_row(a.scores, model.b1);
  a.probs = softmax_rows(a.scores);
  return a;
}

struct Output {
  Matrix scores;  // n x 2
  Matrix probs;   // row-wise softmax of scores
};

inline Output forward(const GcnModel& model, const GraphInput& input) {
  auto a = forward_full(model, input);
  return {std::move(a.scores), std::move(a.probs)};
}

/// Argmax class per node; ties go to normal.
inline std::vector<int> predict(const GcnModel& model, const GraphInput& input) {
  const auto out = forward(model, input);
  std::vector<int> pred(input.nodes());
  for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = out.probs(i, 1) > out.probs(i, 0) ? 1 : 0;
  return pred;
}

using ClassWeights = std::array<double, kClasses>;

struct Gradients {
  std::vector<Matrix> w0;
  std::vector<Matrix> w1;
  Matrix b0;
  Matrix b1;

  std::vector<const Matrix*> blocks() const {
    std::vector<const Matrix*> g;
    for (const auto& m : w0) g.push_back(&m);
    for (const auto& m : w1) g.push_back(&m);
    g.push_back(&b0);
    g.push_back(&b1);
    return g;
  }
};

/// Class-weighted cross-entropy, normalized by the total weight of all
/// nodes across `batch`. Several graphs behave as one block-diagonal graph.
/// Fills `grads` when non-null.
inline double loss_and_gradients(const GcnModel& model, std::span<const GraphInput> batch,
                                 const ClassWeights& weights, Gradients* grads) {
  double total_weight = 0.0;
  for (const auto& g : batch)
    for (int y : g.labels) total_weight += weights[static_cast<std::size_t>(y)];
  if (!(total_weight > 0.0)) return 0.0;

  if (grads) {
    grads->w0.assign(model.terms(), Matrix(kInputDim, model.hidden));
    grads->w1.assign(model.terms(), Matrix(model.hidden, kClasses));
    grads->b0 = Matrix(1, model.hidden);
    grads->b1 = Matrix(1, kClasses);
  }
  double loss = 0.0;
  for (const auto& g : batch) {
    const auto a = forward_full(model, g);
    Matrix dz(g.nodes(), kClasses);
    for (std::size_t i = 0; i < g.nodes(); ++i) {
      const auto y = static_cast<std::size_t>(g.labels[i]);
      const double w = weights[y] / total_weight;
      loss -= w * std::log(a.probs(i, y));
      for (std::size_t c = 0; c < kClasses; ++c) dz(i, c) = w * (a.probs(i, c) - (c == y ? 1.0 : 0.0));
    }
    if (!grads) continue;
    grads->b1 += column_sums(dz);
    std::vector<Matrix> dterms;
    dterms.reserve(model.terms());
    for (std::size_t t = 0; t < model.terms(); ++t) {
      grads->w1[t] += linalg::matmul_tn(a.hidden_terms[t], dz);
      dterms.push_back(linalg::matmul_nt(dz, model.w1[t]));
    }
    Matrix dpre = propagate_adjoint(model.variant, g.propagator, dterms);
    for (std::size_t i = 0; i < dpre.size(); ++i)
      if (!(a.pre.data()[i] > 0.0)) dpre.data()[i] = 0.0;
    grads->b0 += column_sums(dpre);
    for (std::size_t t = 0; t < model.terms(); ++t) grads->w0[t] += linalg::matmul_tn(g.feature_terms[t], dpre);
  }
  return loss;
}

inline double loss(const GcnModel& model, std::span<const GraphInput> batch, const ClassWeights& weights) {
  return loss_and_gradients(model, batch, weights, nullptr);
}

/// N / (2 N_c) per class over every node in `batch`; absent classes get 0.
inline ClassWeights inverse_frequency_weights(std::span<const GraphInput> batch) {
  std::array<double, kClasses> counts{};
  double total = 0.0;
  for (const auto& g : batch)
    for (int y : g.labels) {
      counts[static_cast<std::size_t>(y)] += 1.0;
      total += 1.0;
    }
  ClassWeights w{};
  for (std::size_t c = 0; c < kClasses; ++c)
    w[c] = counts[c] > 0.0 ? total / (static_cast<double>(kClasses) * counts[c]) : 0.0;
  return w;
}

enum class Optimizer { adam, sgd };

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t epochs = 200;
  Optimizer optimizer = Optimizer::adam;
  std::optional<ClassWeights> class_weights;  // inverse frequency when unset
};

struct TrainResult {
  std::vector<double> loss_trace;  // loss of the parameters entering each epoch
  ClassWeights class_weights{};
};

/// Full-batch training over all graphs at once. Deterministic for a given
/// model, batch and config.
inline TrainResult train(GcnModel& model, std::span<const GraphInput> batch, const TrainConfig& config) {
  if (batch.empty()) throw InvalidParameter("training needs at least one graph");
  for (const auto& g : batch) check_compatible(model, g);
  TrainResult result;
  result.class_weights = config.class_weights.value_or(inverse_frequency_weights(batch));

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEpsilon = 1e-8;
  auto params = model.parameters();
  std::vector<Matrix> m1, m2;
  for (auto* p : params) {
    m1.emplace_back(p->rows(), p->cols());
    m2.emplace_back(p->rows(), p->cols());
  }

  Gradients grads;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double l = loss_and_gradients(model, batch, result.class_weights, &grads);
    if (!std::isfinite(l)) throw NonFiniteLoss(epoch);
    result.loss_trace.push_back(l);

    const auto g = grads.blocks();
    const double t = static_cast<double>(epoch + 1);
    const double c1 = 1.0 - std::pow(kBeta1, t), c2 = 1.0 - std::pow(kBeta2, t);
    for (std::size_t p = 0; p < params.size(); ++p) {
      auto& w = params[p]->data();
      const auto& gd = g[p]->data();
      for (std::size_t i = 0; i < w.size(); ++i) {
        if (config.optimizer == Optimizer::sgd) {
          w[i] -= config.learning_rate * gd[i];
          continue;
        }
        double& m = m1[p].data()[i];
        double& v = m2[p].data()[i];
        m = kBeta1 * m + (1.0 - kBeta1) * gd[i];
        v = kBeta2 * v + (1.0 - kBeta2) * gd[i] * gd[i];
        w[i] -= config.learning_rate * (m / c1) / (std::sqrt(v / c2) + kEpsilon);
      }
    }
  }
  return result;
}

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

/// Compares analytic gradients against central finite differences for every
/// parameter. The relative error uses max(|analytic|, |numeric|, floor) as
/// denominator so that entries which vanish analytically are judged on
/// their absolute discrepancy.
inline GradientCheck gradient_check(GcnModel model, const GraphInput& input, const ClassWeights& weights = {1.0, 1.0},
                                    double step = 1e-6, double floor = 1e-7) {
  std::span<const GraphInput> batch(&input, 1);
  Gradients analytic;
  loss_and_gradients(model, batch, weights, &analytic);
  const auto g = analytic.blocks();

  GradientCheck out;
  auto params = model.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& w = params[p]->data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double orig = w[i];
      w[i] = orig + step;
      const double up = loss(model, batch, weights);
      w[i] = orig - step;
      const double down = loss(model, batch, weights);
      w[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = g[p]->data()[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      out.max_relative_error = std::max(out.max_relative_error, std::abs(a - numeric) / denom);
      ++out.checked;
    }
  }
  return out;
}

/// Binary classification metrics with attack (1) as the positive class.
struct Metrics {
  std::array<std::uint64_t, kClasses> support{};
  std::array<std::array<std::uint64_t, kClasses>, kClasses> confusion{};  // [truth][pred]
  double accuracy = 0.0;
  std::array<double, kClasses> precision{};
  std::array<double, kClasses> recall{};
  double balanced_accuracy = 0.0;

  void add(int truth, int pred) {
    ++confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)];
    ++support[static_cast<std::size_t>(truth)];
  }

  /// Derives the ratio metrics. Balanced accuracy averages recall over the
  /// classes that have support.
  void finalize() {
    std::uint64_t total = 0, correct = 0;
    double recall_sum = 0.0;
    int present = 0;
    for (std::size_t c = 0; c < kClasses; ++c) {
      total += support[c];
      correct += confusion[c][c];
      std::uint64_t predicted = 0;
      for (std::size_t t = 0; t < kClasses; ++t) predicted += confusion[t][c];
      precision[c] = predicted ? static_cast<double>(confusion[c][c]) / static_cast<double>(predicted) : 0.0;
      recall[c] = support[c] ? static_cast<double>(confusion[c][c]) / static_cast<double>(support[c]) : 0.0;
      if (support[c]) {
        recall_sum += recall[c];
        ++present;
      }
    }
    accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    balanced_accuracy = present ? recall_sum / present : 0.0;
  }
};

inline Metrics evaluate(const GcnModel& model, std::span<const GraphInput> batch) {
  Metrics m;
  for (const auto& g : batch) {
    const auto pred = predict(model, g);
    for (std::size_t i = 0; i < pred.size(); ++i) m.add(g.labels[i], pred[i]);
  }
  m.finalize();
  return m;
}

inline constexpr std::string_view kModelMagic = "flowgraph-gcn";

/// Plain-text model format:
///
///   flowgraph-gcn 1
///   variant <gcn|cheb>
///   k <order>
///   hidden <h>
///   seed <seed>
///   features 8
///   classes 2
///   w0 <term> <rows> <cols>      followed by <rows> lines of <cols> values
///   ...
///   w1 <term> <rows> <cols>
///   ...
///   b0 0 1 <h>
///   b1 0 1 2
///
/// Values are written in shortest round-trip decimal form, so a saved model
/// loads bit-identical.
inline void save_model(std::ostream& out, const GcnModel& model) {
  out << kModelMagic << " 1\n"
      << "variant " << to_string(model.variant) << '\n'
      << "k " << model.k << '\n'
      << "hidden " << model.hidden << '\n'
      << "seed " << model.seed << '\n'
      << "features " << kInputDim << '\n'
      << "classes " << kClasses << '\n';
  auto write = [&](std::string_view name, const std::vector<Matrix>& blocks) {
    for (std::size_t t = 0; t < blocks.size(); ++t) {
      const auto& m = blocks[t];
      out << name << ' ' << t << ' ' << m.rows() << ' ' << m.cols() << '\n';
      for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? " " : "") << text::format_double(m(r, c));
        out << '\n';
      }
    }
  };
  write("w0", model.w0);
  write("w1", model.w1);
  write("b0", {model.b0});
  write("b1", {model.b1});
}

inline GcnModel load_model(std::istream& in) {
  auto expect_key = [&](std::string_view key) {
    std::string k;
    if (!(in >> k) || k != key) throw FormatError("model file: expected '" + std::string(key) + "'");
  };
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kModelMagic || version != 1)
    throw FormatError("model file: bad header");
  GcnModel m;
  std::string variant;
  std::size_t features = 0, classes = 0;
  expect_key("variant");
  in >> variant;
  m.variant = parse_variant(variant);
  expect_key("k");
  in >> m.k;
  expect_key("hidden");
  in >> m.hidden;
  expect_key("seed");
  in >> m.seed;
  expect_key("features");
  in >> features;
  expect_key("classes");
  in >> classes;
  if (!in || features != kInputDim || classes != kClasses || m.hidden == 0)
    throw FormatError("model file: unsupported shape");
  auto read = [&](std::string_view name, std::vector<Matrix>& blocks, std::size_t count, std::size_t rows,
                  std::size_t cols) {
    for (std::size_t t = 0; t < count; ++t) {
      std::size_t term = 0, r = 0, c = 0;
      expect_key(name);
      if (!(in >> term >> r >> c) || term != t || r != rows || c != cols)
        throw FormatError("model file: bad block header for " + std::string(name));
      Matrix w(rows, cols);
      for (double& v : w.data()) {
        std::string tok;
        in >> tok;
        auto parsed = text::parse_number<double>(tok);
        if (!parsed) throw FormatError("model file: bad value '" + tok + "'");
        v = *parsed;
      }
      blocks.push_back(std::move(w));
    }
  };
  read("w0", m.w0, m.terms(), kInputDim, m.hidden);
  read("w1", m.w1, m.terms(), m.hidden, kClasses);
  std::vector<Matrix> bias;
  read("b0", bias, 1, 1, m.hidden);
  read("b1", bias, 1, 1, kClasses);
  m.b0 = std::move(bias[0]);
  m.b1 = std::move(bias[1]);
  return m;
}

}  // namespace flowgraph::gcn
