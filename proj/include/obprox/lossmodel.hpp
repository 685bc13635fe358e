#pragma once

// Smooth losses f, the l1-composite objective F = f + lambda * ||x||_1, and
// the smooth surrogate used on an orthant face.
//
// Every model splits its parameters into a regularized block `x` and an
// unregularized block `bias`. The linear models carry one bias entry; the
// tiny network carries its hidden and output biases there.

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "obprox/dataio.hpp"
#include "obprox/errors.hpp"

namespace obprox {

struct WeightVector {
  Eigen::VectorXd x;
  Eigen::VectorXd bias;

  static WeightVector zeros(std::size_t num_weights, std::size_t num_biases) {
    return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_weights)),
            Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_biases))};
  }

  bool all_finite() const { return x.allFinite() && bias.allFinite(); }

  bool operator==(const WeightVector& o) const {
    return x.size() == o.x.size() && bias.size() == o.bias.size() && x == o.x && bias == o.bias;
  }
};

/// Gradients live in the same (x, bias) layout as the parameters.
using Gradient = WeightVector;

template <class L>
concept SmoothLoss = requires(const L& loss, Batch batch, const WeightVector& w, Gradient& g) {
  { loss.num_weights() } -> std::convertible_to<std::size_t>;
  { loss.num_biases() } -> std::convertible_to<std::size_t>;
  { loss.num_examples() } -> std::convertible_to<std::size_t>;
  { loss.value(batch, w) } -> std::convertible_to<double>;
  // Writes the batch-mean gradient into g (resized as needed), returns the batch-mean loss.
  { loss.value_and_gradient(batch, w, g) } -> std::convertible_to<double>;
};

inline int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

/// log(1 + exp(-m)), accurate for any margin m.
inline double logistic_loss(double margin) {
  if (margin > 30.0) return std::exp(-margin);
  if (margin < -30.0) return -margin;
  if (margin >= 0.0) return std::log1p(std::exp(-margin));
  return -margin + std::log1p(std::exp(margin));
}

/// 1 / (1 + exp(-t)) without overflow.
inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

namespace detail {

inline void require_nonempty(Batch batch) {
  if (batch.empty()) throw ContractError("empty batch");
}

inline void require_shape(const WeightVector& w, std::size_t n, std::size_t nb) {
  if (static_cast<std::size_t>(w.x.size()) != n || static_cast<std::size_t>(w.bias.size()) != nb)
    throw ContractError("weight vector has shape (" + std::to_string(w.x.size()) + ", " +
                        std::to_string(w.bias.size()) + "), expected (" + std::to_string(n) + ", " +
                        std::to_string(nb) + ")");
}

inline double sparse_dot(const SparseExample& ex, const Eigen::VectorXd& x) {
  double s = 0.0;
  for (std::size_t p = 0; p < ex.nnz(); ++p) s += ex.values[p] * x[static_cast<Eigen::Index>(ex.indices[p])];
  return s;
}

inline void resize_like(Gradient& g, std::size_t n, std::size_t nb) {
  g.x.setZero(static_cast<Eigen::Index>(n));
  g.bias.setZero(static_cast<Eigen::Index>(nb));
}

}  // namespace detail

/// Mean logistic loss (1/|B|) sum log(1 + exp(-l_i (x.d_i + b))).
inline double logistic_value(const Dataset& data, Batch batch, const WeightVector& w) {
  detail::require_nonempty(batch);
  detail::require_shape(w, data.num_features(), 1);
  double sum = 0.0;
  for (std::size_t i : batch) {
    const auto& ex = data[i];
    sum += logistic_loss(ex.label * (detail::sparse_dot(ex, w.x) + w.bias[0]));
  }
  return sum / static_cast<double>(batch.size());
}

inline double logistic_value_and_gradient(const Dataset& data, Batch batch, const WeightVector& w,
                                          Gradient& g) {
  detail::require_nonempty(batch);
  detail::require_shape(w, data.num_features(), 1);
  detail::resize_like(g, data.num_features(), 1);
  double sum = 0.0;
  double gb = 0.0;
  for (std::size_t i : batch) {
    const auto& ex = data[i];
    const double m = ex.label * (detail::sparse_dot(ex, w.x) + w.bias[0]);
    sum += logistic_loss(m);
    // d/dz log(1 + exp(-l z)) = -l * sigmoid(-m)
    const double coef = -ex.label * sigmoid(-m);
    for (std::size_t p = 0; p < ex.nnz(); ++p) g.x[static_cast<Eigen::Index>(ex.indices[p])] += coef * ex.values[p];
    gb += coef;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  g.x *= inv;
  g.bias[0] = gb * inv;
  return sum * inv;
}

inline Gradient logistic_gradient(const Dataset& data, Batch batch, const WeightVector& w) {
  Gradient g;
  logistic_value_and_gradient(data, batch, w, g);
  return g;
}

/// Binary logistic regression with one unregularized bias.
class LogisticLoss {
 public:
  explicit LogisticLoss(const Dataset& data) : data_(&data) {}

  std::size_t num_weights() const { return data_->num_features(); }
  std::size_t num_biases() const { return 1; }
  std::size_t num_examples() const { return data_->num_examples(); }
  const Dataset& dataset() const { return *data_; }

  double value(Batch batch, const WeightVector& w) const { return logistic_value(*data_, batch, w); }
  double value_and_gradient(Batch batch, const WeightVector& w, Gradient& g) const {
    return logistic_value_and_gradient(*data_, batch, w, g);
  }

 private:
  const Dataset* data_;
};

/// f_i(x) = 0.5 (x.d_i - l_i)^2 with no bias. Strongly convex whenever the
/// design has full column rank; used for instances with known solutions.
class LeastSquaresLoss {
 public:
  explicit LeastSquaresLoss(const Dataset& data) : data_(&data) {}

  std::size_t num_weights() const { return data_->num_features(); }
  std::size_t num_biases() const { return 0; }
  std::size_t num_examples() const { return data_->num_examples(); }

  double value(Batch batch, const WeightVector& w) const {
    detail::require_nonempty(batch);
    detail::require_shape(w, num_weights(), 0);
    double sum = 0.0;
    for (std::size_t i : batch) {
      const double r = detail::sparse_dot((*data_)[i], w.x) - (*data_)[i].label;
      sum += 0.5 * r * r;
    }
    return sum / static_cast<double>(batch.size());
  }

  double value_and_gradient(Batch batch, const WeightVector& w, Gradient& g) const {
    detail::require_nonempty(batch);
    detail::require_shape(w, num_weights(), 0);
    detail::resize_like(g, num_weights(), 0);
    double sum = 0.0;
    for (std::size_t i : batch) {
      const auto& ex = (*data_)[i];
      const double r = detail::sparse_dot(ex, w.x) - ex.label;
      sum += 0.5 * r * r;
      for (std::size_t p = 0; p < ex.nnz(); ++p) g.x[static_cast<Eigen::Index>(ex.indices[p])] += r * ex.values[p];
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    g.x *= inv;
    return sum * inv;
  }

 private:
  const Dataset* data_;
};

/// One hidden layer (tanh) feeding a logistic output unit:
///   out(d) = w2 . tanh(W1 d + b1) + b2,  loss = log(1 + exp(-l out)).
///
/// Parameter layout: x = [W1 row-major (hidden x inputs), w2 (hidden)],
/// bias = [b1 (hidden), b2]. Only x is l1-regularized.
class TinyNetLoss {
 public:
  TinyNetLoss(const Dataset& data, std::size_t hidden) : data_(&data), hidden_(hidden) {
    if (hidden == 0) throw ContractError("tiny net needs at least one hidden unit");
  }

  std::size_t inputs() const { return data_->num_features(); }
  std::size_t hidden() const { return hidden_; }
  std::size_t num_weights() const { return hidden_ * inputs() + hidden_; }
  std::size_t num_biases() const { return hidden_ + 1; }
  std::size_t num_examples() const { return data_->num_examples(); }

  double value(Batch batch, const WeightVector& w) const {
    return evaluate(batch, w, nullptr);
  }

  double value_and_gradient(Batch batch, const WeightVector& w, Gradient& g) const {
    detail::resize_like(g, num_weights(), num_biases());
    return evaluate(batch, w, &g);
  }

 private:
  double evaluate(Batch batch, const WeightVector& w, Gradient* g) const {
    detail::require_nonempty(batch);
    detail::require_shape(w, num_weights(), num_biases());
    const auto h = static_cast<Eigen::Index>(hidden_);
    const auto d = static_cast<Eigen::Index>(inputs());
    Eigen::VectorXd act(h);
    double sum = 0.0;
    for (std::size_t i : batch) {
      const auto& ex = (*data_)[i];
      for (Eigen::Index j = 0; j < h; ++j) {
        double z = w.bias[j];
        for (std::size_t p = 0; p < ex.nnz(); ++p)
          z += w.x[j * d + static_cast<Eigen::Index>(ex.indices[p])] * ex.values[p];
        act[j] = std::tanh(z);
      }
      const double out = w.x.segment(h * d, h).dot(act) + w.bias[h];
      const double m = ex.label * out;
      sum += logistic_loss(m);
      if (g == nullptr) continue;
      const double delta = -ex.label * sigmoid(-m);
      g->bias[h] += delta;
      for (Eigen::Index j = 0; j < h; ++j) {
        g->x[h * d + j] += delta * act[j];
        const double dz = delta * w.x[h * d + j] * (1.0 - act[j] * act[j]);
        g->bias[j] += dz;
        for (std::size_t p = 0; p < ex.nnz(); ++p)
          g->x[j * d + static_cast<Eigen::Index>(ex.indices[p])] += dz * ex.values[p];
      }
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    if (g != nullptr) {
      g->x *= inv;
      g->bias *= inv;
    }
    return sum * inv;
  }

  const Dataset* data_;
  std::size_t hidden_;
};

inline std::pair<double, Gradient> tiny_net_value_and_gradient(const Dataset& data, Batch batch,
                                                               const WeightVector& params,
                                                               std::size_t hidden) {
  TinyNetLoss net(data, hidden);
  Gradient g;
  const double v = net.value_and_gradient(batch, params, g);
  return {v, std::move(g)};
}

/// F = f + lambda * ||x||_1; the bias block is never penalized.
template <SmoothLoss Loss>
struct CompositeObjective {
  CompositeObjective(Loss l, double lam) : loss(std::move(l)), lambda(lam) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and >= 0");
  }

  Loss loss;
  double lambda;
};

struct ObjectiveValue {
  double F;
  double f;
};

template <SmoothLoss Loss>
ObjectiveValue composite_value(const CompositeObjective<Loss>& objective, Batch batch, const WeightVector& w) {
  const double f = objective.loss.value(batch, w);
  return {f + objective.lambda * w.x.template lpNorm<1>(), f};
}

/// Gradient of f_B + lambda * pattern.x, the smooth form F takes on the
/// orthant face with sign pattern `pattern`.
template <SmoothLoss Loss>
Gradient surrogate_gradient(const CompositeObjective<Loss>& objective, Batch batch, const WeightVector& w,
                            std::span<const std::int8_t> pattern) {
  if (pattern.size() != static_cast<std::size_t>(w.x.size()))
    throw ContractError("sign pattern length " + std::to_string(pattern.size()) + " != " +
                        std::to_string(w.x.size()));
  Gradient g;
  objective.loss.value_and_gradient(batch, w, g);
  for (std::size_t i = 0; i < pattern.size(); ++i)
    g.x[static_cast<Eigen::Index>(i)] += objective.lambda * pattern[i];
  return g;
}

struct IndexSets {
  std::vector<std::size_t> zero;
  std::vector<std::size_t> positive;
  std::vector<std::size_t> negative;

  std::size_t nonzero_count() const { return positive.size() + negative.size(); }

  /// I^{!=0} in ascending order.
  std::vector<std::size_t> nonzero() const {
    std::vector<std::size_t> out;
    out.reserve(nonzero_count());
    std::size_t a = 0, b = 0;
    while (a < positive.size() || b < negative.size()) {
      if (b == negative.size() || (a < positive.size() && positive[a] < negative[b]))
        out.push_back(positive[a++]);
      else
        out.push_back(negative[b++]);
    }
    return out;
  }
};

inline IndexSets index_sets(const Eigen::VectorXd& x) {
  IndexSets s;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (x[i] > 0.0)
      s.positive.push_back(idx);
    else if (x[i] < 0.0)
      s.negative.push_back(idx);
    else
      s.zero.push_back(idx);
  }
  return s;
}

inline IndexSets index_sets(const WeightVector& w) { return index_sets(w.x); }

}  // namespace obprox
