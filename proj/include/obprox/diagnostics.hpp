#pragma once

// Optimality and sparsity measurements, plus brute-force oracles for tests.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string_view>
#include <vector>

#include "obprox/errors.hpp"
#include "obprox/lossmodel.hpp"
#include "obprox/prox.hpp"

namespace obprox {

enum class StepType : std::uint8_t { Prox, Orthant, DualAveraging, VarianceReduced };

inline std::string_view to_string(StepType t) {
  switch (t) {
    case StepType::Prox: return "prox";
    case StepType::Orthant: return "orthant";
    case StepType::DualAveraging: return "rda";
    case StepType::VarianceReduced: return "svrg";
  }
  return "?";
}

/// G_eta(x) = (x - Prox_{eta lambda}(x - eta grad f(x))) / eta on the
/// regularized block; the unregularized block carries its plain gradient,
/// which is what the same formula gives with lambda = 0 there.
template <SmoothLoss Loss>
Gradient gradient_mapping(const CompositeObjective<Loss>& objective, const WeightVector& w, double eta,
                          Batch batch) {
  if (!(eta > 0.0)) throw ContractError("gradient mapping needs eta > 0");
  Gradient g;
  objective.loss.value_and_gradient(batch, w, g);
  Gradient out;
  out.x = (w.x - prox_shrink(w.x - eta * g.x, eta * objective.lambda)) / eta;
  out.bias = g.bias;
  return out;
}

template <SmoothLoss Loss>
double gradient_mapping_norm(const CompositeObjective<Loss>& objective, const WeightVector& w, double eta,
                             Batch batch) {
  const Gradient G = gradient_mapping(objective, w, eta, batch);
  return std::sqrt(G.x.squaredNorm() + G.bias.squaredNorm());
}

inline std::size_t count_nonzero(const Eigen::VectorXd& x) {
  std::size_t nz = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) nz += (x[i] != 0.0);
  return nz;
}

/// Percentage of exactly-nonzero entries of x; the bias block is excluded.
inline double density(const Eigen::VectorXd& x) {
  if (x.size() == 0) return 0.0;
  return 100.0 * static_cast<double>(count_nonzero(x)) / static_cast<double>(x.size());
}

inline double density(const WeightVector& w) { return density(w.x); }

struct SupportDelta {
  std::vector<std::size_t> gained;
  std::vector<std::size_t> lost;

  bool empty() const { return gained.empty() && lost.empty(); }
};

inline SupportDelta support_delta(const Eigen::VectorXd& prev, const Eigen::VectorXd& next) {
  if (prev.size() != next.size()) throw ContractError("support_delta: length mismatch");
  SupportDelta d;
  for (Eigen::Index i = 0; i < prev.size(); ++i) {
    const bool was = prev[i] != 0.0;
    const bool is = next[i] != 0.0;
    if (is && !was) d.gained.push_back(static_cast<std::size_t>(i));
    if (was && !is) d.lost.push_back(static_cast<std::size_t>(i));
  }
  return d;
}

inline SupportDelta support_delta(const WeightVector& prev, const WeightVector& next) {
  return support_delta(prev.x, next.x);
}

/// Grid search for argmin_x (1/(2 alpha)) (x - v)^2 + lambda |x| over the
/// points k * resolution covering [-2|v| - 1, 2|v| + 1]. The grid contains 0.
inline double brute_force_prox_oracle(double v, double alpha, double lambda, double grid_resolution) {
  if (!(grid_resolution > 0.0)) throw ContractError("grid resolution must be positive");
  if (!(alpha > 0.0)) throw ContractError("alpha must be positive");
  const double radius = 2.0 * std::abs(v) + 1.0;
  const auto steps = static_cast<std::int64_t>(std::ceil(radius / grid_resolution));
  double best_x = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (std::int64_t k = -steps; k <= steps; ++k) {
    const double x = static_cast<double>(k) * grid_resolution;
    const double obj = (x - v) * (x - v) / (2.0 * alpha) + lambda * std::abs(x);
    if (obj < best) {
      best = obj;
      best_x = x;
    }
  }
  return best_x;
}

struct TraceRecord {
  std::size_t epoch = 0;
  std::uint64_t k = 0;
  double F = 0.0;
  double f = 0.0;
  double density_percent = 0.0;
  double grad_map_norm = 0.0;
  StepType step_type = StepType::Prox;
  double wall_time_seconds = 0.0;
};

/// One record per epoch; record 0 describes the starting point.
struct IterateTrace {
  std::vector<TraceRecord> records;

  bool empty() const { return records.empty(); }
  const TraceRecord& back() const { return records.back(); }
  void append(const TraceRecord& r) {
    if (!records.empty() && r.epoch <= records.back().epoch)
      throw InternalError("trace epochs must be strictly increasing");
    records.push_back(r);
  }
};

}  // namespace obprox
