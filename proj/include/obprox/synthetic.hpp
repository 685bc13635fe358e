#pragma once

// Synthetic instances with known answers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

#include "obprox/dataio.hpp"
#include "obprox/errors.hpp"
#include "obprox/lossmodel.hpp"
#include "obprox/prox.hpp"
#include "obprox/rng.hpp"

namespace obprox {

struct PlantedInstance {
  Dataset data;
  Eigen::VectorXd truth;            // planted weights
  std::vector<std::size_t> support;  // ascending
};

namespace detail {

inline std::vector<std::size_t> pick_support(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(idx));
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

/// Logistic data from a planted sparse weight vector: dense Gaussian
/// features, planted entries of magnitude in [1, 2] with random signs, and
/// labels drawn from P(l = +1 | d) = sigmoid(margin_scale * truth.d).
inline PlantedInstance make_synthetic(std::size_t num_features, std::size_t num_examples, std::size_t sparsity,
                                      std::uint64_t seed, double margin_scale = 4.0) {
  if (num_features == 0 || num_examples == 0) throw ConfigError("synthetic data needs n >= 1 and N >= 1");
  if (sparsity == 0 || sparsity > num_features) throw ConfigError("sparsity must lie in [1, n]");
  Rng rng(derive_seed(seed, 0x5e7));
  const auto support = detail::pick_support(num_features, sparsity, rng);
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_features));
  for (std::size_t j : support) {
    const double mag = rng.uniform(1.0, 2.0);
    truth[static_cast<Eigen::Index>(j)] = rng.below(2) ? mag : -mag;
  }
  std::vector<SparseExample> rows(num_examples);
  for (auto& ex : rows) {
    ex.indices.resize(num_features);
    ex.values.resize(num_features);
    double margin = 0.0;
    for (std::size_t j = 0; j < num_features; ++j) {
      ex.indices[j] = j;
      ex.values[j] = rng.normal();
      margin += truth[static_cast<Eigen::Index>(j)] * ex.values[j];
    }
    ex.label = rng.uniform() < sigmoid(margin_scale * margin) ? 1 : -1;
  }
  return {Dataset(std::move(rows), num_features), std::move(truth), support};
}

/// Least-squares instance with a closed-form l1 solution.
///
/// Feature j appears in `copies` examples with value s_j in [2, 3] and in no
/// other example, so f decouples into per-coordinate quadratics a_j x_j^2/2 -
/// c_j x_j + const with a_j = s_j^2 / n and c_j = s_j m_j / n, where m_j is
/// the mean label of the group. The composite minimizer is
/// x*_j = soft_threshold(c_j, lambda) / a_j. Support groups get |m_j| in
/// [0.6, 1] (so |c_j| >= 1.2/n); the others are label-balanced (c_j = 0).
struct QuadraticInstance {
  Dataset data;
  Eigen::VectorXd solution;
  std::vector<std::size_t> support;
  double lambda;
};

inline QuadraticInstance make_quadratic_instance(std::size_t num_features, std::size_t support_size,
                                                 std::size_t copies, double lambda, std::uint64_t seed) {
  if (num_features == 0 || support_size > num_features) throw ConfigError("support size must lie in [0, n]");
  if (copies < 2 || copies % 2 != 0) throw ConfigError("copies must be an even number >= 2");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  const double n = static_cast<double>(num_features);
  if (lambda >= 1.2 / n) throw ConfigError("lambda would zero out the planted support");
  Rng rng(derive_seed(seed, 0x9ad));
  const auto support = detail::pick_support(num_features, support_size, rng);
  std::vector<bool> on(num_features, false);
  for (std::size_t j : support) on[j] = true;

  std::vector<SparseExample> rows;
  rows.reserve(num_features * copies);
  Eigen::VectorXd solution = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_features));
  for (std::size_t j = 0; j < num_features; ++j) {
    const double s = rng.uniform(2.0, 3.0);
    std::size_t positives = copies / 2;
    if (on[j]) {
      // |2p/copies - 1| in [0.6, 1]
      const auto lo = static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(copies)));
      positives = lo + static_cast<std::size_t>(rng.below(copies - lo + 1));
      if (rng.below(2)) positives = copies - positives;
    }
    for (std::size_t c = 0; c < copies; ++c) rows.push_back({{j}, {s}, c < positives ? 1 : -1});
    const double m = (2.0 * static_cast<double>(positives) - static_cast<double>(copies)) / static_cast<double>(copies);
    const double a = s * s / n;
    const double cj = s * m / n;
    solution[static_cast<Eigen::Index>(j)] = soft_threshold(cj, lambda) / a;
  }
  // Interleave groups so that file order carries no structure.
  Rng order(derive_seed(seed, 0x9ae));
  order.shuffle(std::span<SparseExample>(rows));
  return {Dataset(std::move(rows), num_features), std::move(solution), support, lambda};
}

}  // namespace obprox
