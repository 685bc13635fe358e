#pragma once

#include <Eigen/Dense>

#include "obprox/errors.hpp"

namespace obprox {

/// Soft-thresholding: the minimizer of (1/2)(x - v)^2 + t|x|. |v| == t maps to 0.
inline double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

/// Coordinatewise soft-thresholding; with threshold alpha*lambda this is
/// Prox_{alpha lambda ||.||_1}.
inline Eigen::VectorXd prox_shrink(const Eigen::VectorXd& trial, double threshold) {
  if (!(threshold >= 0.0)) throw ContractError("shrinkage threshold must be >= 0");
  Eigen::VectorXd out(trial.size());
  for (Eigen::Index i = 0; i < trial.size(); ++i) out[i] = soft_threshold(trial[i], threshold);
  return out;
}

}  // namespace obprox
