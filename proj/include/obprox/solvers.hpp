#pragma once

// Stochastic solvers for min f(x) + lambda ||x||_1: the orthant-based
// proximal method (Prox-SG steps interleaved with orthant-face projected
// steps) and the Prox-SG, RDA and Prox-SVRG baselines.
//
// Each step is a pure function of the current iterate, the objective and a
// batch; run_solver() owns the epoch loop, the batch plans, the step-size
// schedule and the trace.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "obprox/dataio.hpp"
#include "obprox/diagnostics.hpp"
#include "obprox/errors.hpp"
#include "obprox/lossmodel.hpp"
#include "obprox/prox.hpp"
#include "obprox/rng.hpp"

namespace obprox {

/// Marks N_P or N_O as unbounded.
inline constexpr std::uint64_t kInfinite = std::numeric_limits<std::uint64_t>::max();

enum class SolverKind : std::uint8_t { ProxSG, RDA, ProxSVRG, OBProx };

inline std::string_view to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::ProxSG: return "prox_sg";
    case SolverKind::RDA: return "rda";
    case SolverKind::ProxSVRG: return "prox_svrg";
    case SolverKind::OBProx: return "obprox";
  }
  return "?";
}

enum class StepRule : std::uint8_t {
  EpochDecay,  // alpha0 * decay^epoch
  InverseK,    // alpha0 / (1 + k / inverse_k_scale)
};

struct SolverConfig {
  double lambda = 0.0;
  double alpha0 = 1.0;
  double decay_factor = 0.995;
  StepRule step_rule = StepRule::EpochDecay;
  double inverse_k_scale = 0.0;  // iterations; 0 means one epoch
  std::size_t batch_size = 1;
  std::uint64_t n_p = kInfinite;
  std::uint64_t n_o = 0;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  double rda_gamma = 1.0;
  std::uint64_t svrg_inner = 0;  // iterations between snapshots; 0 means one epoch
  double init_scale = 0.0;       // x0 ~ U(-s, s) on the regularized block; 0 gives x0 = 0

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and >= 0");
    if (!(alpha0 > 0.0) || !std::isfinite(alpha0)) throw ConfigError("alpha0 must be positive");
    if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw ConfigError("decay factor must lie in (0, 1]");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (n_p == 0 && n_o == 0) throw ConfigError("N_P + N_O must be at least 1");
    if (!(rda_gamma > 0.0)) throw ConfigError("RDA gamma must be positive");
    if (!(inverse_k_scale >= 0.0)) throw ConfigError("inverse-k scale must be >= 0");
    if (!(init_scale >= 0.0)) throw ConfigError("init scale must be >= 0");
  }
};

/// Switching rule: Prox-SG while mod(k, N_P + N_O) < N_P. With
/// N_O = infinity this reads k < N_P; with N_P = infinity it is always Prox-SG.
inline StepType select_step(std::uint64_t k, std::uint64_t n_p, std::uint64_t n_o) {
  if (n_p == kInfinite) return StepType::Prox;
  if (n_o == kInfinite) return k < n_p ? StepType::Prox : StepType::Orthant;
  const std::uint64_t period = n_p + n_o;
  if (period == 0) throw ConfigError("N_P + N_O must be at least 1");
  return k % period < n_p ? StepType::Prox : StepType::Orthant;
}

/// The orthant face of a reference point: coordinates that are zero there
/// stay zero; the others may keep their sign or become zero.
class OrthantFace {
 public:
  OrthantFace() = default;
  explicit OrthantFace(std::vector<std::int8_t> pattern) : pattern_(std::move(pattern)) {
    for (std::size_t i = 0; i < pattern_.size(); ++i) {
      if (pattern_[i] < -1 || pattern_[i] > 1) throw ContractError("sign pattern entries must be -1, 0 or +1");
      if (pattern_[i] != 0) free_.push_back(i);
    }
  }

  static OrthantFace from(const Eigen::VectorXd& reference) {
    std::vector<std::int8_t> p(static_cast<std::size_t>(reference.size()));
    for (Eigen::Index i = 0; i < reference.size(); ++i) p[static_cast<std::size_t>(i)] = static_cast<std::int8_t>(sign_of(reference[i]));
    return OrthantFace(std::move(p));
  }

  std::size_t size() const { return pattern_.size(); }
  std::span<const std::int8_t> pattern() const { return pattern_; }
  /// Indices with a nonzero pattern entry, ascending.
  const std::vector<std::size_t>& free_indices() const { return free_; }

  bool contains(const Eigen::VectorXd& x) const {
    if (static_cast<std::size_t>(x.size()) != pattern_.size()) return false;
    for (std::size_t i = 0; i < pattern_.size(); ++i) {
      const int s = sign_of(x[static_cast<Eigen::Index>(i)]);
      if (s != 0 && s != pattern_[i]) return false;
    }
    return true;
  }

  /// Euclidean projection: keep z_i when sign(z_i) matches the pattern, else 0.
  Eigen::VectorXd project(const Eigen::VectorXd& z) const {
    if (static_cast<std::size_t>(z.size()) != pattern_.size()) throw ContractError("projection: length mismatch");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(z.size());
    for (std::size_t i : free_) {
      const auto e = static_cast<Eigen::Index>(i);
      if (sign_of(z[e]) == pattern_[i]) out[e] = z[e];
    }
    return out;
  }

 private:
  std::vector<std::int8_t> pattern_;
  std::vector<std::size_t> free_;
};

namespace detail {

inline void require_finite(const Gradient& g, std::string_view where) {
  if (!g.all_finite()) throw NonFiniteError(std::string(where) + ": non-finite stochastic gradient");
}

inline void require_step(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ContractError("step size must be positive and finite");
}

}  // namespace detail

/// x+ = Prox_{alpha lambda ||.||_1}(x - alpha grad f_B(x)); the bias takes a plain gradient step.
template <SmoothLoss Loss>
WeightVector prox_sg_step(const WeightVector& w, const CompositeObjective<Loss>& objective, Batch batch,
                          double alpha) {
  detail::require_step(alpha);
  Gradient g;
  objective.loss.value_and_gradient(batch, w, g);
  detail::require_finite(g, "prox_sg_step");
  return {prox_shrink(w.x - alpha * g.x, alpha * objective.lambda), w.bias - alpha * g.bias};
}

/// x+ = Proj_face(x - alpha grad F~_B(x)) where F~ = f + lambda pattern.x.
/// Only coordinates free on the face are read or written; the rest stay 0.
template <SmoothLoss Loss>
WeightVector orthant_step(const WeightVector& w, const CompositeObjective<Loss>& objective, Batch batch,
                          double alpha, const OrthantFace& face) {
  detail::require_step(alpha);
  if (!face.contains(w.x))
    throw ContractError("orthant_step: iterate does not lie on the given orthant face");
  Gradient g;
  objective.loss.value_and_gradient(batch, w, g);
  detail::require_finite(g, "orthant_step");
  WeightVector next{Eigen::VectorXd::Zero(w.x.size()), w.bias - alpha * g.bias};
  const auto pattern = face.pattern();
  for (std::size_t i : face.free_indices()) {
    const auto e = static_cast<Eigen::Index>(i);
    const double trial = w.x[e] - alpha * (g.x[e] + objective.lambda * pattern[i]);
    if (sign_of(trial) == pattern[i]) next.x[e] = trial;
  }
  return next;
}

/// Running sum of every stochastic gradient seen by RDA.
struct DualAverage {
  Eigen::VectorXd sum_x;
  Eigen::VectorXd sum_bias;
  std::uint64_t count = 0;
};

/// l1-RDA with proximal coefficient gamma sqrt(k):
///   x+_i = -(sqrt(k)/gamma) (gbar_i - lambda sign(gbar_i)) if |gbar_i| > lambda, else 0,
/// where gbar is the mean of the k gradients seen so far. The bias uses the
/// same closed form without truncation.
template <SmoothLoss Loss>
WeightVector rda_step(DualAverage& acc, const WeightVector& w, const CompositeObjective<Loss>& objective,
                      Batch batch, double gamma) {
  if (!(gamma > 0.0)) throw ContractError("RDA gamma must be positive");
  Gradient g;
  objective.loss.value_and_gradient(batch, w, g);
  detail::require_finite(g, "rda_step");
  if (acc.count == 0) {
    acc.sum_x = Eigen::VectorXd::Zero(g.x.size());
    acc.sum_bias = Eigen::VectorXd::Zero(g.bias.size());
  }
  acc.sum_x += g.x;
  acc.sum_bias += g.bias;
  ++acc.count;
  const double k = static_cast<double>(acc.count);
  const double scale = -std::sqrt(k) / gamma;
  WeightVector next{Eigen::VectorXd::Zero(w.x.size()), scale * (acc.sum_bias / k)};
  for (Eigen::Index i = 0; i < w.x.size(); ++i) {
    const double mean = acc.sum_x[i] / k;
    if (std::abs(mean) > objective.lambda) next.x[i] = scale * (mean - objective.lambda * sign_of(mean));
  }
  return next;
}

/// Reference point and full gradient for Prox-SVRG; valid for `inner` steps.
struct SvrgSnapshot {
  WeightVector point;
  Gradient full_gradient;
  std::uint64_t age = 0;
  std::uint64_t inner = 0;
  bool valid = false;

  bool expired() const { return !valid || age >= inner; }
};

template <SmoothLoss Loss>
void refresh_snapshot(SvrgSnapshot& snap, const WeightVector& w, const CompositeObjective<Loss>& objective,
                      std::uint64_t inner) {
  if (inner == 0) throw ConfigError("SVRG inner loop length must be positive");
  const auto all = all_indices(objective.loss.num_examples());
  snap.point = w;
  objective.loss.value_and_gradient(all, w, snap.full_gradient);
  detail::require_finite(snap.full_gradient, "refresh_snapshot");
  snap.age = 0;
  snap.inner = inner;
  snap.valid = true;
}

/// v = grad f_B(x) - grad f_B(x~) + grad f(x~);  x+ = Prox_{alpha lambda}(x - alpha v).
template <SmoothLoss Loss>
WeightVector prox_svrg_step(SvrgSnapshot& snap, const WeightVector& w, const CompositeObjective<Loss>& objective,
                            Batch batch, double alpha) {
  detail::require_step(alpha);
  if (snap.expired()) throw InternalError("prox_svrg_step: snapshot is stale or missing");
  Gradient g, g_ref;
  objective.loss.value_and_gradient(batch, w, g);
  objective.loss.value_and_gradient(batch, snap.point, g_ref);
  const Gradient v{g.x - g_ref.x + snap.full_gradient.x, g.bias - g_ref.bias + snap.full_gradient.bias};
  detail::require_finite(v, "prox_svrg_step");
  ++snap.age;
  return {prox_shrink(w.x - alpha * v.x, alpha * objective.lambda), w.bias - alpha * v.bias};
}

struct SolverState {
  WeightVector iterate;
  std::uint64_t k = 0;
  std::optional<DualAverage> rda;
  std::optional<SvrgSnapshot> svrg;
};

/// alpha_k for iteration k falling in `epoch`.
inline double step_size(const SolverConfig& config, std::size_t epoch, std::uint64_t k,
                        std::uint64_t iterations_per_epoch) {
  if (config.step_rule == StepRule::EpochDecay)
    return config.alpha0 * std::pow(config.decay_factor, static_cast<double>(epoch));
  const double scale =
      config.inverse_k_scale > 0.0 ? config.inverse_k_scale : static_cast<double>(iterations_per_epoch);
  return config.alpha0 / (1.0 + static_cast<double>(k) / scale);
}

/// Passed to the optional per-iteration observer of run_solver().
struct StepEvent {
  std::uint64_t k;
  std::size_t epoch;
  StepType type;
  const WeightVector& before;
  const WeightVector& after;
};

using StepObserver = std::function<void(const StepEvent&)>;

enum class RunStatus : std::uint8_t { Completed, Diverged };

struct RunResult {
  WeightVector weights;
  IterateTrace trace;
  RunStatus status = RunStatus::Completed;
  std::string message;
  std::uint64_t prox_steps = 0;
  std::uint64_t orthant_steps = 0;
  double wall_time_seconds = 0.0;
};

template <SmoothLoss Loss>
WeightVector initial_point(const SolverConfig& config, const Loss& loss) {
  WeightVector w = WeightVector::zeros(loss.num_weights(), loss.num_biases());
  if (config.init_scale > 0.0) {
    Rng rng(derive_seed(config.seed, 0x1217));
    for (Eigen::Index i = 0; i < w.x.size(); ++i) w.x[i] = rng.uniform(-config.init_scale, config.init_scale);
  }
  return w;
}

/// Runs `config.epochs` passes; each pass is one random partition of the
/// data into batches and every batch is one iteration. A trace record is
/// taken before the first epoch and after each epoch using full-data
/// objective values and the full gradient mapping at eta = alpha_k.
template <SmoothLoss Loss>
RunResult run_solver(SolverKind kind, const SolverConfig& config, const CompositeObjective<Loss>& objective,
                     const StepObserver& observer = {}) {
  config.validate();
  if (objective.lambda != config.lambda)
    throw ConfigError("objective lambda and config lambda disagree");
  const std::size_t N = objective.loss.num_examples();
  if (config.batch_size > N)
    throw ConfigError("batch size " + std::to_string(config.batch_size) + " exceeds N = " + std::to_string(N));
  const std::uint64_t per_epoch = (N + config.batch_size - 1) / config.batch_size;
  const std::uint64_t svrg_inner = config.svrg_inner > 0 ? config.svrg_inner : per_epoch;
  const auto full = all_indices(N);

  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();

  SolverState state;
  state.iterate = initial_point(config, objective.loss);
  if (kind == SolverKind::RDA) state.rda.emplace();
  if (kind == SolverKind::ProxSVRG) state.svrg.emplace();

  RunResult result;
  StepType last_type = kind == SolverKind::RDA        ? StepType::DualAveraging
                       : kind == SolverKind::ProxSVRG ? StepType::VarianceReduced
                                                      : StepType::Prox;

  auto record = [&](std::size_t epoch, double eta) {
    const ObjectiveValue v = composite_value(objective, full, state.iterate);
    TraceRecord r;
    r.epoch = epoch;
    r.k = state.k;
    r.F = v.F;
    r.f = v.f;
    r.density_percent = density(state.iterate);
    r.grad_map_norm = gradient_mapping_norm(objective, state.iterate, eta, full);
    r.step_type = last_type;
    r.wall_time_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (!std::isfinite(r.F) || !std::isfinite(r.grad_map_norm))
      throw NonFiniteError("non-finite objective after epoch " + std::to_string(epoch));
    result.trace.append(r);
  };

  try {
    record(0, step_size(config, 0, 0, per_epoch));
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
      const BatchPlan plan = make_batches(N, config.batch_size, config.seed, epoch);
      double alpha = step_size(config, epoch, state.k, per_epoch);
      for (std::size_t b = 0; b < plan.num_batches(); ++b) {
        const Batch batch = plan.batch(b);
        alpha = step_size(config, epoch, state.k, per_epoch);
        WeightVector next;
        switch (kind) {
          case SolverKind::ProxSG:
            last_type = StepType::Prox;
            next = prox_sg_step(state.iterate, objective, batch, alpha);
            break;
          case SolverKind::RDA:
            last_type = StepType::DualAveraging;
            next = rda_step(*state.rda, state.iterate, objective, batch, config.rda_gamma);
            break;
          case SolverKind::ProxSVRG:
            last_type = StepType::VarianceReduced;
            if (state.svrg->expired()) refresh_snapshot(*state.svrg, state.iterate, objective, svrg_inner);
            next = prox_svrg_step(*state.svrg, state.iterate, objective, batch, alpha);
            break;
          case SolverKind::OBProx:
            last_type = select_step(state.k, config.n_p, config.n_o);
            if (last_type == StepType::Prox)
              next = prox_sg_step(state.iterate, objective, batch, alpha);
            else
              next = orthant_step(state.iterate, objective, batch, alpha, OrthantFace::from(state.iterate.x));
            break;
        }
        if (last_type == StepType::Orthant)
          ++result.orthant_steps;
        else
          ++result.prox_steps;
        if (observer) observer(StepEvent{state.k, epoch, last_type, state.iterate, next});
        state.iterate = std::move(next);
        ++state.k;
      }
      record(epoch + 1, alpha);
    }
  } catch (const NonFiniteError& e) {
    result.status = RunStatus::Diverged;
    result.message = e.what();
  }
  result.weights = state.iterate;
  result.wall_time_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return result;
}

/// The orthant-based method; n_p = infinity reduces it to Prox-SG and
/// n_o = infinity gives the "+" variant.
template <SmoothLoss Loss>
RunResult obprox_run(const SolverConfig& config, const CompositeObjective<Loss>& objective,
                     const StepObserver& observer = {}) {
  return run_solver(SolverKind::OBProx, config, objective, observer);
}

}  // namespace obprox
