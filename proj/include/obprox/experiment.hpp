#pragma once

// Experiment runner: resolves the benchmark protocol defaults against a
// dataset, runs the requested solvers and writes per-solver traces,
// summaries and a comparison table.
//
// Protocol defaults: 30 epochs, lambda = 1/N, batch = min(256, ceil(N/100)),
// alpha0 = 1, per-epoch decay 0.995 and the same seed for every solver.
// Schedule presets: obprox runs 5 epochs of Prox-SG steps then 5 epochs of
// orthant steps, repeating; obprox_plus runs 15 epochs of Prox-SG steps and
// orthant steps afterwards. RDA runs once per gamma in its grid and keeps the
// run with the lowest final F.

#include <json.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "obprox/dataio.hpp"
#include "obprox/errors.hpp"
#include "obprox/lossmodel.hpp"
#include "obprox/report.hpp"
#include "obprox/solvers.hpp"

namespace obprox {

inline const std::vector<std::string>& known_solvers() {
  static const std::vector<std::string> names{"prox_sg", "rda", "prox_svrg", "obprox", "obprox_plus"};
  return names;
}

inline SolverKind solver_kind(std::string_view name) {
  if (name == "prox_sg") return SolverKind::ProxSG;
  if (name == "rda") return SolverKind::RDA;
  if (name == "prox_svrg") return SolverKind::ProxSVRG;
  if (name == "obprox" || name == "obprox_plus") return SolverKind::OBProx;
  throw ConfigError("unknown solver '" + std::string(name) +
                    "' (expected prox_sg, rda, prox_svrg, obprox or obprox_plus)");
}

/// How "k N/|B|" iteration counts are turned into integers.
enum class ScheduleUnit : std::uint8_t {
  Epochs,  // k * ceil(N/|B|): whole epochs, phases stay aligned with batch plans
  Exact,   // round(k N / |B|)
};

inline std::uint64_t schedule_iterations(double epochs, std::size_t num_examples, std::size_t batch_size,
                                         ScheduleUnit unit) {
  if (unit == ScheduleUnit::Epochs) {
    const std::uint64_t per_epoch = (num_examples + batch_size - 1) / batch_size;
    return static_cast<std::uint64_t>(std::llround(epochs * static_cast<double>(per_epoch)));
  }
  return static_cast<std::uint64_t>(
      std::llround(epochs * static_cast<double>(num_examples) / static_cast<double>(batch_size)));
}

inline std::uint64_t parse_iterations(std::string_view text) {
  if (text == "inf" || text == "infinity" || text == "Inf") return kInfinite;
  std::uint64_t v;
  if (!detail::parse_number(text, v)) throw ConfigError("expected an iteration count or 'inf', got '" + std::string(text) + "'");
  return v;
}

struct LambdaSetting {
  bool one_over_n = true;
  double value = 0.0;
};

inline LambdaSetting parse_lambda(std::string_view text) {
  if (text == "1/N" || text == "1/n") return {};
  double v;
  if (!detail::parse_number(text, v) || !(v >= 0.0)) throw ConfigError("lambda must be '1/N' or a number >= 0");
  return {false, v};
}

struct BatchSetting {
  bool default_rule = true;
  std::size_t value = 0;
};

inline BatchSetting parse_batch(std::string_view text) {
  if (text == "auto" || text == "paper") return {};
  std::size_t v;
  if (!detail::parse_number(text, v) || v == 0) throw ConfigError("batch size must be 'auto' or a positive count");
  return {false, v};
}

inline std::vector<double> parse_gamma_list(std::string_view text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto item = detail::trim(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    double v;
    if (!detail::parse_number(item, v) || !(v > 0.0)) throw ConfigError("RDA gamma values must be positive numbers");
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline StepRule parse_step_rule(std::string_view text) {
  if (text == "epoch_decay") return StepRule::EpochDecay;
  if (text == "inverse_k") return StepRule::InverseK;
  throw ConfigError("step rule must be 'epoch_decay' or 'inverse_k'");
}

inline ScheduleUnit parse_schedule_unit(std::string_view text) {
  if (text == "epochs") return ScheduleUnit::Epochs;
  if (text == "exact") return ScheduleUnit::Exact;
  throw ConfigError("schedule unit must be 'epochs' or 'exact'");
}

/// A partial set of solver settings; later layers override earlier ones.
struct Settings {
  std::optional<std::size_t> epochs;
  std::optional<LambdaSetting> lambda;
  std::optional<BatchSetting> batch;
  std::optional<double> alpha0;
  std::optional<double> decay;
  std::optional<StepRule> step_rule;
  std::optional<double> inverse_k_scale;
  std::optional<std::uint64_t> n_p;
  std::optional<std::uint64_t> n_o;
  std::optional<std::vector<double>> rda_gammas;
  std::optional<std::uint64_t> svrg_inner;
  std::optional<std::uint64_t> seed;
  std::optional<double> init_scale;
  std::optional<ScheduleUnit> schedule_unit;

  void merge(const Settings& o) {
    auto take = [](auto& dst, const auto& src) {
      if (src) dst = src;
    };
    take(epochs, o.epochs);
    take(lambda, o.lambda);
    take(batch, o.batch);
    take(alpha0, o.alpha0);
    take(decay, o.decay);
    take(step_rule, o.step_rule);
    take(inverse_k_scale, o.inverse_k_scale);
    take(n_p, o.n_p);
    take(n_o, o.n_o);
    take(rda_gammas, o.rda_gammas);
    take(svrg_inner, o.svrg_inner);
    take(seed, o.seed);
    take(init_scale, o.init_scale);
    take(schedule_unit, o.schedule_unit);
  }
};

inline const std::vector<double>& default_rda_gammas() {
  static const std::vector<double> grid{1.0, 5.0, 10.0, 20.0, 50.0};
  return grid;
}

struct SolverRequest {
  std::string name;
  Settings settings;
};

struct ExperimentSpec {
  std::string dataset_path;
  std::string dataset_name;  // defaults to the file stem
  std::optional<std::size_t> num_features;
  std::vector<SolverRequest> solvers;
  Settings shared;  // config-file level
  Settings flags;   // command line; wins over everything else
  std::string out_dir = ".";
};

struct ResolvedSolver {
  std::string name;
  SolverKind kind;
  SolverConfig config;
  std::vector<double> rda_gammas;
};

/// Applies defaults, presets and overrides for a dataset with N examples.
inline ResolvedSolver resolve_solver(const ExperimentSpec& spec, const SolverRequest& request,
                                     std::size_t num_examples) {
  ResolvedSolver out{request.name, solver_kind(request.name), {}, {}};
  Settings s;
  s.merge(spec.shared);
  s.merge(request.settings);
  s.merge(spec.flags);

  SolverConfig& c = out.config;
  const LambdaSetting lam = s.lambda.value_or(LambdaSetting{});
  c.lambda = lam.one_over_n ? 1.0 / static_cast<double>(num_examples) : lam.value;
  const BatchSetting batch = s.batch.value_or(BatchSetting{});
  c.batch_size = batch.default_rule ? default_batch_size(num_examples) : batch.value;
  c.epochs = s.epochs.value_or(30);
  c.alpha0 = s.alpha0.value_or(1.0);
  c.decay_factor = s.decay.value_or(0.995);
  c.step_rule = s.step_rule.value_or(StepRule::EpochDecay);
  c.inverse_k_scale = s.inverse_k_scale.value_or(0.0);
  c.seed = s.seed.value_or(0);
  c.svrg_inner = s.svrg_inner.value_or(0);
  c.init_scale = s.init_scale.value_or(0.0);

  const ScheduleUnit unit = s.schedule_unit.value_or(ScheduleUnit::Epochs);
  if (request.name == "obprox") {
    c.n_p = c.n_o = schedule_iterations(5, num_examples, c.batch_size, unit);
  } else if (request.name == "obprox_plus") {
    c.n_p = schedule_iterations(15, num_examples, c.batch_size, unit);
    c.n_o = kInfinite;
  } else {
    c.n_p = kInfinite;
    c.n_o = 0;
  }
  if (out.kind == SolverKind::OBProx) {
    if (s.n_p) c.n_p = *s.n_p;
    if (s.n_o) c.n_o = *s.n_o;
  }
  out.rda_gammas = s.rda_gammas.value_or(default_rda_gammas());
  if (out.rda_gammas.empty()) throw ConfigError("RDA gamma grid is empty");
  c.rda_gamma = out.rda_gammas.front();
  c.validate();
  return out;
}

struct GammaTrial {
  double gamma;
  double F;
  double f;
  double density_percent;
};

struct SolverOutcome {
  ResolvedSolver solver;
  RunResult result;
  std::vector<GammaTrial> gamma_trials;  // RDA only

  /// Last trace record; all-NaN when the run diverged before the first one.
  TraceRecord final_record() const {
    if (!result.trace.empty()) return result.trace.back();
    TraceRecord r;
    r.F = r.f = r.density_percent = r.grad_map_norm = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
};

struct ExperimentReport {
  std::string dataset_name;
  std::size_t num_examples = 0;
  std::size_t num_features = 0;
  std::vector<SolverOutcome> outcomes;

  const SolverOutcome& find(std::string_view name) const {
    for (const auto& o : outcomes)
      if (o.solver.name == name) return o;
    throw ContractError("no outcome for solver '" + std::string(name) + "'");
  }

  std::vector<ComparisonRow> rows() const {
    std::vector<ComparisonRow> out;
    for (const auto& o : outcomes) {
      const auto last = o.final_record();
      out.push_back({o.solver.name, last.F, last.f, last.density_percent, o.result.wall_time_seconds});
    }
    return out;
  }
};

/// Runs one resolved solver on logistic regression over `data`.
inline SolverOutcome run_logistic(const ResolvedSolver& solver, const Dataset& data) {
  CompositeObjective<LogisticLoss> objective(LogisticLoss(data), solver.config.lambda);
  SolverOutcome out{solver, {}, {}};
  if (solver.kind != SolverKind::RDA) {
    out.result = run_solver(solver.kind, solver.config, objective);
    return out;
  }
  bool have = false;
  for (double gamma : solver.rda_gammas) {
    SolverConfig c = solver.config;
    c.rda_gamma = gamma;
    RunResult r = run_solver(SolverKind::RDA, c, objective);
    const auto last = SolverOutcome{solver, r, {}}.final_record();
    out.gamma_trials.push_back({gamma, last.F, last.f, last.density_percent});
    const bool better = r.status == RunStatus::Completed &&
                        (!have || out.result.status != RunStatus::Completed || last.F < out.final_record().F);
    if (!have || better) {
      out.result = std::move(r);
      out.solver.config.rda_gamma = gamma;
      have = true;
    }
  }
  return out;
}

inline nlohmann::json summary_json(const ExperimentReport& report, const SolverOutcome& o) {
  const auto last = o.final_record();
  nlohmann::json j{
      {"solver", o.solver.name},
      {"kind", std::string(to_string(o.solver.kind))},
      {"dataset", report.dataset_name},
      {"N", report.num_examples},
      {"n", report.num_features},
      {"final_F", last.F},
      {"final_f", last.f},
      {"density_percent", last.density_percent},
      {"grad_map_norm", last.grad_map_norm},
      {"epochs_completed", last.epoch},
      {"iterations", last.k},
      {"prox_steps", o.result.prox_steps},
      {"orthant_steps", o.result.orthant_steps},
      {"runtime_seconds", o.result.wall_time_seconds},
      {"status", o.result.status == RunStatus::Completed ? "completed" : "diverged"},
      {"message", o.result.message},
      {"config", config_to_json(o.solver.config)},
  };
  if (!o.gamma_trials.empty()) {
    nlohmann::json trials = nlohmann::json::array();
    for (const auto& t : o.gamma_trials)
      trials.push_back({{"gamma", t.gamma}, {"F", t.F}, {"f", t.f}, {"density_percent", t.density_percent}});
    j["gamma_trials"] = trials;
  }
  return j;
}

/// Writes <solver>.trace.csv, <solver>.summary.json and <solver>.weights.json
/// per solver plus comparison.md / comparison.csv into `out_dir`.
inline void write_report(const ExperimentReport& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  for (const auto& o : report.outcomes) {
    const fs::path base = fs::path(out_dir) / o.solver.name;
    {
      auto f = open_output(base.string() + ".trace.csv");
      write_trace_csv(o.result.trace, f);
    }
    {
      auto f = open_output(base.string() + ".summary.json");
      f << summary_json(report, o).dump(2) << '\n';
    }
    {
      auto f = open_output(base.string() + ".weights.json");
      f << weights_to_json(o.result.weights).dump() << '\n';
    }
  }
  const auto rows = report.rows();
  {
    auto f = open_output((fs::path(out_dir) / "comparison.md").string());
    write_comparison_markdown(report.dataset_name, rows, f);
  }
  {
    auto f = open_output((fs::path(out_dir) / "comparison.csv").string());
    write_comparison_csv(report.dataset_name, rows, f);
  }
}

inline ExperimentReport run_experiment(const ExperimentSpec& spec, const Dataset& data) {
  if (spec.solvers.empty()) throw ConfigError("no solvers requested");
  ExperimentReport report;
  report.dataset_name = spec.dataset_name.empty() ? std::filesystem::path(spec.dataset_path).stem().string()
                                                  : spec.dataset_name;
  report.num_examples = data.num_examples();
  report.num_features = data.num_features();
  std::vector<ResolvedSolver> resolved;
  for (const auto& req : spec.solvers) resolved.push_back(resolve_solver(spec, req, data.num_examples()));
  for (const auto& solver : resolved) report.outcomes.push_back(run_logistic(solver, data));
  return report;
}

inline ExperimentReport run_experiment(const ExperimentSpec& spec) {
  ParseOptions opts;
  opts.num_features = spec.num_features;
  const Dataset data = load_libsvm(spec.dataset_path, opts);
  ExperimentReport report = run_experiment(spec, data);
  write_report(report, spec.out_dir);
  return report;
}

namespace detail {

inline std::string json_text(const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

inline Settings settings_from_json(const nlohmann::json& j) {
  Settings s;
  try {
    if (j.contains("epochs")) s.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("lambda")) s.lambda = parse_lambda(json_text(j.at("lambda")));
    if (j.contains("batch_size")) s.batch = parse_batch(json_text(j.at("batch_size")));
    if (j.contains("alpha0")) s.alpha0 = j.at("alpha0").get<double>();
    if (j.contains("decay")) s.decay = j.at("decay").get<double>();
    if (j.contains("step_rule")) s.step_rule = parse_step_rule(j.at("step_rule").get<std::string>());
    if (j.contains("inverse_k_scale")) s.inverse_k_scale = j.at("inverse_k_scale").get<double>();
    if (j.contains("np")) s.n_p = parse_iterations(json_text(j.at("np")));
    if (j.contains("no")) s.n_o = parse_iterations(json_text(j.at("no")));
    if (j.contains("rda_gamma")) {
      const auto& g = j.at("rda_gamma");
      s.rda_gammas = g.is_array() ? g.get<std::vector<double>>() : parse_gamma_list(json_text(g));
    }
    if (j.contains("svrg_inner")) s.svrg_inner = j.at("svrg_inner").get<std::uint64_t>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("init_scale")) s.init_scale = j.at("init_scale").get<double>();
    if (j.contains("schedule_unit")) s.schedule_unit = parse_schedule_unit(j.at("schedule_unit").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad experiment config: ") + e.what());
  }
  return s;
}

}  // namespace detail

/// Reads an experiment description:
///   {"dataset": "a9a.gz", "num_features": 123, "out_dir": "out",
///    "solvers": ["prox_sg", {"name": "obprox", "np": 640, "no": "inf"}],
///    "epochs": 30, "lambda": "1/N", "batch_size": "auto", ...}
inline ExperimentSpec spec_from_json(const nlohmann::json& j) {
  ExperimentSpec spec;
  try {
    if (j.contains("dataset")) spec.dataset_path = j.at("dataset").get<std::string>();
    if (j.contains("dataset_name")) spec.dataset_name = j.at("dataset_name").get<std::string>();
    if (j.contains("num_features")) spec.num_features = j.at("num_features").get<std::size_t>();
    if (j.contains("out_dir")) spec.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("solvers")) {
      for (const auto& item : j.at("solvers")) {
        if (item.is_string()) {
          spec.solvers.push_back({item.get<std::string>(), {}});
        } else {
          spec.solvers.push_back({item.at("name").get<std::string>(), detail::settings_from_json(item)});
        }
        solver_kind(spec.solvers.back().name);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad experiment config: ") + e.what());
  }
  spec.shared = detail::settings_from_json(j);
  return spec;
}

inline ExperimentSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  try {
    return spec_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace obprox
