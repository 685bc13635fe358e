#pragma once

// Trace CSV, JSON summaries, weight snapshots and the comparison table.
//
// Trace CSV columns, in order:
//   epoch,k,F,f,density_percent,grad_map_norm,step_type
// Reals are printed with %.17g so a rerun with the same configuration
// reproduces the file byte for byte. Wall-clock time is kept out of the CSV
// and reported in the JSON summary instead.

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "obprox/diagnostics.hpp"
#include "obprox/errors.hpp"
#include "obprox/lossmodel.hpp"
#include "obprox/solvers.hpp"

namespace obprox {

inline constexpr const char* kTraceCsvHeader = "epoch,k,F,f,density_percent,grad_map_norm,step_type";

namespace detail {

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_trace_csv(const IterateTrace& trace, std::ostream& out) {
  out << kTraceCsvHeader << '\n';
  for (const auto& r : trace.records) {
    out << r.epoch << ',' << r.k << ',' << detail::format_real(r.F) << ',' << detail::format_real(r.f) << ','
        << detail::format_real(r.density_percent) << ',' << detail::format_real(r.grad_map_norm) << ','
        << to_string(r.step_type) << '\n';
  }
}

inline nlohmann::json iterations_to_json(std::uint64_t v) {
  if (v == kInfinite) return "inf";
  return v;
}

inline nlohmann::json config_to_json(const SolverConfig& c) {
  return {
      {"lambda", c.lambda},
      {"alpha0", c.alpha0},
      {"decay", c.decay_factor},
      {"step_rule", c.step_rule == StepRule::EpochDecay ? "epoch_decay" : "inverse_k"},
      {"inverse_k_scale", c.inverse_k_scale},
      {"batch_size", c.batch_size},
      {"np", iterations_to_json(c.n_p)},
      {"no", iterations_to_json(c.n_o)},
      {"epochs", c.epochs},
      {"seed", c.seed},
      {"rda_gamma", c.rda_gamma},
      {"svrg_inner", c.svrg_inner},
      {"init_scale", c.init_scale},
  };
}

inline nlohmann::json weights_to_json(const WeightVector& w) {
  return {{"x", std::vector<double>(w.x.data(), w.x.data() + w.x.size())},
          {"bias", std::vector<double>(w.bias.data(), w.bias.data() + w.bias.size())}};
}

inline WeightVector weights_from_json(const nlohmann::json& j) {
  try {
    const auto x = j.at("x").get<std::vector<double>>();
    const auto b = j.at("bias").get<std::vector<double>>();
    WeightVector w;
    w.x = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    w.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad weight snapshot: ") + e.what(), 0);
  }
}

/// One row of the comparison table.
struct ComparisonRow {
  std::string solver;
  double F = 0.0;
  double f = 0.0;
  double density_percent = 0.0;
  double wall_time_seconds = 0.0;
};

/// Runtime relative to the slowest solver of the same run.
inline std::vector<double> relative_runtimes(const std::vector<ComparisonRow>& rows) {
  double worst = 0.0;
  for (const auto& r : rows) worst = std::max(worst, r.wall_time_seconds);
  std::vector<double> rel;
  rel.reserve(rows.size());
  for (const auto& r : rows) rel.push_back(worst > 0.0 ? r.wall_time_seconds / worst : 0.0);
  return rel;
}

inline void write_comparison_markdown(const std::string& dataset, const std::vector<ComparisonRow>& rows,
                                      std::ostream& out) {
  const auto rel = relative_runtimes(rows);
  out << "| dataset | solver | F / f | density (%) | relative runtime |\n";
  out << "|---|---|---|---|---|\n";
  char buf[160];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::snprintf(buf, sizeof buf, "| %s | %s | %.3f / %.3f | %.2f | %.3f |\n", dataset.c_str(),
                  rows[i].solver.c_str(), rows[i].F, rows[i].f, rows[i].density_percent, rel[i]);
    out << buf;
  }
}

inline void write_comparison_csv(const std::string& dataset, const std::vector<ComparisonRow>& rows,
                                 std::ostream& out) {
  const auto rel = relative_runtimes(rows);
  out << "dataset,solver,F,f,density_percent,relative_runtime\n";
  for (std::size_t i = 0; i < rows.size(); ++i)
    out << dataset << ',' << rows[i].solver << ',' << detail::format_real(rows[i].F) << ','
        << detail::format_real(rows[i].f) << ',' << detail::format_real(rows[i].density_percent) << ','
        << detail::format_real(rel[i]) << '\n';
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  return out;
}

}  // namespace obprox
