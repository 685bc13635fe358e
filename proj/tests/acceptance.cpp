// Acceptance suite. Prints one PASS/FAIL line per check and exits nonzero if
// any check fails. Pass a criterion id (see kCriteria) to run just that one.
//
// Datasets are looked up as $OBPROX_A9A / $OBPROX_W8A, then data/a9a(.gz)
// and data/w8a(.gz) under the source tree.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "obprox/obprox.hpp"

using namespace obprox;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void check(bool ok, const std::string& id, const std::string& what) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", id.c_str(), what.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::optional<fs::path> find_dataset(const std::string& name, const char* env) {
  if (const char* p = std::getenv(env); p != nullptr && *p != '\0') {
    if (fs::exists(p)) return fs::path(p);
    return std::nullopt;
  }
  const fs::path data = fs::path(OBPROX_SOURCE_DIR) / "data";
  for (const std::string& candidate : {name + ".gz", name, name + ".txt"})
    if (fs::exists(data / candidate)) return data / candidate;
  return std::nullopt;
}

std::optional<Dataset> load_named(const std::string& name, const char* env, std::size_t num_features,
                                  const std::string& id) {
  const auto path = find_dataset(name, env);
  if (!path) {
    check(false, id, name + " dataset not found (set " + env + " or place data/" + name + ".gz)");
    return std::nullopt;
  }
  ParseOptions opts;
  opts.num_features = num_features;
  return load_libsvm(path->string(), opts);
}

ExperimentReport run_default_protocol(const Dataset& data, const std::string& name, std::uint64_t seed,
                                      const std::vector<std::string>& solvers) {
  ExperimentSpec spec;
  spec.dataset_name = name;
  spec.shared.seed = seed;
  for (const auto& s : solvers) spec.solvers.push_back({s, {}});
  return run_experiment(spec, data);
}

double final_F(const ExperimentReport& r, const std::string& s) { return r.find(s).final_record().F; }
double final_density(const ExperimentReport& r, const std::string& s) {
  return r.find(s).final_record().density_percent;
}

bool strictly_minimal(const ExperimentReport& r, const std::string& who) {
  const double mine = final_density(r, who);
  for (const auto& o : r.outcomes)
    if (o.solver.name != who && !(mine < o.final_record().density_percent)) return false;
  return true;
}

void print_table(const ExperimentReport& r) {
  for (const auto& o : r.outcomes) {
    const auto last = o.final_record();
    std::printf("  %-12s F=%.4f f=%.4f density=%.2f%%\n", o.solver.name.c_str(), last.F, last.f,
                last.density_percent);
  }
}

// 1. Desk-scale reproduction on a9a and w8a.
void criterion_1a() {
  const std::string id = "1a";
  auto data = load_named("a9a", "OBPROX_A9A", 123, id);
  if (!data) return;
  const auto r = run_default_protocol(*data, "a9a", 0, known_solvers());
  print_table(r);
  const double fp = final_F(r, "prox_sg"), fo = final_F(r, "obprox_plus");
  check(std::abs(fp - 0.332) <= 0.01, id, "a9a Prox-SG final F " + fmt("%.4f", fp) + " in 0.332 +- 0.01");
  check(std::abs(fo - 0.329) <= 0.01, id, "a9a OBProx-SG+ final F " + fmt("%.4f", fo) + " in 0.329 +- 0.01");
  const double dp = final_density(r, "prox_sg"), dobp = final_density(r, "obprox_plus");
  check(dp >= 85.0, id, "a9a Prox-SG density " + fmt("%.2f", dp) + "% >= 85%");
  check(dobp <= 70.0, id, "a9a OBProx-SG+ density " + fmt("%.2f", dobp) + "% <= 70%");
  check(strictly_minimal(r, "obprox_plus"), id, "a9a OBProx-SG+ density strictly minimal among five solvers");
}

void criterion_1b() {
  const std::string id = "1b";
  auto data = load_named("w8a", "OBPROX_W8A", 300, id);
  if (!data) return;
  const auto r = run_default_protocol(*data, "w8a", 0, known_solvers());
  print_table(r);
  for (const auto& name : known_solvers()) {
    const double F = final_F(r, name);
    check(std::abs(F - 0.052) <= 0.005, id, "w8a " + name + " final F " + fmt("%.4f", F) + " in 0.052 +- 0.005");
  }
  const double d = final_density(r, "obprox_plus");
  check(d <= 80.0, id, "w8a OBProx-SG+ density " + fmt("%.2f", d) + "% <= 80%");
  check(strictly_minimal(r, "obprox_plus"), id, "w8a OBProx-SG+ density strictly minimal among five solvers");
}

// 2. density(OBProx-SG+) <= density(OBProx-SG) <= density(Prox-SG), majority over 3 seeds.
void ordering(const std::string& id, const std::string& name, const char* env, std::size_t n) {
  auto data = load_named(name, env, n, id);
  if (!data) return;
  int votes = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto r = run_default_protocol(*data, name, seed, {"prox_sg", "obprox", "obprox_plus"});
    const double p = final_density(r, "prox_sg"), o = final_density(r, "obprox"), q = final_density(r, "obprox_plus");
    const bool ok = q <= o && o <= p;
    votes += ok;
    std::printf("  seed %llu: obprox_plus %.2f%%  obprox %.2f%%  prox_sg %.2f%%  %s\n",
                static_cast<unsigned long long>(seed), q, o, p, ok ? "ordered" : "not ordered");
  }
  check(votes >= 2, id, name + " density ordering holds on " + std::to_string(votes) + "/3 seeds (need 2)");
}

// 3. prox_shrink against the grid oracle.
void criterion_3() {
  const std::string id = "3";
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> uv(-3.0, 3.0), ua(0.05, 2.0), ul(0.0, 1.0);
  const double res = 1e-4;
  const auto start = std::chrono::steady_clock::now();
  int agree = 0;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double v = uv(gen), alpha = ua(gen), lambda = ul(gen);
    const double got = prox_shrink(Eigen::VectorXd::Constant(1, v), alpha * lambda)[0];
    const double oracle = brute_force_prox_oracle(v, alpha, lambda, res);
    worst = std::max(worst, std::abs(got - oracle));
    agree += std::abs(got - oracle) <= res;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  check(agree == 1000, id,
        "prox_shrink matches grid oracle on " + std::to_string(agree) + "/1000 pairs (max gap " + fmt("%.2e", worst) +
            ", resolution 1e-4)");
  check(secs < 1.0, id, "oracle sweep runtime " + fmt("%.3f", secs) + " s < 1 s");
}

// 4. Central finite differences.
template <class Fn>
Gradient central_differences(const WeightVector& w, Fn value, double h) {
  Gradient g{Eigen::VectorXd::Zero(w.x.size()), Eigen::VectorXd::Zero(w.bias.size())};
  for (Eigen::Index i = 0; i < w.x.size(); ++i) {
    WeightVector p = w, m = w;
    p.x[i] += h;
    m.x[i] -= h;
    g.x[i] = (value(p) - value(m)) / (2 * h);
  }
  for (Eigen::Index i = 0; i < w.bias.size(); ++i) {
    WeightVector p = w, m = w;
    p.bias[i] += h;
    m.bias[i] -= h;
    g.bias[i] = (value(p) - value(m)) / (2 * h);
  }
  return g;
}

double rel_error(const Gradient& a, const Gradient& b) {
  const double diff = std::sqrt((a.x - b.x).squaredNorm() + (a.bias - b.bias).squaredNorm());
  return diff / std::max(std::sqrt(b.x.squaredNorm() + b.bias.squaredNorm()), 1e-12);
}

template <class Loss>
double worst_fd_error(const Loss& loss, std::size_t points, std::uint64_t seed, double scale) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, scale);
  const auto all = all_indices(loss.num_examples());
  double worst = 0.0;
  for (std::size_t t = 0; t < points; ++t) {
    WeightVector w = WeightVector::zeros(loss.num_weights(), loss.num_biases());
    for (Eigen::Index i = 0; i < w.x.size(); ++i) w.x[i] = z(gen);
    for (Eigen::Index i = 0; i < w.bias.size(); ++i) w.bias[i] = z(gen);
    Gradient g;
    loss.value_and_gradient(all, w, g);
    const Gradient fd = central_differences(w, [&](const WeightVector& p) { return loss.value(all, p); }, 1e-6);
    worst = std::max(worst, rel_error(g, fd));
  }
  return worst;
}

void criterion_4() {
  const std::string id = "4";
  const auto logistic_data = make_synthetic(20, 200, 5, 11).data;
  const double a = worst_fd_error(LogisticLoss(logistic_data), 10, 1, 0.5);
  check(a < 1e-5, id, "logistic gradient vs central differences, worst rel. error " + fmt("%.2e", a) + " < 1e-5");
  const auto net_data = make_synthetic(6, 100, 3, 12).data;
  const double b = worst_fd_error(TinyNetLoss(net_data, 5), 10, 2, 0.7);
  check(b < 1e-5, id, "tiny-net gradient vs central differences, worst rel. error " + fmt("%.2e", b) + " < 1e-5");
}

// 5. Projection properties.
struct Parabola1D {
  double c;
  std::size_t num_weights() const { return 1; }
  std::size_t num_biases() const { return 0; }
  std::size_t num_examples() const { return 1; }
  double value(Batch, const WeightVector& w) const { return 0.5 * (w.x[0] - c) * (w.x[0] - c); }
  double value_and_gradient(Batch b, const WeightVector& w, Gradient& g) const {
    g = {Eigen::VectorXd::Constant(1, w.x[0] - c), Eigen::VectorXd()};
    return value(b, w);
  }
};

void criterion_5() {
  const std::string id = "5";
  const int grid = 10000;
  auto trial = [&](int i) { return -5.0 + 10.0 * static_cast<double>(i) / (grid - 1); };

  bool idempotent = true;
  for (std::int8_t s : {std::int8_t{-1}, std::int8_t{0}, std::int8_t{1}}) {
    const OrthantFace face(std::vector<std::int8_t>{s});
    for (int i = 0; i < grid; ++i) {
      const Eigen::VectorXd p = face.project(Eigen::VectorXd::Constant(1, trial(i)));
      idempotent = idempotent && face.project(p) == p && face.contains(p);
    }
  }
  check(idempotent, id, "projection idempotent on a 10^4-point grid for every 1D face");

  // With x_k = +-1, alpha = 1 and f = (x - c)^2 / 2 the Prox-SG trial point is c.
  bool superset = true;
  std::size_t prox_zeros = 0;
  const std::vector<std::size_t> one{0};
  for (double lambda : {0.1, 0.5, 1.3}) {
    for (double xk : {1.0, -1.0}) {
      for (int i = 0; i < grid; ++i) {
        CompositeObjective<Parabola1D> obj(Parabola1D{trial(i)}, lambda);
        const WeightVector w{Eigen::VectorXd::Constant(1, xk), Eigen::VectorXd()};
        const double prox = prox_sg_step(w, obj, one, 1.0).x[0];
        const double orth = orthant_step(w, obj, one, 1.0, OrthantFace::from(w.x)).x[0];
        if (prox == 0.0) {
          ++prox_zeros;
          superset = superset && orth == 0.0;
        }
      }
    }
  }
  check(superset && prox_zeros > 0, id,
        "orthant step zeroes every 1D trial value Prox-SG zeroes (" + std::to_string(prox_zeros) + " cases)");

  const std::string a9a_id = id;
  auto data = load_named("a9a", "OBPROX_A9A", 123, a9a_id);
  if (!data) return;
  ExperimentSpec spec;
  const auto solver = resolve_solver(spec, {"obprox_plus", {}}, data->num_examples());
  CompositeObjective<LogisticLoss> obj(LogisticLoss(*data), solver.config.lambda);
  std::size_t pairs = 0, violations = 0;
  std::optional<StepType> previous;
  obprox_run(solver.config, obj, [&](const StepEvent& e) {
    if (e.type == StepType::Orthant && previous == StepType::Orthant) {
      ++pairs;
      violations += !support_delta(e.before, e.after).gained.empty();
    } else if (e.type == StepType::Orthant) {
      violations += !support_delta(e.before, e.after).gained.empty();
    }
    previous = e.type;
  });
  check(violations == 0 && pairs > 0, id,
        "a9a OBProx-SG+ support never grows across " + std::to_string(pairs) + " consecutive orthant-step pairs");
}

// 6. Switching exactness.
void criterion_6() {
  const std::string id = "6";
  const std::uint64_t K = 1000;
  struct Case {
    std::uint64_t np, no;
    std::string label;
  };
  for (const Case& c : {Case{1, 1, "(1,1)"}, Case{2, 3, "(2,3)"}, Case{5, kInfinite, "(5,inf)"}}) {
    std::uint64_t prox = 0;
    bool sequence_ok = true;
    for (std::uint64_t k = 0; k < K; ++k) {
      const StepType t = select_step(k, c.np, c.no);
      const bool expect_prox = c.no == kInfinite ? k < c.np : k % (c.np + c.no) < c.np;
      sequence_ok = sequence_ok && (t == StepType::Prox) == expect_prox;
      prox += t == StepType::Prox;
    }
    const std::uint64_t closed =
        c.no == kInfinite ? std::min(K, c.np) : (K / (c.np + c.no)) * c.np + std::min(K % (c.np + c.no), c.np);

    // The driver loop must take exactly the same steps: N = 100, |B| = 10, 100 epochs = 1000 iterations.
    const auto data = make_synthetic(4, 100, 2, 6).data;
    CompositeObjective<LogisticLoss> obj(LogisticLoss(data), 0.01);
    SolverConfig cfg;
    cfg.lambda = 0.01;
    cfg.batch_size = 10;
    cfg.epochs = 100;
    cfg.n_p = c.np;
    cfg.n_o = c.no;
    bool driver_ok = true;
    const RunResult r = obprox_run(cfg, obj, [&](const StepEvent& e) {
      driver_ok = driver_ok && e.type == select_step(e.k, c.np, c.no);
    });
    check(sequence_ok && prox == closed && driver_ok && r.prox_steps == closed && r.orthant_steps == K - closed, id,
          "N_P,N_O=" + c.label + ": " + std::to_string(prox) + " Prox-SG steps of " + std::to_string(K) +
              " (closed form " + std::to_string(closed) + ", driver " + std::to_string(r.prox_steps) + ")");
  }
}

// 7. Stationarity on the strongly convex instance and the tiny-net smoke test.
void criterion_7a() {
  const std::string id = "7a";
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto inst = make_quadratic_instance(20, 5, 50, 0.02, seed);
    CompositeObjective<LeastSquaresLoss> obj(LeastSquaresLoss(inst.data), inst.lambda);
    SolverConfig c;
    c.lambda = inst.lambda;
    c.batch_size = 50;
    c.seed = seed;
    c.epochs = 30;
    c.step_rule = StepRule::InverseK;
    c.n_p = 100;
    c.n_o = 100;
    const RunResult r = obprox_run(c, obj);
    double min_g = INFINITY;
    for (const auto& rec : r.trace.records) min_g = std::min(min_g, rec.grad_map_norm);
    const auto found = index_sets(r.weights).nonzero();
    const std::string tag = "seed " + std::to_string(seed) + ": ";
    check(min_g < 1e-3, id, tag + "min full-batch gradient-mapping norm " + fmt("%.2e", min_g) + " < 1e-3");
    check(found == inst.support, id,
          tag + "final support (" + std::to_string(found.size()) + " entries) equals analytic support (" +
              std::to_string(inst.support.size()) + " entries)");
  }
}

void criterion_7b() {
  const std::string id = "7b";
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto inst = make_synthetic(10, 1000, 3, seed);
    const double lambda = 1e-3;
    CompositeObjective<TinyNetLoss> obj(TinyNetLoss(inst.data, 8), lambda);
    SolverConfig c;
    c.lambda = lambda;
    c.batch_size = 32;
    c.seed = seed;
    c.alpha0 = 0.5;
    c.init_scale = 0.5;
    c.epochs = 30;
    const RunResult prox = run_solver(SolverKind::ProxSG, c, obj);
    c.n_p = 15 * ((1000 + 31) / 32);
    c.n_o = kInfinite;
    const RunResult plus = obprox_run(c, obj);
    const auto a = prox.trace.back(), b = plus.trace.back();
    const std::string tag = "seed " + std::to_string(seed) + ": ";
    check(b.F <= 1.05 * a.F, id, tag + "tiny-net OBProx-SG+ F " + fmt("%.4f", b.F) + " within 5% of Prox-SG " + fmt("%.4f", a.F));
    check(b.density_percent < a.density_percent, id,
          tag + "tiny-net OBProx-SG+ density " + fmt("%.1f", b.density_percent) + "% < Prox-SG " +
              fmt("%.1f", a.density_percent) + "%");
  }
}

// 8. Byte-identical traces.
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void criterion_8() {
  const std::string id = "8";
  const auto path = find_dataset("a9a", "OBPROX_A9A");
  if (!path) {
    check(false, id, "a9a dataset not found");
    return;
  }
  const fs::path root = fs::temp_directory_path() / "obprox_acceptance_determinism";
  fs::remove_all(root);
  ExperimentSpec spec;
  spec.dataset_path = path->string();
  spec.num_features = 123;
  for (const auto& s : known_solvers()) spec.solvers.push_back({s, {}});
  spec.out_dir = (root / "first").string();
  run_experiment(spec);
  spec.out_dir = (root / "second").string();
  run_experiment(spec);
  for (const auto& s : known_solvers()) {
    const std::string file = s + ".trace.csv";
    const std::string a = slurp(root / "first" / file), b = slurp(root / "second" / file);
    check(!a.empty() && a == b, id, "a9a " + file + " byte-identical across two runs (" + std::to_string(a.size()) + " bytes)");
  }
}

const std::vector<std::pair<std::string, std::function<void()>>> kCriteria{
    {"1a_a9a_reproduction", criterion_1a},
    {"1b_w8a_reproduction", criterion_1b},
    {"2a_density_ordering_a9a", [] { ordering("2a", "a9a", "OBPROX_A9A", 123); }},
    {"2b_density_ordering_w8a", [] { ordering("2b", "w8a", "OBPROX_W8A", 300); }},
    {"3_prox_oracle", criterion_3},
    {"4_gradient_checks", criterion_4},
    {"5_projection_properties", criterion_5},
    {"6_switching_exactness", criterion_6},
    {"7a_stationarity", criterion_7a},
    {"7b_tiny_net", criterion_7b},
    {"8_determinism", criterion_8},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> wanted(argv + 1, argv + argc);
  bool matched = wanted.empty();
  for (const auto& [name, fn] : kCriteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), name) == wanted.end()) continue;
    matched = true;
    std::printf("== %s\n", name.c_str());
    try {
      fn();
    } catch (const std::exception& e) {
      check(false, name, std::string("exception: ") + e.what());
    }
  }
  if (!matched) {
    std::fprintf(stderr, "unknown criterion; expected one of:");
    for (const auto& [name, fn] : kCriteria) std::fprintf(stderr, " %s", name.c_str());
    std::fprintf(stderr, "\n");
    return 2;
  }
  std::printf("%s: %d failing check(s)\n", g_failures == 0 ? "ALL PASS" : "FAILURES", g_failures);
  return g_failures == 0 ? 0 : 1;
}
