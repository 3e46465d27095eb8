#include "bilinear/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>
#include <spdlog/spdlog.h>

namespace bilinear {

using json = nlohmann::json;

namespace {

const char* const kKnownKeys[] = {
    "d1",      "d2",         "r",          "sigma",   "noise",           "n_arms_left",
    "n_arms_right", "T",     "reps",       "seed",    "lambda",          "delta",
    "theta_frobenius", "methods", "c",     "T1",      "gamma_mode",      "C1",
    "lambda_cross", "tune",  "grids",      "out_dir", "csv_stride",      "threads"};

std::size_t get_count(const json& j, const char* key, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ConfigError(key, "expected a nonnegative integer");
  }
  return v.get<std::size_t>();
}

double get_real(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError(key, "expected a number");
  return v.get<double>();
}

std::string get_string(const json& j, const char* key, std::string fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_string()) throw ConfigError(key, "expected a string");
  return v.get<std::string>();
}

template <typename Parse>
auto parse_named(const json& j, const char* key, Parse&& parse) {
  try {
    return parse(j.get<std::string>());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key, e.what());
  }
}

MethodGrid parse_grid(const json& j, const std::string& field) {
  if (!j.is_object()) throw ConfigError(field, "expected an object with 'c' and/or 'T1'");
  MethodGrid g;
  for (const auto& [key, value] : j.items()) {
    const std::string name = field + "." + key;
    if (!value.is_array()) throw ConfigError(name, "expected a list");
    for (const json& v : value) {
      if (key == "c") {
        if (!v.is_number()) throw ConfigError(name, "expected numbers");
        g.c.push_back(v.get<double>());
      } else if (key == "T1") {
        if (!v.is_number_integer() || v.get<std::int64_t>() < 1) {
          throw ConfigError(name, "expected positive integers");
        }
        g.T1.push_back(v.get<std::size_t>());
      } else {
        throw ConfigError(name, "unknown grid key");
      }
    }
  }
  return g;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

bool has_exploration(Method m) noexcept { return m == Method::EstrOs || m == Method::EstrBm; }

struct GridPoint {
  double c;
  std::size_t T1;
};

std::vector<GridPoint> expand(const MethodGrid& g) {
  std::vector<GridPoint> out;
  for (double c : g.c)
    for (std::size_t t1 : g.T1) out.push_back({c, t1});
  return out;
}

}  // namespace

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::Oful: return "oful";
    case Method::EstrOs: return "estr-os";
    case Method::EstrBm: return "estr-bm";
    case Method::Isse: return "isse";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::Oful, Method::EstrOs, Method::EstrBm, Method::Isse}) {
    if (name == to_string(m)) return m;
  }
  throw InvalidInput("unknown method '" + std::string(name) + "'");
}

MethodGrid default_grid(Method m) {
  MethodGrid g{{0.01, 0.05, 0.1, 0.5, 1.0}, {}};
  if (has_exploration(m)) g.T1 = {256, 512, 1024, 2048, 4096};
  return g;
}

void ExperimentConfig::validate() const {
  if (d1 < 1) throw ConfigError("d1", "must be >= 1");
  if (d2 < 1) throw ConfigError("d2", "must be >= 1");
  if (r < 1 || r > std::min(d1, d2)) throw ConfigError("r", "must lie in [1, min(d1, d2)]");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma", "must be >= 0");
  if (n_arms_left < d1) throw ConfigError("n_arms_left", "must be >= d1");
  if (n_arms_right < d2) throw ConfigError("n_arms_right", "must be >= d2");
  if (T < 2) throw ConfigError("T", "must be >= 2");
  if (reps < 1) throw ConfigError("reps", "must be >= 1");
  if (!(lambda > 0.0)) throw ConfigError("lambda", "must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta", "must lie in (0, 1)");
  if (!(theta_frobenius > 0.0)) throw ConfigError("theta_frobenius", "must be positive");
  if (methods.empty()) throw ConfigError("methods", "must not be empty");
  if (std::set<Method>(methods.begin(), methods.end()).size() != methods.size()) {
    throw ConfigError("methods", "duplicate method");
  }
  if (!(c >= 0.0)) throw ConfigError("c", "must be >= 0");
  if (T1 && !(*T1 >= 1 && *T1 < T)) throw ConfigError("T1", "must lie in [1, T)");
  if (!(C1 > 0.0)) throw ConfigError("C1", "must be positive");
  if (!(lambda_cross >= 0.0)) throw ConfigError("lambda_cross", "must be >= 0");
  if (csv_stride < 1) throw ConfigError("csv_stride", "must be >= 1");
  for (const auto& [m, g] : grids) {
    const std::string field = "grids." + std::string(to_string(m));
    for (double v : g.c) {
      if (!(v >= 0.0)) throw ConfigError(field + ".c", "values must be >= 0");
    }
    for (std::size_t v : g.T1) {
      if (!(v >= 1 && v < T)) throw ConfigError(field + ".T1", "values must lie in [1, T)");
    }
  }
  for (Method m : methods) {
    const MethodGrid g = grid_for(m);
    const std::string field = "grids." + std::string(to_string(m));
    if (g.c.empty()) throw ConfigError(field + ".c", "empty grid");
    if (g.T1.empty()) throw ConfigError(field + ".T1", "empty grid");
  }
}

std::size_t ExperimentConfig::exploration_length() const {
  return T1 ? *T1 : default_exploration_length(T, std::max(d1, d2), r);
}

MethodGrid ExperimentConfig::grid_for(Method m) const {
  MethodGrid g;
  if (auto it = grids.find(m); it != grids.end()) {
    g = it->second;
  } else if (tune) {
    g = default_grid(m);
    std::erase_if(g.T1, [&](std::size_t v) { return v >= T; });
  }
  if (g.c.empty()) g.c = {c};
  if (!has_exploration(m)) {
    g.T1 = {0};
  } else if (g.T1.empty()) {
    g.T1 = {exploration_length()};
  }
  return g;
}

ExperimentConfig parse_config(std::string_view text) {
  json j;
  if (std::all_of(text.begin(), text.end(), [](unsigned char ch) { return std::isspace(ch); })) {
    j = json::object();
  } else {
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError("<document>", e.what());
    }
  }
  if (!j.is_object()) throw ConfigError("<document>", "expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(kKnownKeys), std::end(kKnownKeys), key) == std::end(kKnownKeys)) {
      throw ConfigError(key, "unknown key");
    }
  }

  ExperimentConfig c;
  c.d1 = get_count(j, "d1", c.d1);
  c.d2 = get_count(j, "d2", c.d2);
  c.r = get_count(j, "r", c.r);
  c.sigma = get_real(j, "sigma", c.sigma);
  if (j.contains("noise")) {
    if (!j["noise"].is_string()) throw ConfigError("noise", "expected a string");
    c.noise = parse_named(j["noise"], "noise", [](const std::string& s) { return parse_noise_kind(s); });
  }
  c.n_arms_left = get_count(j, "n_arms_left", c.n_arms_left);
  c.n_arms_right = get_count(j, "n_arms_right", c.n_arms_right);
  c.T = get_count(j, "T", c.T);
  c.reps = get_count(j, "reps", c.reps);
  if (j.contains("seed")) {
    const json& v = j["seed"];
    if (!v.is_number_unsigned()) throw ConfigError("seed", "expected a nonnegative integer");
    c.seed = v.get<std::uint64_t>();
  }
  c.lambda = get_real(j, "lambda", c.lambda);
  c.delta = get_real(j, "delta", c.delta);
  c.theta_frobenius = get_real(j, "theta_frobenius", c.theta_frobenius);
  if (j.contains("methods")) {
    const json& v = j["methods"];
    if (!v.is_array()) throw ConfigError("methods", "expected a list of method names");
    c.methods.clear();
    for (const json& m : v) {
      if (!m.is_string()) throw ConfigError("methods", "expected method names");
      c.methods.push_back(parse_named(m, "methods", [](const std::string& s) { return parse_method(s); }));
    }
  }
  c.c = get_real(j, "c", c.c);
  if (j.contains("T1") && !j["T1"].is_null()) c.T1 = get_count(j, "T1", 0);
  if (j.contains("gamma_mode")) {
    if (!j["gamma_mode"].is_string()) throw ConfigError("gamma_mode", "expected a string");
    c.gamma_mode = parse_named(j["gamma_mode"], "gamma_mode",
                               [](const std::string& s) { return parse_gamma_mode(s); });
  }
  c.C1 = get_real(j, "C1", c.C1);
  c.lambda_cross = get_real(j, "lambda_cross", c.lambda_cross);
  if (j.contains("tune")) {
    if (!j["tune"].is_boolean()) throw ConfigError("tune", "expected true or false");
    c.tune = j["tune"].get<bool>();
  }
  if (j.contains("grids")) {
    const json& g = j["grids"];
    if (!g.is_object()) throw ConfigError("grids", "expected an object keyed by method");
    for (const auto& [name, value] : g.items()) {
      const std::string field = "grids." + name;
      const Method m = parse_named(json(name), field.c_str(),
                                   [](const std::string& s) { return parse_method(s); });
      c.grids[m] = parse_grid(value, field);
    }
  }
  c.out_dir = get_string(j, "out_dir", c.out_dir);
  c.csv_stride = get_count(j, "csv_stride", c.csv_stride);
  c.threads = get_count(j, "threads", c.threads);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& c) {
  json j = json::object();
  j["d1"] = c.d1;
  j["d2"] = c.d2;
  j["r"] = c.r;
  j["sigma"] = c.sigma;
  j["noise"] = std::string(to_string(c.noise));
  j["n_arms_left"] = c.n_arms_left;
  j["n_arms_right"] = c.n_arms_right;
  j["T"] = c.T;
  j["reps"] = c.reps;
  j["seed"] = c.seed;
  j["lambda"] = c.lambda;
  j["delta"] = c.delta;
  j["theta_frobenius"] = c.theta_frobenius;
  j["methods"] = json::array();
  for (Method m : c.methods) j["methods"].push_back(std::string(to_string(m)));
  j["c"] = c.c;
  j["T1"] = c.T1 ? json(*c.T1) : json(nullptr);
  j["gamma_mode"] = std::string(to_string(c.gamma_mode));
  j["C1"] = c.C1;
  j["lambda_cross"] = c.lambda_cross;
  j["tune"] = c.tune;
  j["grids"] = json::object();
  for (const auto& [m, g] : c.grids) {
    json e = json::object();
    if (!g.c.empty()) e["c"] = g.c;
    if (!g.T1.empty()) e["T1"] = g.T1;
    j["grids"][std::string(to_string(m))] = e;
  }
  j["out_dir"] = c.out_dir;
  j["csv_stride"] = c.csv_stride;
  j["threads"] = c.threads;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

Instance make_instance(const ExperimentConfig& config, std::size_t rep) {
  const Rng base = Rng(config.seed).derive("instance").derive(rep);
  Rng theta_rng = base.derive("theta");
  Rng left_rng = base.derive("left");
  Rng right_rng = base.derive("right");
  Matrix theta = make_low_rank_theta(config.d1, config.d2, config.r, config.theta_frobenius,
                                     theta_rng);
  return Instance{BilinearEnvironment(std::move(theta), config.sigma, config.noise),
                  generate_sphere_arms(config.n_arms_left, config.d1, left_rng),
                  generate_sphere_arms(config.n_arms_right, config.d2, right_rng)};
}

EstrConfig method_config(const ExperimentConfig& config, const Instance& inst, Method m,
                         double c, std::size_t T1) {
  EstrConfig e;
  e.T = config.T;
  e.T1 = has_exploration(m) ? T1 : config.exploration_length();
  e.r = config.r;
  e.S_F = config.theta_frobenius;
  e.S_2 = config.theta_frobenius;
  e.S_r = std::min(inst.env.singular_value(config.r), e.S_2);
  e.lambda = config.lambda;
  e.delta = config.delta;
  e.c = c;
  e.gamma_mode = config.gamma_mode;
  e.completion_method =
      m == Method::EstrOs ? CompletionMethod::OptSpaceStyle : CompletionMethod::BurerMonteiro;
  e.C1 = config.C1;
  e.lambda_cross = config.lambda_cross;
  return e;
}

Rng run_rng(const ExperimentConfig& config, Method m, std::size_t grid_point, std::size_t rep) {
  return Rng(config.seed).derive("run").derive(to_string(m)).derive(grid_point).derive(rep);
}

RunResult run_method(const Instance& inst, const EstrConfig& config, Method m, Rng& rng) {
  RunResult out;
  switch (m) {
    case Method::Oful: out = run_oful_baseline_detailed(inst.env, inst.X, inst.Z, config, rng); break;
    case Method::EstrOs:
    case Method::EstrBm: out = run_estr_detailed(inst.env, inst.X, inst.Z, config, rng); break;
    case Method::Isse: out = run_isse_detailed(inst.env, inst.X, inst.Z, config, rng); break;
  }
  return out;
}

void mean_and_band(const std::vector<const Vector*>& curves, Vector& mean, Vector& half_width) {
  mean.clear();
  half_width.clear();
  if (curves.empty()) return;
  const std::size_t len = curves.front()->size();
  for (const Vector* c : curves) {
    if (c->size() != len) throw InvalidDimension("mean_and_band: curves differ in length");
  }
  const double n = static_cast<double>(curves.size());
  mean.assign(len, 0.0);
  half_width.assign(len, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    double s = 0.0;
    for (const Vector* c : curves) s += (*c)[t];
    const double mu = s / n;
    mean[t] = mu;
    if (curves.size() < 2) continue;
    double ss = 0.0;
    for (const Vector* c : curves) ss += ((*c)[t] - mu) * ((*c)[t] - mu);
    half_width[t] = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
}

AggregateResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::vector<std::optional<Instance>> instances(config.reps);
  parallel_for(config.reps, config.threads,
               [&](std::size_t rep) { instances[rep].emplace(make_instance(config, rep)); });

  AggregateResult result;
  result.T = config.T;
  for (Method m : config.methods) {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<GridPoint> points = expand(config.grid_for(m));
    MethodResult best;
    best.method = m;
    double best_mean = std::numeric_limits<double>::infinity();

    for (std::size_t gp = 0; gp < points.size(); ++gp) {
      std::vector<std::optional<RegretTrace>> traces(config.reps);
      std::vector<std::string> errors(config.reps);
      parallel_for(config.reps, config.threads, [&](std::size_t rep) {
        try {
          const Instance& inst = *instances[rep];
          const EstrConfig ec = method_config(config, inst, m, points[gp].c, points[gp].T1);
          Rng rng = run_rng(config, m, gp, rep);
          RunResult run = run_method(inst, ec, m, rng);
          traces[rep] = std::move(run.trace);
        } catch (const std::exception& e) {
          errors[rep] = e.what();
        }
      });
      GridPointSummary summary{points[gp].c, points[gp].T1, 0.0, 0};
      MethodResult candidate;
      candidate.method = m;
      candidate.c = points[gp].c;
      candidate.T1 = points[gp].T1;
      for (std::size_t rep = 0; rep < config.reps; ++rep) {
        if (traces[rep]) {
          candidate.reps.push_back(rep);
          candidate.traces.push_back(std::move(*traces[rep]));
        } else {
          ++summary.failures;
          candidate.errors.push_back("rep " + std::to_string(rep) + ": " + errors[rep]);
          spdlog::warn("{} (c={}, T1={}) rep {} failed: {}", to_string(m), points[gp].c,
                       points[gp].T1, rep, errors[rep]);
        }
      }
      if (summary.failures * 10 > config.reps) {
        throw ExperimentAborted(std::string(to_string(m)) + ": " +
                                std::to_string(summary.failures) + " of " +
                                std::to_string(config.reps) + " runs failed");
      }
      double total = 0.0;
      for (const RegretTrace& tr : candidate.traces) total += tr.total();
      summary.mean_final_regret = total / static_cast<double>(candidate.traces.size());
      best.grid.push_back(summary);
      if (summary.mean_final_regret < best_mean) {
        best_mean = summary.mean_final_regret;
        candidate.grid = std::move(best.grid);
        best = std::move(candidate);
      }
    }
    std::vector<const Vector*> curves;
    for (const RegretTrace& tr : best.traces) curves.push_back(&tr.cumulative());
    mean_and_band(curves, best.mean, best.half_width);
    best.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    spdlog::info("{}: c={} T1={} mean final regret {:.4f} +- {:.4f} ({:.1f}s)", to_string(m),
                 best.c, best.T1, best.mean.empty() ? 0.0 : best.mean.back(),
                 best.half_width.empty() ? 0.0 : best.half_width.back(), best.wall_seconds);
    result.methods.push_back(std::move(best));
  }
  return result;
}

// ---------------------------------------------------------------------------

InvariantReport check_invariants(const ExperimentConfig& config) {
  config.validate();
  InvariantReport report;
  std::mutex mu;
  auto check = [&](bool ok, std::size_t rep, std::string_view method, std::string_view what) {
    std::lock_guard lock(mu);
    ++report.checks;
    if (!ok) {
      report.violations.push_back("rep " + std::to_string(rep) + " " + std::string(method) +
                                  ": " + std::string(what));
    }
  };
  auto within = [](double lhs, double rhs) { return lhs <= rhs * (1.0 + 1e-9) + 1e-12; };

  parallel_for(config.reps, config.threads, [&](std::size_t rep) {
    const Instance inst = make_instance(config, rep);
    const Method estr = rep % 2 == 0 ? Method::EstrBm : Method::EstrOs;
    const std::size_t k = low_dimension(config.d1, config.d2, config.r);
    check(k == config.d1 * config.d2 - (config.d1 - config.r) * (config.d2 - config.r), rep,
          "estr", "k formulas disagree");
    for (Method m : {estr, Method::Isse, Method::Oful}) {
      const EstrConfig ec = method_config(config, inst, m, config.c, config.exploration_length());
      Rng rng = run_rng(config, m, 0, rep);
      RunResult run;
      try {
        run = run_method(inst, ec, m, rng);
      } catch (const std::exception& e) {
        check(false, rep, to_string(m), std::string("run failed: ") + e.what());
        continue;
      }
      {
        std::lock_guard lock(mu);
        ++report.runs;
      }
      const RunAudit& a = run.audit;
      check(a.beta_monotone, rep, to_string(m), "confidence width decreased");
      check(a.logdet_within_budget, rep, to_string(m), "log-det gap exceeded 2k log(1 + T/lambda)");
      const auto& cum = run.trace.cumulative();
      check(std::is_sorted(cum.begin(), cum.end()) && run.trace.size() == config.T, rep,
            to_string(m), "cumulative regret not monotone or wrong length");
      if (a.stage1) {
        const Stage1Audit& s = *a.stage1;
        check(within(s.tail_norm_sq, s.tail_bound), rep, to_string(m),
              "rotated tail norm exceeds angle bound");
        check(within(s.sin_theta, s.wedin_bound), rep, to_string(m),
              "sin-theta product exceeds transfer bound");
        check(s.regret <= s.regret_bound, rep, to_string(m), "stage-1 regret exceeds 2 S_2 T1");
        check(s.rotation_error <= 1e-10, rep, to_string(m), "rotation changes rewards");
      }
      if (rep == 0) {
        Rng again = run_rng(config, m, 0, rep);
        const RunResult replay = run_method(inst, ec, m, again);
        check(replay.trace.instantaneous() == run.trace.instantaneous(), rep, to_string(m),
              "same seed gave a different trace");
      }
    }
  });
  std::sort(report.violations.begin(), report.violations.end());
  return report;
}

}  // namespace bilinear
