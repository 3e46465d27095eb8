#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bilinear/completion.hpp"
#include "bilinear/environment.hpp"
#include "bilinear/error.hpp"
#include "bilinear/estr.hpp"

namespace bilinear {

enum class Method { Oful, EstrOs, EstrBm, Isse };

std::string_view to_string(Method m) noexcept;
/// "oful", "estr-os", "estr-bm" or "isse".
Method parse_method(std::string_view name);

/// Candidate values tried when tuning one method. T1 is ignored for methods
/// without an exploration stage.
struct MethodGrid {
  std::vector<double> c;
  std::vector<std::size_t> T1;

  friend bool operator==(const MethodGrid&, const MethodGrid&) = default;
};

MethodGrid default_grid(Method m);

struct ExperimentConfig {
  std::size_t d1 = 8;
  std::size_t d2 = 8;
  std::size_t r = 1;
  double sigma = 0.01;
  NoiseKind noise = NoiseKind::Gaussian;
  std::size_t n_arms_left = 16;
  std::size_t n_arms_right = 16;
  std::size_t T = 10000;
  std::size_t reps = 60;
  std::uint64_t seed = 0;
  double lambda = 1.0;
  double delta = 0.05;
  double theta_frobenius = 1.0;  // ||Theta*||_F of every drawn instance
  std::vector<Method> methods{Method::Oful, Method::EstrOs, Method::EstrBm, Method::Isse};

  /// Untuned settings. T1 defaults to default_exploration_length().
  double c = 1.0;
  std::optional<std::size_t> T1;
  GammaMode gamma_mode = GammaMode::Simplified;
  double C1 = 1.0;
  double lambda_cross = 0.0;

  /// With tune set, every method runs its grid (explicit or default_grid) and
  /// keeps the point with the smallest mean final regret.
  bool tune = true;
  std::map<Method, MethodGrid> grids;

  std::string out_dir = "results";
  std::size_t csv_stride = 10;
  std::size_t threads = 0;  // 0 = hardware concurrency

  /// Throws ConfigError naming the first offending field.
  void validate() const;
  std::size_t exploration_length() const;
  /// Grid actually used for m: explicit, default when tuning, or the single
  /// untuned point.
  MethodGrid grid_for(Method m) const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// JSON object text; missing keys take their defaults, unknown keys and
/// invalid values raise ConfigError. Empty or all-whitespace text is `{}`.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical JSON with every key present; parse_config(dump_config(c)) == c.
std::string dump_config(const ExperimentConfig& config);

/// One problem instance: Theta* and both arm sets.
struct Instance {
  BilinearEnvironment env;
  ArmSet X;
  ArmSet Z;
};

/// Instance for repetition `rep`; a pure function of (seed, rep).
Instance make_instance(const ExperimentConfig& config, std::size_t rep);

/// Algorithm parameters for method m at one grid point.
EstrConfig method_config(const ExperimentConfig& config, const Instance& inst, Method m,
                         double c, std::size_t T1);

/// Stream for one run; a pure function of (seed, method, grid point, rep).
Rng run_rng(const ExperimentConfig& config, Method m, std::size_t grid_point, std::size_t rep);

RunResult run_method(const Instance& inst, const EstrConfig& config, Method m, Rng& rng);

struct GridPointSummary {
  double c = 0.0;
  std::size_t T1 = 0;
  double mean_final_regret = 0.0;
  std::size_t failures = 0;
};

struct MethodResult {
  Method method = Method::Oful;
  double c = 0.0;          // chosen
  std::size_t T1 = 0;      // chosen; 0 for methods without exploration
  std::vector<std::size_t> reps;      // repetition ids of successful runs
  std::vector<RegretTrace> traces;    // aligned with reps
  Vector mean;          // mean cumulative regret, index t - 1
  Vector half_width;    // 1.96 * sample std / sqrt(n)
  std::vector<GridPointSummary> grid;
  std::vector<std::string> errors;    // failed runs at the chosen point
  double wall_seconds = 0.0;
};

struct AggregateResult {
  std::size_t T = 0;
  std::vector<MethodResult> methods;  // config order
};

/// Mean and 1.96 * sample-std / sqrt(n) half-width across equally long curves.
void mean_and_band(const std::vector<const Vector*>& curves, Vector& mean, Vector& half_width);

/// Runs every method over its grid and repetitions. Throws ExperimentAborted
/// when more than 10% of the runs at a grid point fail.
AggregateResult run_experiment(const ExperimentConfig& config);

class ExperimentAborted : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Output

struct CsvRow {
  std::string method;
  std::size_t rep = 0;
  std::size_t t = 0;
  double inst_regret = 0.0;
  double cum_regret = 0.0;
};

/// Rounds written: every t <= 100, every multiple of stride, and t = T.
bool logged_round(std::size_t t, std::size_t T, std::size_t stride) noexcept;

void emit_csv(const AggregateResult& result, const std::filesystem::path& path,
              std::size_t stride = 10);
std::vector<CsvRow> load_csv(const std::filesystem::path& path);

/// Mean curve with band for one method at the listed rounds.
struct CurveSummary {
  std::string method;
  std::vector<std::size_t> t;
  Vector mean;
  Vector half_width;
};

std::vector<CurveSummary> summarize(const AggregateResult& result);
/// Groups rows by method in first-appearance order; rounds common to all reps.
std::vector<CurveSummary> summarize(const std::vector<CsvRow>& rows);

void emit_plot(const std::vector<CurveSummary>& curves, const std::filesystem::path& path);
void emit_plot(const AggregateResult& result, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Invariant checks

struct InvariantReport {
  std::size_t runs = 0;
  std::size_t checks = 0;
  std::vector<std::string> violations;
  bool ok() const noexcept { return violations.empty(); }
};

/// Runs ESTR (alternating completion methods), ISSE and OFUL on `reps`
/// instances with untuned settings and checks the per-run algebraic
/// invariants: rotated tail bound, sin-theta transfer bound, stage-1 regret
/// bound, log-det budget, monotone confidence width, rotation identity and
/// determinism under a repeated seed.
InvariantReport check_invariants(const ExperimentConfig& config);

}  // namespace bilinear
