#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "bilinear/arm_selection.hpp"
#include "bilinear/completion.hpp"
#include "bilinear/environment.hpp"
#include "bilinear/linalg.hpp"
#include "bilinear/lowoful.hpp"
#include "bilinear/rng.hpp"

namespace bilinear {

/// How the tail bound B_perp is derived from the stage-1 budget.
enum class GammaMode {
  Full,        // full bound with ||X^{-1}||, ||Z^{-1}||, C1 and S_2 / S_r factors
  Simplified,  // B_perp = S_2 sigma^2 d^3 r / T1
};

std::string_view to_string(GammaMode m) noexcept;
GammaMode parse_gamma_mode(std::string_view name);

struct EstrConfig {
  std::size_t T = 10000;
  std::size_t T1 = 2048;
  std::size_t r = 1;
  double S_F = 1.0;
  double S_2 = 1.0;
  double S_r = 1.0;
  double lambda = 1.0;
  double delta = 0.05;
  double c = 1.0;
  GammaMode gamma_mode = GammaMode::Simplified;
  CompletionMethod completion_method = CompletionMethod::BurerMonteiro;
  double C1 = 1.0;
  /// Penalty on the mixed subspace blocks in stage 2; 0 disables it.
  double lambda_cross = 0.0;
  SelectionOptions selection;
  CompletionOptions completion;

  /// Throws InvalidInput unless 0 < S_r <= S_2 <= S_F, r >= 1, T >= 1 and,
  /// when `uses_T1`, 1 <= T1 < T.
  void validate(bool uses_T1 = true) const;
};

/// T1 = ceil(sqrt(T) d^{3/2} sqrt(r)), clamped to [1, T - 1].
std::size_t default_exploration_length(std::size_t T, std::size_t d, std::size_t r);

struct SubspaceEstimate {
  Matrix U_hat;       // d1 x r
  Matrix U_hat_perp;  // d1 x (d1 - r)
  Matrix V_hat;       // d2 x r
  Matrix V_hat_perp;  // d2 x (d2 - r)
  double gamma = 0.0;
};

/// Top-r singular subspaces of theta_hat and their complements.
SubspaceEstimate estimate_subspaces(const Matrix& theta_hat, std::size_t r);

/// Every (i, j) cell floor(T1 / (d1 d2)) times plus T1 mod d1 d2 distinct
/// uniformly drawn cells, in shuffled order.
std::vector<std::pair<std::size_t, std::size_t>> stage1_schedule(std::size_t T1,
                                                                std::size_t d1,
                                                                std::size_t d2,
                                                                Rng& rng);

/// Solves X Theta Z^T = K_hat. Square X and Z use LU solves; tall ones (more
/// arms than dimensions) use least squares. Throws SingularMatrix when X or Z
/// is numerically rank deficient.
Matrix estimate_theta(const Matrix& K_hat, const Matrix& X, const Matrix& Z);

struct TailBounds {
  double gamma = 0.0;
  double B = 0.0;
  double B_perp = 0.0;
};

/// gamma(T1) and the derived (B, B_perp) for stage 2.
TailBounds gamma_bound(const EstrConfig& config, const Matrix& X, const Matrix& Z,
                       double sigma, std::size_t d, std::size_t r, std::size_t T1);

/// k = (d1 + d2) r - r^2.
std::size_t low_dimension(std::size_t d1, std::size_t d2, std::size_t r);

/// Rotated, block-vectorized arm pairs. Row i * |Z| + j is the vector for
/// (X[i], Z[j]): blocks [r x r; (d1-r) x r; r x (d2-r); (d1-r) x (d2-r)] of
/// x' z'^T, each vectorized column-major, where x' = [U U_perp]^T x.
Matrix rotate_and_vectorize(const ArmSet& X, const ArmSet& Z, const SubspaceEstimate& est);

/// M = [U U_perp]^T Theta [V V_perp].
Matrix rotated_theta(const Matrix& theta, const SubspaceEstimate& est);

/// vec(M) in the same block order rotate_and_vectorize uses.
Vector rearrange_theta(const Matrix& M, std::size_t r);

/// Column-major vec(x z^T) for every pair, row i * |Z| + j.
Matrix vectorize_pairs(const ArmSet& X, const ArmSet& Z);

/// Refit times round(10^{m/2}), m = 1, 2, ..., deduplicated, up to T.
std::vector<std::size_t> isse_knots(std::size_t T);

/// Stage-1 diagnostics computed against the ground truth.
struct Stage1Audit {
  SubsetSelection left;
  SubsetSelection right;
  CompletionResult completion;
  Matrix theta_hat;
  SubspaceEstimate estimate;
  TailBounds bounds;
  double regret = 0.0;           // cumulative pseudo-regret over T1 rounds
  double regret_bound = 0.0;     // 2 S_2 T1
  double tail_norm_sq = 0.0;     // ||theta*_{k+1:p}||^2 in rotated coordinates
  double tail_bound = 0.0;       // ||U_perp^T U*||_F^2 ||S*||_2^2 ||V_perp^T V*||_F^2
  double sin_theta = 0.0;        // ||U_perp^T U*||_F ||V_perp^T V*||_F
  double wedin_bound = 0.0;      // ||Theta_hat - Theta*||_F^2 / (s*_r)^2
  double rotation_error = 0.0;   // max |<a, theta*> - x^T Theta* z| over pairs
};

/// Per-round checks gathered by the LowOFUL loops.
struct RunAudit {
  bool beta_monotone = true;
  double max_logdet_gap = 0.0;  // max_t log(|V_t| / |Lambda|)
  double logdet_budget = 0.0;   // 2k log(1 + horizon / lambda) of the active state
  bool logdet_within_budget = true;
  std::size_t refits = 0;          // ISSE only
  std::size_t skipped_refits = 0;  // ISSE only
  std::optional<Stage1Audit> stage1;
};

struct RunResult {
  RegretTrace trace;
  RunAudit audit;
};

/// Explore-subspace-then-refine: T1 uniform pulls on selected arm pairs,
/// low-rank completion, then T - T1 rounds of LowOFUL in rotated coordinates.
RunResult run_estr_detailed(const BilinearEnvironment& env, const ArmSet& X,
                            const ArmSet& Z, const EstrConfig& config, Rng& rng);
RegretTrace run_estr(const BilinearEnvironment& env, const ArmSet& X, const ArmSet& Z,
                     const EstrConfig& config, Rng& rng);

/// OFUL on vec(x z^T) with a uniform penalty over all d1 d2 coordinates.
RunResult run_oful_baseline_detailed(const BilinearEnvironment& env, const ArmSet& X,
                                     const ArmSet& Z, const EstrConfig& config, Rng& rng);
RegretTrace run_oful_baseline(const BilinearEnvironment& env, const ArmSet& X,
                              const ArmSet& Z, const EstrConfig& config, Rng& rng);

/// LowOFUL without a dedicated exploration stage: at each knot the subspaces
/// are refit from all past pulls and the learner is rebuilt by replaying
/// history in the new coordinates.
RunResult run_isse_detailed(const BilinearEnvironment& env, const ArmSet& X,
                            const ArmSet& Z, const EstrConfig& config, Rng& rng);
RegretTrace run_isse(const BilinearEnvironment& env, const ArmSet& X, const ArmSet& Z,
                     const EstrConfig& config, Rng& rng);

}  // namespace bilinear
