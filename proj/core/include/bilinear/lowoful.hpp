#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bilinear/linalg.hpp"

namespace bilinear {

/// Parameters of an almost-low-dimensional OFUL learner in R^p whose first k
/// coordinates carry the ridge penalty `lambda` and the remaining p - k carry
/// `lambda_perp`. Setting lambda_perp == lambda gives plain OFUL.
struct LowOfulConfig {
  std::size_t p = 1;
  std::size_t k = 1;
  double lambda = 1.0;
  double lambda_perp = 1.0;
  double B = 1.0;       // bound on ||theta||_2
  double B_perp = 0.0;  // bound on ||theta_{k+1:p}||_2
  double sigma = 0.0;   // sub-Gaussian noise scale
  double delta = 0.05;  // failure probability
  double c = 1.0;       // multiplier on sqrt(beta)

  // Optional third penalty level on coordinates [cross_begin, k); disabled
  // when lambda_cross == 0. Adds sqrt(lambda_cross) * B_cross to sqrt(beta).
  double lambda_cross = 0.0;
  std::size_t cross_begin = 0;
  double B_cross = 0.0;

  /// Throws InvalidInput when an invariant (1 <= k <= p, positive
  /// penalties, delta in (0, 1), nonnegative bounds) is violated.
  void validate() const;
};

/// T / (k log(1 + T / lambda)): the tail penalty that keeps
/// log(|V_T| / |Lambda|) within 2k log(1 + T / lambda).
double lambda_perp_default(double horizon, std::size_t k, double lambda);

/// Upper bound 2k log(1 + T / lambda) on log(|V_T| / |Lambda|) under
/// lambda_perp_default.
double logdet_budget(double horizon, std::size_t k, double lambda);

/// {theta : (theta - center)^T V (theta - center) <= radius_sq}.
struct ConfidenceEllipsoid {
  Vector center;
  Matrix V;
  double radius_sq = 0.0;
};

/// Membership with 1e-9 slack, evaluated as ||L^T (theta - center)||^2 from
/// the Cholesky factor of V.
bool contains(const ConfidenceEllipsoid& e, std::span<const double> theta);

/// What an update did, for callers that track V^{-1} quadratic forms.
struct UpdateInfo {
  Vector solved;       // V_{t-1}^{-1} a
  double denominator;  // 1 + a^T V_{t-1}^{-1} a
};

class LowOfulState {
 public:
  /// Rebuild the factor from the explicit V after this many rank-one updates.
  static constexpr std::size_t kRefreshInterval = 64;

  explicit LowOfulState(const LowOfulConfig& config);

  const LowOfulConfig& config() const noexcept { return config_; }
  const Vector& penalty() const noexcept { return penalty_; }
  const Matrix& gram() const noexcept { return gram_; }
  const Vector& response() const noexcept { return response_; }
  const Vector& theta_hat() const noexcept { return theta_hat_; }
  const Cholesky& factor() const noexcept { return factor_; }
  std::size_t rounds() const noexcept { return rounds_; }
  double logdet_gram() const noexcept { return logdet_gram_; }
  double logdet_penalty() const noexcept { return logdet_penalty_; }
  /// Incremented whenever the factor is rebuilt from scratch.
  std::uint64_t refresh_epoch() const noexcept { return refresh_epoch_; }

  /// c * (sigma sqrt(log(|V|/(|Lambda| delta^2))) + sqrt(lambda) B +
  /// sqrt(lambda_perp) B_perp).
  double sqrt_beta() const noexcept;
  double beta() const noexcept {
    const double s = sqrt_beta();
    return s * s;
  }

  /// a^T V^{-1} a by solving against the factor.
  double inverse_norm_sq(std::span<const double> a) const;
  /// <theta_hat, a> + sqrt(beta) ||a||_{V^{-1}}.
  double ucb(std::span<const double> a) const;

  ConfidenceEllipsoid ellipsoid() const;

  UpdateInfo update(std::span<const double> a, double y);

 private:
  void refresh();

  LowOfulConfig config_;
  Vector penalty_;
  Matrix gram_;
  Vector response_;
  Vector theta_hat_;
  Cholesky factor_;
  std::size_t rounds_ = 0;
  std::size_t since_refresh_ = 0;
  std::uint64_t refresh_epoch_ = 0;
  double logdet_gram_ = 0.0;
  double logdet_penalty_ = 0.0;
};

struct ArmChoice {
  std::size_t index = 0;
  double ucb = 0.0;
};

/// argmax_i ucb(arms.row(i)), ties to the lowest index. Throws InvalidInput
/// for an empty arm matrix or an arm with norm above 1 + 1e-9.
ArmChoice select_arm(const LowOfulState& state, const Matrix& arms);

/// UCB selection over a fixed arm matrix, keeping ||a_i||^2_{V^{-1}} current
/// through the rank-one identity after each update and recomputing it by
/// solves whenever the state refreshes its factor.
class CachedArmScorer {
 public:
  CachedArmScorer(Matrix arms, const LowOfulState& state);

  const Matrix& arms() const noexcept { return arms_; }
  ArmChoice select(const LowOfulState& state) const;
  /// Call once after every state.update(); `info` is that update's result.
  void observe(const LowOfulState& state, const UpdateInfo& info);

 private:
  void recompute(const LowOfulState& state);

  Matrix arms_;
  Vector inv_norm_sq_;
  std::uint64_t epoch_ = 0;
};

}  // namespace bilinear
