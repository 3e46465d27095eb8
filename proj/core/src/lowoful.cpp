#include "bilinear/lowoful.hpp"

#include <algorithm>
#include <cmath>

#include "bilinear/error.hpp"

namespace bilinear {

namespace {

constexpr double kArmNormSlack = 1e-9;

void check_arm(std::span<const double> a, std::size_t p) {
  if (a.size() != p) throw InvalidDimension("LowOFUL: arm dimension mismatch");
  const double n = norm2(a);
  if (!std::isfinite(n)) throw InvalidInput("LowOFUL: arm has non-finite entries");
  if (n > 1.0 + kArmNormSlack) throw InvalidInput("LowOFUL: arm norm exceeds 1");
}

}  // namespace

void LowOfulConfig::validate() const {
  if (p == 0 || k == 0 || k > p) throw InvalidInput("LowOfulConfig: need 1 <= k <= p");
  if (!(lambda > 0.0) || !(lambda_perp > 0.0)) {
    throw InvalidInput("LowOfulConfig: penalties must be positive");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidInput("LowOfulConfig: delta must lie in (0, 1)");
  if (!(B >= 0.0) || !(B_perp >= 0.0) || !(sigma >= 0.0) || !(c >= 0.0)) {
    throw InvalidInput("LowOfulConfig: bounds, sigma and c must be nonnegative");
  }
  if (lambda_cross < 0.0 || (lambda_cross > 0.0 && cross_begin > k) || !(B_cross >= 0.0)) {
    throw InvalidInput("LowOfulConfig: invalid cross-block penalty");
  }
}

double lambda_perp_default(double horizon, std::size_t k, double lambda) {
  if (!(horizon >= 1.0)) throw InvalidInput("lambda_perp_default: horizon must be >= 1");
  return horizon / (static_cast<double>(k) * std::log1p(horizon / lambda));
}

double logdet_budget(double horizon, std::size_t k, double lambda) {
  return 2.0 * static_cast<double>(k) * std::log1p(horizon / lambda);
}

bool contains(const ConfidenceEllipsoid& e, std::span<const double> theta) {
  if (theta.size() != e.center.size()) throw InvalidDimension("contains: dimension mismatch");
  Vector diff(theta.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = theta[i] - e.center[i];
  const Vector lt = Cholesky(e.V).lower_transpose_times(diff);
  return dot(lt, lt) <= e.radius_sq + 1e-9;
}

// ---------------------------------------------------------------------------

LowOfulState::LowOfulState(const LowOfulConfig& config) : config_(config) {
  config_.validate();
  const std::size_t p = config_.p;
  penalty_.assign(p, config_.lambda_perp);
  for (std::size_t i = 0; i < config_.k; ++i) penalty_[i] = config_.lambda;
  if (config_.lambda_cross > 0.0) {
    for (std::size_t i = config_.cross_begin; i < config_.k; ++i) {
      penalty_[i] = config_.lambda_cross;
    }
  }
  gram_ = Matrix::diagonal(penalty_);
  response_.assign(p, 0.0);
  theta_hat_.assign(p, 0.0);
  factor_ = Cholesky(gram_);
  for (double l : penalty_) logdet_penalty_ += std::log(l);
  logdet_gram_ = logdet_penalty_;
}

double LowOfulState::sqrt_beta() const noexcept {
  const double log_ratio =
      std::max(0.0, logdet_gram_ - logdet_penalty_ - 2.0 * std::log(config_.delta));
  double width = config_.sigma * std::sqrt(log_ratio) +
                 std::sqrt(config_.lambda) * config_.B +
                 std::sqrt(config_.lambda_perp) * config_.B_perp;
  if (config_.lambda_cross > 0.0) width += std::sqrt(config_.lambda_cross) * config_.B_cross;
  return config_.c * width;
}

double LowOfulState::inverse_norm_sq(std::span<const double> a) const {
  if (a.size() != config_.p) throw InvalidDimension("inverse_norm_sq: dimension mismatch");
  Vector w(a.begin(), a.end());
  factor_.forward_substitute(w);
  return dot(w, w);
}

double LowOfulState::ucb(std::span<const double> a) const {
  return dot(theta_hat_, a) + sqrt_beta() * std::sqrt(inverse_norm_sq(a));
}

ConfidenceEllipsoid LowOfulState::ellipsoid() const {
  return {theta_hat_, gram_, beta()};
}

UpdateInfo LowOfulState::update(std::span<const double> a, double y) {
  check_arm(a, config_.p);
  if (!std::isfinite(y)) throw InvalidInput("LowOFUL: reward is not finite");
  const std::size_t p = config_.p;
  UpdateInfo info{factor_.solve(a), 0.0};
  info.denominator = 1.0 + dot(a, info.solved);

  for (std::size_t i = 0; i < p; ++i) {
    auto row = gram_.row(i);
    for (std::size_t j = 0; j < p; ++j) row[j] += a[i] * a[j];
    response_[i] += a[i] * y;
  }
  logdet_gram_ += std::log(info.denominator);
  ++rounds_;
  if (++since_refresh_ >= kRefreshInterval) {
    refresh();
  } else {
    factor_.rank_one_update(a);
    theta_hat_ = factor_.solve(response_);
  }
  return info;
}

void LowOfulState::refresh() {
  factor_ = Cholesky(gram_);
  logdet_gram_ = factor_.log_det();
  theta_hat_ = factor_.solve(response_);
  since_refresh_ = 0;
  ++refresh_epoch_;
}

ArmChoice select_arm(const LowOfulState& state, const Matrix& arms) {
  if (arms.rows() == 0) throw InvalidInput("select_arm: empty arm list");
  ArmChoice best{0, 0.0};
  for (std::size_t i = 0; i < arms.rows(); ++i) {
    check_arm(arms.row(i), state.config().p);
    const double u = state.ucb(arms.row(i));
    if (i == 0 || u > best.ucb) best = {i, u};
  }
  return best;
}

// ---------------------------------------------------------------------------

CachedArmScorer::CachedArmScorer(Matrix arms, const LowOfulState& state)
    : arms_(std::move(arms)) {
  if (arms_.rows() == 0) throw InvalidInput("CachedArmScorer: empty arm list");
  for (std::size_t i = 0; i < arms_.rows(); ++i) check_arm(arms_.row(i), state.config().p);
  recompute(state);
}

void CachedArmScorer::recompute(const LowOfulState& state) {
  inv_norm_sq_.resize(arms_.rows());
  for (std::size_t i = 0; i < arms_.rows(); ++i) {
    inv_norm_sq_[i] = state.inverse_norm_sq(arms_.row(i));
  }
  epoch_ = state.refresh_epoch();
}

void CachedArmScorer::observe(const LowOfulState& state, const UpdateInfo& info) {
  if (state.refresh_epoch() != epoch_) {
    recompute(state);
    return;
  }
  for (std::size_t i = 0; i < arms_.rows(); ++i) {
    const double proj = dot(arms_.row(i), info.solved);
    inv_norm_sq_[i] = std::max(0.0, inv_norm_sq_[i] - proj * proj / info.denominator);
  }
}

ArmChoice CachedArmScorer::select(const LowOfulState& state) const {
  const double width = state.sqrt_beta();
  const Vector& theta = state.theta_hat();
  ArmChoice best{0, 0.0};
  for (std::size_t i = 0; i < arms_.rows(); ++i) {
    const double u = dot(theta, arms_.row(i)) + width * std::sqrt(inv_norm_sq_[i]);
    if (i == 0 || u > best.ucb) best = {i, u};
  }
  return best;
}

}  // namespace bilinear
