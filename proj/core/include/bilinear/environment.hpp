#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bilinear/linalg.hpp"
#include "bilinear/rng.hpp"

namespace bilinear {

/// Finite arm set in R^dim. Every arm lies in the unit ball and the arms span
/// R^dim; both are checked at construction.
class ArmSet {
 public:
  /// Rows of `arms` are the arms.
  explicit ArmSet(Matrix arms);

  std::size_t dim() const noexcept { return arms_.cols(); }
  std::size_t size() const noexcept { return arms_.rows(); }
  std::span<const double> operator[](std::size_t i) const noexcept {
    return arms_.row(i);
  }
  const Matrix& matrix() const noexcept { return arms_; }
  /// Rows `indices` stacked into an indices.size() x dim matrix.
  Matrix stacked(std::span<const std::size_t> indices) const;

 private:
  Matrix arms_;
};

enum class NoiseKind { Gaussian, Rademacher };

std::string_view to_string(NoiseKind k) noexcept;
NoiseKind parse_noise_kind(std::string_view name);

struct NormBounds {
  double frobenius = 0.0;  // S_F
  double spectral = 0.0;   // S_2
};

/// Ground truth of a bilinear bandit: mean reward x^T Theta z, additive
/// sigma-scaled noise. Immutable after construction.
class BilinearEnvironment {
 public:
  /// Throws InvalidInput when theta is not finite, sigma < 0, or the optional
  /// norm bounds are violated.
  BilinearEnvironment(Matrix theta, double sigma,
                      NoiseKind noise = NoiseKind::Gaussian,
                      std::optional<NormBounds> bounds = std::nullopt);

  const Matrix& theta() const noexcept { return theta_; }
  double sigma() const noexcept { return sigma_; }
  NoiseKind noise() const noexcept { return noise_; }
  const SvdFactors& svd() const noexcept { return svd_; }
  std::size_t rank() const noexcept { return rank_; }
  std::size_t d1() const noexcept { return theta_.rows(); }
  std::size_t d2() const noexcept { return theta_.cols(); }

  /// x^T Theta z.
  double mean_reward(std::span<const double> x, std::span<const double> z) const;
  /// i-th largest singular value (1-based like s*_i); 0 beyond the rank.
  double singular_value(std::size_t i) const noexcept;

 private:
  Matrix theta_;
  double sigma_;
  NoiseKind noise_;
  SvdFactors svd_;
  std::size_t rank_;
};

/// x^T Theta z plus one noise draw.
double sample_reward(const BilinearEnvironment& env, std::span<const double> x,
                     std::span<const double> z, Rng& rng);

struct BestPair {
  std::size_t x_index = 0;
  std::size_t z_index = 0;
  double value = 0.0;
};

/// Exhaustive argmax over X x Z; ties go to the lexicographically lowest pair.
BestPair best_pair(const BilinearEnvironment& env, const ArmSet& X, const ArmSet& Z);

/// best_value - x^T Theta z, with round-off below 1e-12 clamped to 0. Throws
/// InternalConsistency when the gap is below -1e-9.
double instantaneous_regret(const BilinearEnvironment& env, double best_value,
                            std::span<const double> x, std::span<const double> z);

/// n i.i.d. uniform unit vectors in R^d; redrawn until they span R^d.
ArmSet generate_sphere_arms(std::size_t n, std::size_t d, Rng& rng);

/// sum_{i<=r} s_i u_i v_i^T with random orthonormal u, v and sorted positive
/// s_i drawn from [0.5, 1], rescaled so ||Theta||_F equals frobenius_target.
Matrix make_low_rank_theta(std::size_t d1, std::size_t d2, std::size_t r,
                           double frobenius_target, Rng& rng);

/// Per-round pseudo-regret of one run.
class RegretTrace {
 public:
  RegretTrace() = default;
  explicit RegretTrace(std::string method) : method_(std::move(method)) {}

  void reserve(std::size_t n) {
    instantaneous_.reserve(n);
    cumulative_.reserve(n);
  }
  void push(double regret);

  const std::string& method() const noexcept { return method_; }
  std::size_t size() const noexcept { return instantaneous_.size(); }
  const std::vector<double>& instantaneous() const noexcept { return instantaneous_; }
  const std::vector<double>& cumulative() const noexcept { return cumulative_; }
  double total() const noexcept { return cumulative_.empty() ? 0.0 : cumulative_.back(); }

 private:
  std::string method_;
  std::vector<double> instantaneous_;
  std::vector<double> cumulative_;
};

}  // namespace bilinear
