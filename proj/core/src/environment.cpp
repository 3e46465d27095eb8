#include "bilinear/environment.hpp"

#include <algorithm>
#include <cmath>

#include "bilinear/error.hpp"

namespace bilinear {

namespace {

constexpr double kNormSlack = 1e-12;

Vector random_unit_vector(std::size_t d, Rng& rng) {
  Vector v(d);
  double n = 0.0;
  while (n < 1e-12) {
    for (double& x : v) x = rng.normal();
    n = norm2(v);
  }
  for (double& x : v) x /= n;
  return v;
}

// d x r matrix with orthonormal columns from QR of a Gaussian matrix.
Matrix random_orthonormal(std::size_t d, std::size_t r, Rng& rng) {
  Matrix g(d, r);
  for (double& x : g.data()) x = rng.normal();
  return householder_qr(g).Q.cols_range(0, r);
}

}  // namespace

ArmSet::ArmSet(Matrix arms) : arms_(std::move(arms)) {
  if (arms_.rows() == 0 || arms_.cols() == 0) throw InvalidInput("ArmSet: no arms");
  if (!arms_.all_finite()) throw InvalidInput("ArmSet: non-finite arm");
  for (std::size_t i = 0; i < arms_.rows(); ++i) {
    if (norm2(arms_.row(i)) > 1.0 + kNormSlack) {
      throw InvalidInput("ArmSet: arm " + std::to_string(i) + " lies outside the unit ball");
    }
  }
  if (thin_svd(arms_).rank() < arms_.cols()) {
    throw InvalidInput("ArmSet: arms do not span R^" + std::to_string(arms_.cols()));
  }
}

Matrix ArmSet::stacked(std::span<const std::size_t> indices) const {
  Matrix m(indices.size(), dim());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= size()) throw InvalidInput("ArmSet::stacked: index out of range");
    std::copy(arms_.row(indices[k]).begin(), arms_.row(indices[k]).end(), m.row(k).begin());
  }
  return m;
}

std::string_view to_string(NoiseKind k) noexcept {
  return k == NoiseKind::Gaussian ? "gaussian" : "rademacher";
}

NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "gaussian") return NoiseKind::Gaussian;
  if (name == "rademacher") return NoiseKind::Rademacher;
  throw InvalidInput("unknown noise kind '" + std::string(name) + "'");
}

BilinearEnvironment::BilinearEnvironment(Matrix theta, double sigma, NoiseKind noise,
                                         std::optional<NormBounds> bounds)
    : theta_(std::move(theta)), sigma_(sigma), noise_(noise) {
  if (!(sigma_ >= 0.0) || !std::isfinite(sigma_)) {
    throw InvalidInput("BilinearEnvironment: sigma must be finite and >= 0");
  }
  svd_ = thin_svd(theta_);
  rank_ = svd_.rank();
  if (bounds) {
    const double tol = 1e-9;
    if (frobenius_norm(theta_) > bounds->frobenius * (1.0 + tol)) {
      throw InvalidInput("BilinearEnvironment: ||Theta||_F exceeds S_F");
    }
    if (svd_.S.front() > bounds->spectral * (1.0 + tol)) {
      throw InvalidInput("BilinearEnvironment: ||Theta||_2 exceeds S_2");
    }
  }
}

double BilinearEnvironment::mean_reward(std::span<const double> x,
                                        std::span<const double> z) const {
  return bilinear_form(x, theta_, z);
}

double BilinearEnvironment::singular_value(std::size_t i) const noexcept {
  if (i == 0 || i > rank_) return 0.0;
  return svd_.S[i - 1];
}

double sample_reward(const BilinearEnvironment& env, std::span<const double> x,
                     std::span<const double> z, Rng& rng) {
  const double mean = env.mean_reward(x, z);
  if (env.sigma() == 0.0) return mean;
  const double eta =
      env.noise() == NoiseKind::Gaussian ? rng.normal() : rng.rademacher();
  return mean + env.sigma() * eta;
}

BestPair best_pair(const BilinearEnvironment& env, const ArmSet& X, const ArmSet& Z) {
  if (X.size() == 0 || Z.size() == 0) throw InvalidInput("best_pair: empty arm set");
  if (X.dim() != env.d1() || Z.dim() != env.d2()) {
    throw InvalidDimension("best_pair: arm dimension differs from Theta");
  }
  // Rows of (X Theta) dotted with Z rows.
  const Matrix xt = X.matrix() * env.theta();
  BestPair best{0, 0, dot(xt.row(0), Z[0])};
  for (std::size_t i = 0; i < X.size(); ++i)
    for (std::size_t j = 0; j < Z.size(); ++j) {
      const double v = dot(xt.row(i), Z[j]);
      if (v > best.value) best = {i, j, v};
    }
  return best;
}

double instantaneous_regret(const BilinearEnvironment& env, double best_value,
                            std::span<const double> x, std::span<const double> z) {
  const double gap = best_value - env.mean_reward(x, z);
  if (gap < -1e-9) {
    throw InternalConsistency("instantaneous_regret: chosen pair beats best_value");
  }
  return gap < 0.0 ? 0.0 : gap;
}

ArmSet generate_sphere_arms(std::size_t n, std::size_t d, Rng& rng) {
  if (d == 0 || n < d) {
    throw InvalidInput("generate_sphere_arms: need n >= d >= 1");
  }
  for (;;) {
    Matrix arms(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      const Vector v = random_unit_vector(d, rng);
      std::copy(v.begin(), v.end(), arms.row(i).begin());
    }
    if (thin_svd(arms).rank() == d) return ArmSet(std::move(arms));
  }
}

Matrix make_low_rank_theta(std::size_t d1, std::size_t d2, std::size_t r,
                           double frobenius_target, Rng& rng) {
  if (r == 0 || r > std::min(d1, d2)) {
    throw InvalidRank("make_low_rank_theta: rank outside [1, min(d1, d2)]");
  }
  if (!(frobenius_target > 0.0)) {
    throw InvalidInput("make_low_rank_theta: Frobenius target must be positive");
  }
  const Matrix u = random_orthonormal(d1, r, rng);
  const Matrix v = random_orthonormal(d2, r, rng);
  Vector s(r);
  for (double& x : s) x = 0.5 + 0.5 * rng.uniform();
  std::sort(s.begin(), s.end(), std::greater<>());
  const double scale = frobenius_target / norm2(s);
  Matrix us = u;
  for (std::size_t i = 0; i < d1; ++i)
    for (std::size_t k = 0; k < r; ++k) us(i, k) *= s[k] * scale;
  return us * v.transposed();
}

void RegretTrace::push(double regret) {
  instantaneous_.push_back(regret);
  cumulative_.push_back(total() + regret);
}

}  // namespace bilinear
