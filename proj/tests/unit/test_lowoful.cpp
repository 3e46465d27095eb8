#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "bilinear/error.hpp"
#include "bilinear/lowoful.hpp"
#include "helpers.hpp"

using namespace bilinear;

namespace {

LowOfulConfig cfg(std::size_t p, std::size_t k, double lambda, double lambda_perp) {
  LowOfulConfig c;
  c.p = p;
  c.k = k;
  c.lambda = lambda;
  c.lambda_perp = lambda_perp;
  c.B = 1.0;
  c.B_perp = 0.1;
  c.sigma = 0.1;
  return c;
}

// Batch ridge solution and log-determinant from explicit sums.
struct Batch {
  Vector theta;
  double logdet;
};

Batch batch(const Vector& penalty, const std::vector<Vector>& as, const std::vector<double>& ys) {
  const std::size_t p = penalty.size();
  Matrix v = Matrix::diagonal(penalty);
  Vector b(p, 0.0);
  for (std::size_t t = 0; t < as.size(); ++t) {
    v = v + outer(as[t], as[t]);
    for (std::size_t i = 0; i < p; ++i) b[i] += as[t][i] * ys[t];
  }
  return {solve_spd(v, b), Cholesky(v).log_det()};
}

}  // namespace

TEST(LowOfulConfig, Validation) {
  EXPECT_NO_THROW(cfg(4, 2, 1, 9).validate());
  EXPECT_THROW(cfg(4, 0, 1, 9).validate(), InvalidInput);
  EXPECT_THROW(cfg(4, 5, 1, 9).validate(), InvalidInput);
  EXPECT_THROW(cfg(4, 2, 0, 9).validate(), InvalidInput);
  EXPECT_THROW(cfg(4, 2, 1, -1).validate(), InvalidInput);
  LowOfulConfig bad = cfg(4, 2, 1, 9);
  bad.delta = 1.0;
  EXPECT_THROW(bad.validate(), InvalidInput);
}

TEST(LowOfulState, InitialPenaltyAndLogdet) {
  const LowOfulState s(cfg(4, 2, 1, 9));
  EXPECT_EQ(s.penalty(), (Vector{1, 1, 9, 9}));
  EXPECT_EQ(s.gram(), Matrix::diagonal(Vector{1, 1, 9, 9}));
  EXPECT_NEAR(s.logdet_penalty(), 2 * std::log(9.0), 1e-14);
  EXPECT_NEAR(s.logdet_gram(), s.logdet_penalty(), 1e-12);
  for (double v : s.theta_hat()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(s.rounds(), 0u);
}

TEST(LowOfulState, InitialBeta) {
  const LowOfulConfig c = cfg(4, 2, 1, 9);
  const LowOfulState s(c);
  const double expected = c.sigma * std::sqrt(-2 * std::log(c.delta)) + 1.0 * c.B + 3.0 * c.B_perp;
  EXPECT_NEAR(s.sqrt_beta(), expected, 1e-12);
}

TEST(LowOfulState, NoiselessBetaIsConstant) {
  LowOfulConfig c = cfg(3, 3, 2, 2);
  c.sigma = 0.0;
  LowOfulState s(c);
  const double b0 = s.sqrt_beta();
  EXPECT_NEAR(b0, std::sqrt(2.0) * c.B + std::sqrt(2.0) * c.B_perp, 1e-14);
  Rng rng(1);
  for (int t = 0; t < 20; ++t) s.update(testing_helpers::random_unit(3, rng), rng.normal());
  EXPECT_NEAR(s.sqrt_beta(), b0, 1e-14);
}

TEST(LowOfulState, ScalarUpdate) {
  LowOfulState s(cfg(1, 1, 1, 1));
  s.update(Vector{1.0}, 2.0);
  EXPECT_NEAR(s.theta_hat()[0], 1.0, 1e-15);
  EXPECT_NEAR(s.gram()(0, 0), 2.0, 1e-15);
  EXPECT_NEAR(s.logdet_gram(), std::log(2.0), 1e-15);

  LowOfulState z(cfg(2, 1, 1, 4));
  z.update(Vector{0.6, 0.8}, 0.0);
  EXPECT_EQ(z.theta_hat(), (Vector{0.0, 0.0}));
}

TEST(LowOfulState, IncrementalMatchesBatch) {
  Rng rng(2);
  for (auto [p, k, n] : {std::tuple{4u, 2u, 100}, {6u, 3u, 50}, {8u, 8u, 200}}) {
    LowOfulState s(cfg(p, k, 1.0, 5.0));
    std::vector<Vector> as;
    std::vector<double> ys;
    for (int t = 0; t < n; ++t) {
      as.push_back(testing_helpers::random_unit(p, rng));
      ys.push_back(rng.normal());
      s.update(as.back(), ys.back());
    }
    const Batch b = batch(s.penalty(), as, ys);
    for (std::size_t i = 0; i < p; ++i) EXPECT_NEAR(s.theta_hat()[i], b.theta[i], 1e-9);
    EXPECT_NEAR(s.logdet_gram(), b.logdet, 1e-9);
    EXPECT_EQ(s.rounds(), static_cast<std::size_t>(n));
  }
}

TEST(LowOfulState, UpdateInfoMatchesPreviousInverse) {
  Rng rng(3);
  LowOfulState s(cfg(5, 2, 1, 3));
  for (int t = 0; t < 10; ++t) s.update(testing_helpers::random_unit(5, rng), rng.normal());
  const Vector a = testing_helpers::random_unit(5, rng);
  const Vector expected = solve_spd(s.gram(), a);
  const double q = s.inverse_norm_sq(a);
  const UpdateInfo info = s.update(a, 0.3);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(info.solved[i], expected[i], 1e-12);
  EXPECT_NEAR(info.denominator, 1.0 + q, 1e-12);
}

TEST(LowOfulState, RejectsBadInput) {
  LowOfulState s(cfg(3, 1, 1, 1));
  EXPECT_THROW(s.update(Vector{1, 0}, 1.0), InvalidInput);
  EXPECT_THROW(s.update(Vector{1, 0, std::nan("")}, 1.0), InvalidInput);
}

TEST(LambdaPerpDefault, Examples) {
  const double T = std::numbers::e - 1.0;
  EXPECT_NEAR(lambda_perp_default(T, 1, 1.0), T, 1e-14);
  EXPECT_NEAR(lambda_perp_default(1000, 4, 1.0), lambda_perp_default(1000, 2, 1.0) / 2, 1e-12);
  EXPECT_NEAR(lambda_perp_default(1000, 3, 2.0), 1000 / (3 * std::log1p(500.0)), 1e-12);
  EXPECT_NEAR(logdet_budget(1000, 3, 2.0), 6 * std::log1p(500.0), 1e-12);
}

TEST(Contains, CenterAndBoundary) {
  LowOfulState s(cfg(3, 2, 1, 4));
  Rng rng(4);
  for (int t = 0; t < 15; ++t) s.update(testing_helpers::random_unit(3, rng), rng.normal());
  const ConfidenceEllipsoid e = s.ellipsoid();
  EXPECT_TRUE(contains(e, e.center));

  ConfidenceEllipsoid zero = e;
  zero.radius_sq = 0.0;
  EXPECT_TRUE(contains(zero, e.center));
  Vector off = e.center;
  off[0] += 1e-3;
  EXPECT_FALSE(contains(zero, off));

  // Along direction u, the boundary lies at center + u * sqrt(radius / u^T V u).
  const Vector u = testing_helpers::random_unit(3, rng);
  const double reach = std::sqrt(e.radius_sq / bilinear_form(u, e.V, u));
  for (auto [f, inside] : {std::pair{0.999, true}, {1.001, false}}) {
    Vector pt = e.center;
    for (std::size_t i = 0; i < 3; ++i) pt[i] += f * reach * u[i];
    EXPECT_EQ(contains(e, pt), inside) << f;
  }
}

TEST(SelectArm, GeometryAndSingleArm) {
  LowOfulState s(cfg(2, 2, 1, 1));
  // Equal widths at t=0; a positive reward on e1 tips the choice to e1.
  s.update(Vector{1, 0}, 1.0);
  s.update(Vector{0, 1}, -1.0);
  const Matrix arms{{0, 1}, {1, 0}};
  EXPECT_EQ(select_arm(s, arms).index, 1u);
  const Matrix one{{0.6, 0.8}};
  const ArmChoice c = select_arm(s, one);
  EXPECT_EQ(c.index, 0u);
  EXPECT_NEAR(c.ucb, s.ucb(one.row(0)), 1e-15);
}

TEST(SelectArm, ExhaustiveUcbCheck) {
  Rng rng(5);
  LowOfulState s(cfg(6, 3, 1, 7));
  for (int t = 0; t < 30; ++t) s.update(testing_helpers::random_unit(6, rng), rng.normal());
  Matrix arms(40, 6);
  for (std::size_t i = 0; i < 40; ++i) {
    const Vector a = testing_helpers::random_unit(6, rng);
    for (std::size_t j = 0; j < 6; ++j) arms(i, j) = a[j];
  }
  const ArmChoice c = select_arm(s, arms);
  const Vector inv = [&] {
    Vector out;
    for (std::size_t i = 0; i < 40; ++i) {
      const Vector a(arms.row(i).begin(), arms.row(i).end());
      const Vector w = solve_spd(s.gram(), a);
      out.push_back(dot(s.theta_hat(), a) + s.sqrt_beta() * std::sqrt(dot(a, w)));
    }
    return out;
  }();
  for (std::size_t i = 0; i < 40; ++i) EXPECT_GE(c.ucb + 1e-12, inv[i]);
  EXPECT_NEAR(c.ucb, inv[c.index], 1e-10);
}

TEST(SelectArm, Errors) {
  const LowOfulState s(cfg(2, 1, 1, 1));
  EXPECT_THROW(select_arm(s, Matrix(0, 2)), InvalidInput);
  EXPECT_THROW(select_arm(s, Matrix{{1.5, 0}}), InvalidInput);
}

TEST(CachedArmScorer, MatchesDirectSelection) {
  Rng rng(6);
  LowOfulState s(cfg(8, 4, 1, 20));
  Matrix arms(32, 8);
  for (std::size_t i = 0; i < 32; ++i) {
    const Vector a = testing_helpers::random_unit(8, rng);
    for (std::size_t j = 0; j < 8; ++j) arms(i, j) = a[j];
  }
  CachedArmScorer scorer(arms, s);
  // Crosses several factor refreshes.
  for (int t = 0; t < 3 * static_cast<int>(LowOfulState::kRefreshInterval); ++t) {
    const ArmChoice direct = select_arm(s, arms);
    const ArmChoice cached = scorer.select(s);
    ASSERT_EQ(direct.index, cached.index) << t;
    ASSERT_NEAR(direct.ucb, cached.ucb, 1e-9);
    const Vector a(arms.row(cached.index).begin(), arms.row(cached.index).end());
    scorer.observe(s, s.update(a, 0.1 * rng.normal() + a[0]));
  }
}

TEST(LowOfulProperties, BetaMonotoneAndLogdetWithinBudget) {
  Rng rng(7);
  const std::size_t p = 16, k = 4;
  const double T = 500;
  for (int trial = 0; trial < 5; ++trial) {
    LowOfulConfig c = cfg(p, k, 1.0, lambda_perp_default(T, k, 1.0));
    LowOfulState s(c);
    double prev = s.sqrt_beta();
    for (int t = 0; t < T; ++t) {
      s.update(testing_helpers::random_unit(p, rng), rng.normal());
      ASSERT_GE(s.sqrt_beta(), prev - 1e-12);
      prev = s.sqrt_beta();
      ASSERT_LE(s.logdet_gram() - s.logdet_penalty(), logdet_budget(T, k, 1.0) + 1e-9);
    }
  }
}
