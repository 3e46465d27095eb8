#include "bilinear/estr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include <spdlog/spdlog.h>

#include "bilinear/error.hpp"

namespace bilinear {

namespace {

constexpr double kSolveTolerance = 1e-10;
constexpr double kAuditSlack = 1e-9;

double checked_min_singular(const Matrix& m, const char* what) {
  const SvdFactors f = thin_svd(m);
  if (f.rank() < m.cols() || !(f.S.back() > kSolveTolerance)) {
    throw SingularMatrix(std::string("estimate_theta: ") + what + " is numerically singular");
  }
  return f.S.back();
}

// A^{-1} B for square A, argmin ||A Y - B|| for tall A.
Matrix left_solve(const Matrix& a, const Matrix& b) {
  return a.rows() == a.cols() ? solve_square(a, b) : least_squares(a, b);
}

Matrix perp_or_empty(const Matrix& basis) {
  return basis.cols() < basis.rows() ? complement_basis(basis) : Matrix(basis.rows(), 0);
}

// Writes the four blocks of (a b^T)-shaped products in the canonical order.
template <typename Cell>
void for_each_block_cell(std::size_t d1, std::size_t d2, std::size_t r, Cell&& cell) {
  std::size_t pos = 0;
  const std::size_t row_lo[4] = {0, r, 0, r};
  const std::size_t row_hi[4] = {r, d1, r, d1};
  const std::size_t col_lo[4] = {0, 0, r, r};
  const std::size_t col_hi[4] = {r, r, d2, d2};
  for (int blk = 0; blk < 4; ++blk) {
    for (std::size_t b = col_lo[blk]; b < col_hi[blk]; ++b) {
      for (std::size_t a = row_lo[blk]; a < row_hi[blk]; ++a) cell(pos++, a, b);
    }
  }
}

struct Observation {
  std::size_t pair;
  double y;
};

// Pulls arms, samples rewards and accounts regret for one run.
class Episode {
 public:
  Episode(const BilinearEnvironment& env, const ArmSet& X, const ArmSet& Z, const Rng& rng,
          std::string method)
      : env_(env), X_(X), Z_(Z), noise_(rng.derive("noise")), trace_(std::move(method)) {
    if (X.dim() != env.d1() || Z.dim() != env.d2()) {
      throw InvalidDimension("run: arm dimensions do not match theta");
    }
    best_ = best_pair(env, X, Z).value;
  }

  double pull(std::size_t i, std::size_t j) {
    trace_.push(instantaneous_regret(env_, best_, X_[i], Z_[j]));
    return sample_reward(env_, X_[i], Z_[j], noise_);
  }

  std::size_t n_right() const noexcept { return Z_.size(); }
  RegretTrace& trace() noexcept { return trace_; }

 private:
  const BilinearEnvironment& env_;
  const ArmSet& X_;
  const ArmSet& Z_;
  Rng noise_;
  RegretTrace trace_;
  double best_ = 0.0;
};

void audit_round(const LowOfulState& state, double& prev_beta, RunAudit& audit) {
  const double beta = state.beta();
  if (beta < prev_beta * (1.0 - 1e-12) - 1e-12) audit.beta_monotone = false;
  prev_beta = beta;
  const double gap = state.logdet_gram() - state.logdet_penalty();
  audit.max_logdet_gap = std::max(audit.max_logdet_gap, gap);
  if (gap > audit.logdet_budget + kAuditSlack) audit.logdet_within_budget = false;
}

// Runs `rounds` UCB rounds on a fixed arm matrix; arm row index i * |Z| + j.
void play_lowoful(Episode& ep, LowOfulState& state, CachedArmScorer& scorer,
                  std::size_t rounds, RunAudit& audit, std::vector<Observation>* history) {
  double prev_beta = state.beta();
  const std::size_t n2 = ep.n_right();
  for (std::size_t t = 0; t < rounds; ++t) {
    const std::size_t idx = scorer.select(state).index;
    const double y = ep.pull(idx / n2, idx % n2);
    const UpdateInfo info = state.update(scorer.arms().row(idx), y);
    scorer.observe(state, info);
    audit_round(state, prev_beta, audit);
    if (history) history->push_back({idx, y});
  }
}

LowOfulConfig uniform_config(const EstrConfig& config, std::size_t p, double sigma) {
  LowOfulConfig lc;
  lc.p = p;
  lc.k = p;
  lc.lambda = config.lambda;
  lc.lambda_perp = config.lambda;
  lc.B = config.S_F;
  lc.B_perp = config.S_F;
  lc.sigma = sigma;
  lc.delta = config.delta;
  lc.c = config.c;
  return lc;
}

LowOfulConfig low_rank_config(const EstrConfig& config, std::size_t d1, std::size_t d2,
                              double horizon, double B_perp, double sigma) {
  const std::size_t r = config.r;
  LowOfulConfig lc;
  lc.p = d1 * d2;
  lc.k = low_dimension(d1, d2, r);
  lc.lambda = config.lambda;
  lc.lambda_perp = lc.k < lc.p ? lambda_perp_default(horizon, lc.k, config.lambda)
                               : config.lambda;
  lc.B = config.S_F;
  lc.B_perp = B_perp;
  lc.sigma = sigma;
  lc.delta = config.delta;
  lc.c = config.c;
  if (config.lambda_cross > 0.0 && r * r < lc.k) {
    lc.lambda_cross = config.lambda_cross;
    lc.cross_begin = r * r;
    lc.B_cross = config.S_F;
  }
  return lc;
}

}  // namespace

std::string_view to_string(GammaMode m) noexcept {
  return m == GammaMode::Full ? "full" : "simplified";
}

GammaMode parse_gamma_mode(std::string_view name) {
  if (name == "full") return GammaMode::Full;
  if (name == "simplified") return GammaMode::Simplified;
  throw InvalidInput("unknown gamma mode '" + std::string(name) + "'");
}

void EstrConfig::validate(bool uses_T1) const {
  if (T < 1) throw InvalidInput("EstrConfig: T must be >= 1");
  if (uses_T1 && !(T1 >= 1 && T1 < T)) throw InvalidInput("EstrConfig: need 1 <= T1 < T");
  if (r < 1) throw InvalidRank("EstrConfig: r must be >= 1");
  if (!(S_r > 0.0 && S_r <= S_2 && S_2 <= S_F)) {
    throw InvalidInput("EstrConfig: need 0 < S_r <= S_2 <= S_F");
  }
  if (!(lambda > 0.0)) throw InvalidInput("EstrConfig: lambda must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidInput("EstrConfig: delta must lie in (0, 1)");
  if (!(c >= 0.0) || !(C1 > 0.0) || !(lambda_cross >= 0.0)) {
    throw InvalidInput("EstrConfig: c, C1 and lambda_cross must be nonnegative");
  }
}

std::size_t default_exploration_length(std::size_t T, std::size_t d, std::size_t r) {
  if (T < 2) throw InvalidInput("default_exploration_length: need T >= 2");
  const double v = std::ceil(std::sqrt(static_cast<double>(T)) *
                             std::pow(static_cast<double>(d), 1.5) *
                             std::sqrt(static_cast<double>(r)));
  return std::clamp<std::size_t>(static_cast<std::size_t>(v), 1, T - 1);
}

SubspaceEstimate estimate_subspaces(const Matrix& theta_hat, std::size_t r) {
  const std::size_t d1 = theta_hat.rows();
  const std::size_t d2 = theta_hat.cols();
  if (r < 1 || r > std::min(d1, d2)) throw InvalidRank("estimate_subspaces: r out of range");
  const SvdFactors f = thin_svd(theta_hat);
  SubspaceEstimate est;
  est.U_hat = f.U.cols_range(0, r);
  est.V_hat = f.V.cols_range(0, r);
  est.U_hat_perp = perp_or_empty(est.U_hat);
  est.V_hat_perp = perp_or_empty(est.V_hat);
  return est;
}

std::vector<std::pair<std::size_t, std::size_t>> stage1_schedule(std::size_t T1,
                                                                std::size_t d1,
                                                                std::size_t d2, Rng& rng) {
  if (T1 < 1) throw InvalidInput("stage1_schedule: T1 must be >= 1");
  if (d1 < 1 || d2 < 1) throw InvalidDimension("stage1_schedule: empty grid");
  const std::size_t cells = d1 * d2;
  const std::size_t reps = T1 / cells;
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(T1);
  for (std::size_t q = 0; q < reps; ++q)
    for (std::size_t c = 0; c < cells; ++c) out.emplace_back(c / d2, c % d2);
  for (std::size_t c : random_subset(cells, T1 - reps * cells, rng)) {
    out.emplace_back(c / d2, c % d2);
  }
  rng.shuffle(std::span(out));
  return out;
}

Matrix estimate_theta(const Matrix& K_hat, const Matrix& X, const Matrix& Z) {
  if (K_hat.rows() != X.rows() || K_hat.cols() != Z.rows()) {
    throw InvalidDimension("estimate_theta: K_hat must be |X| x |Z|");
  }
  if (X.rows() < X.cols() || Z.rows() < Z.cols()) {
    throw InvalidDimension("estimate_theta: need at least as many arms as dimensions");
  }
  checked_min_singular(X, "X");
  checked_min_singular(Z, "Z");
  const Matrix Y = left_solve(X, K_hat);               // d1 x n2, X Y = K
  return left_solve(Z, Y.transposed()).transposed();   // Z Theta^T = Y^T
}

TailBounds gamma_bound(const EstrConfig& config, const Matrix& X, const Matrix& Z,
                       double sigma, std::size_t d, std::size_t r, std::size_t T1) {
  if (T1 < 1) throw InvalidInput("gamma_bound: T1 must be >= 1");
  const double base = sigma * sigma * std::pow(static_cast<double>(d), 3) *
                      static_cast<double>(r) / static_cast<double>(T1);
  TailBounds out;
  out.B = config.S_F;
  if (config.gamma_mode == GammaMode::Simplified) {
    out.B_perp = config.S_2 * base;
    out.gamma = base;
  } else {
    const double xinv = 1.0 / min_nonzero_singular(X);
    const double zinv = 1.0 / min_nonzero_singular(Z);
    const double ratio = config.S_2 / config.S_r;
    out.gamma = xinv * xinv * zinv * zinv / (config.S_r * config.S_r) * config.C1 * config.C1 *
                std::pow(ratio, 4) * base;
    out.B_perp = config.S_2 * out.gamma;
  }
  return out;
}

std::size_t low_dimension(std::size_t d1, std::size_t d2, std::size_t r) {
  if (r > std::min(d1, d2)) throw InvalidRank("low_dimension: r exceeds dimensions");
  return (d1 + d2) * r - r * r;
}

Matrix rotate_and_vectorize(const ArmSet& X, const ArmSet& Z, const SubspaceEstimate& est) {
  const std::size_t d1 = X.dim();
  const std::size_t d2 = Z.dim();
  const std::size_t r = est.U_hat.cols();
  if (est.U_hat.rows() != d1 || est.V_hat.rows() != d2 || est.V_hat.cols() != r ||
      est.U_hat_perp.rows() != d1 || est.U_hat_perp.cols() != d1 - r ||
      est.V_hat_perp.rows() != d2 || est.V_hat_perp.cols() != d2 - r) {
    throw InvalidDimension("rotate_and_vectorize: subspace shapes do not match arms");
  }
  const Matrix xr = X.matrix() * hstack(est.U_hat, est.U_hat_perp);  // rows are x'^T
  const Matrix zr = Z.matrix() * hstack(est.V_hat, est.V_hat_perp);
  Matrix out(X.size() * Z.size(), d1 * d2);
  for (std::size_t i = 0; i < X.size(); ++i) {
    const auto x = xr.row(i);
    for (std::size_t j = 0; j < Z.size(); ++j) {
      const auto z = zr.row(j);
      auto dst = out.row(i * Z.size() + j);
      for_each_block_cell(d1, d2, r,
                          [&](std::size_t pos, std::size_t a, std::size_t b) { dst[pos] = x[a] * z[b]; });
    }
  }
  return out;
}

Matrix rotated_theta(const Matrix& theta, const SubspaceEstimate& est) {
  const Matrix U = hstack(est.U_hat, est.U_hat_perp);
  const Matrix V = hstack(est.V_hat, est.V_hat_perp);
  if (U.rows() != theta.rows() || V.rows() != theta.cols()) {
    throw InvalidDimension("rotated_theta: subspace shapes do not match theta");
  }
  return transpose_times(U, theta * V);
}

Vector rearrange_theta(const Matrix& M, std::size_t r) {
  if (r > std::min(M.rows(), M.cols())) throw InvalidRank("rearrange_theta: r out of range");
  Vector out(M.size());
  for_each_block_cell(M.rows(), M.cols(), r,
                      [&](std::size_t pos, std::size_t a, std::size_t b) { out[pos] = M(a, b); });
  return out;
}

Matrix vectorize_pairs(const ArmSet& X, const ArmSet& Z) {
  const std::size_t d1 = X.dim();
  const std::size_t d2 = Z.dim();
  Matrix out(X.size() * Z.size(), d1 * d2);
  for (std::size_t i = 0; i < X.size(); ++i) {
    for (std::size_t j = 0; j < Z.size(); ++j) {
      auto dst = out.row(i * Z.size() + j);
      for (std::size_t b = 0; b < d2; ++b)
        for (std::size_t a = 0; a < d1; ++a) dst[a + b * d1] = X[i][a] * Z[j][b];
    }
  }
  return out;
}

std::vector<std::size_t> isse_knots(std::size_t T) {
  std::vector<std::size_t> out;
  for (int m = 1;; ++m) {
    const auto t = static_cast<std::size_t>(std::llround(std::pow(10.0, m / 2.0)));
    if (t > T) break;
    if (out.empty() || out.back() != t) out.push_back(t);
  }
  return out;
}

// ---------------------------------------------------------------------------

RunResult run_estr_detailed(const BilinearEnvironment& env, const ArmSet& X, const ArmSet& Z,
                            const EstrConfig& config, Rng& rng) {
  config.validate(true);
  const std::size_t d1 = env.d1();
  const std::size_t d2 = env.d2();
  const std::size_t r = config.r;
  if (r > std::min(d1, d2)) throw InvalidRank("run_estr: r exceeds dimensions");
  if (config.T1 < d1 * d2) {
    spdlog::warn("ESTR: T1 = {} < d1 d2 = {}; some stage-1 cells stay unobserved", config.T1,
                 d1 * d2);
  }

  Episode ep(env, X, Z, rng, "estr");
  ep.trace().reserve(config.T);
  Stage1Audit s1;

  Rng sel_rng = rng.derive("selection");
  s1.left = select_subset(X, sel_rng, config.selection);
  s1.right = select_subset(Z, sel_rng, config.selection);

  Rng sched_rng = rng.derive("schedule");
  ObservationTable table(d1, d2);
  for (const auto& [i, j] : stage1_schedule(config.T1, d1, d2, sched_rng)) {
    table.record(i, j, ep.pull(s1.left.indices[i], s1.right.indices[j]));
  }
  s1.regret = ep.trace().total();
  s1.regret_bound = 2.0 * config.S_2 * static_cast<double>(config.T1);

  const AveragedObservations avg = averaged(table);
  s1.completion = complete(avg.K_tilde, avg.mask, r, config.completion_method, config.completion);
  const Matrix Xs = X.stacked(s1.left.indices);
  const Matrix Zs = Z.stacked(s1.right.indices);
  s1.theta_hat = estimate_theta(s1.completion.K_hat, Xs, Zs);
  s1.estimate = estimate_subspaces(s1.theta_hat, r);
  s1.bounds = gamma_bound(config, Xs, Zs, env.sigma(), std::max(d1, d2), r, config.T1);
  s1.estimate.gamma = s1.bounds.gamma;

  // Ground-truth diagnostics.
  const Matrix U_star = env.svd().U.cols_range(0, r);
  const Matrix V_star = env.svd().V.cols_range(0, r);
  const double u_angle = frobenius_norm(transpose_times(s1.estimate.U_hat_perp, U_star));
  const double v_angle = frobenius_norm(transpose_times(s1.estimate.V_hat_perp, V_star));
  const double s1_star = env.singular_value(1);
  const double sr_star = env.singular_value(r);
  s1.sin_theta = u_angle * v_angle;
  s1.tail_bound = u_angle * u_angle * s1_star * s1_star * v_angle * v_angle;
  const double err = frobenius_norm(s1.theta_hat - env.theta());
  s1.wedin_bound = sr_star > 0.0 ? err * err / (sr_star * sr_star)
                                 : std::numeric_limits<double>::infinity();
  const Vector theta_rot = rearrange_theta(rotated_theta(env.theta(), s1.estimate), r);
  const std::size_t k = low_dimension(d1, d2, r);
  for (std::size_t i = k; i < theta_rot.size(); ++i) s1.tail_norm_sq += theta_rot[i] * theta_rot[i];

  Matrix arms = rotate_and_vectorize(X, Z, s1.estimate);
  for (std::size_t i = 0; i < X.size(); ++i) {
    for (std::size_t j = 0; j < Z.size(); ++j) {
      const double direct = env.mean_reward(X[i], Z[j]);
      s1.rotation_error = std::max(
          s1.rotation_error, std::abs(dot(arms.row(i * Z.size() + j), theta_rot) - direct));
    }
  }

  const std::size_t T2 = config.T - config.T1;
  const LowOfulConfig lc = low_rank_config(config, d1, d2, static_cast<double>(T2),
                                           s1.bounds.B_perp, env.sigma());
  LowOfulState state(lc);
  CachedArmScorer scorer(std::move(arms), state);
  RunAudit audit;
  audit.logdet_budget = logdet_budget(static_cast<double>(T2), lc.k, config.lambda);
  play_lowoful(ep, state, scorer, T2, audit, nullptr);
  audit.stage1 = std::move(s1);
  return {std::move(ep.trace()), std::move(audit)};
}

RegretTrace run_estr(const BilinearEnvironment& env, const ArmSet& X, const ArmSet& Z,
                     const EstrConfig& config, Rng& rng) {
  return run_estr_detailed(env, X, Z, config, rng).trace;
}

RunResult run_oful_baseline_detailed(const BilinearEnvironment& env, const ArmSet& X,
                                     const ArmSet& Z, const EstrConfig& config, Rng& rng) {
  config.validate(false);
  Episode ep(env, X, Z, rng, "oful");
  ep.trace().reserve(config.T);
  const std::size_t p = env.d1() * env.d2();
  LowOfulState state(uniform_config(config, p, env.sigma()));
  CachedArmScorer scorer(vectorize_pairs(X, Z), state);
  RunAudit audit;
  audit.logdet_budget = logdet_budget(static_cast<double>(config.T), p, config.lambda);
  play_lowoful(ep, state, scorer, config.T, audit, nullptr);
  return {std::move(ep.trace()), std::move(audit)};
}

RegretTrace run_oful_baseline(const BilinearEnvironment& env, const ArmSet& X, const ArmSet& Z,
                              const EstrConfig& config, Rng& rng) {
  return run_oful_baseline_detailed(env, X, Z, config, rng).trace;
}

RunResult run_isse_detailed(const BilinearEnvironment& env, const ArmSet& X, const ArmSet& Z,
                            const EstrConfig& config, Rng& rng) {
  config.validate(false);
  const std::size_t d1 = env.d1();
  const std::size_t d2 = env.d2();
  const std::size_t r = config.r;
  if (r > std::min(d1, d2)) throw InvalidRank("run_isse: r exceeds dimensions");
  const std::size_t p = d1 * d2;
  const double T = static_cast<double>(config.T);

  Episode ep(env, X, Z, rng, "isse");
  ep.trace().reserve(config.T);
  std::vector<Observation> history;
  history.reserve(config.T);

  RunAudit audit;
  auto state = std::make_unique<LowOfulState>(uniform_config(config, p, env.sigma()));
  auto scorer = std::make_unique<CachedArmScorer>(vectorize_pairs(X, Z), *state);
  audit.logdet_budget = logdet_budget(T, p, config.lambda);

  std::size_t played = 0;
  auto advance_to = [&](std::size_t round) {  // play rounds played+1 .. round
    if (round > played) {
      play_lowoful(ep, *state, *scorer, round - played, audit, &history);
      played = round;
    }
  };

  for (std::size_t knot : isse_knots(config.T)) {
    advance_to(knot - 1);
    if (history.empty()) continue;
    ObservationTable table(X.size(), Z.size());
    for (const Observation& o : history) table.record(o.pair / Z.size(), o.pair % Z.size(), o.y);
    SubspaceEstimate est;
    try {
      const AveragedObservations avg = averaged(table);
      const CompletionResult comp =
          complete(avg.K_tilde, avg.mask, r, config.completion_method, config.completion);
      const Matrix theta_hat = estimate_theta(comp.K_hat, X.matrix(), Z.matrix());
      if (!theta_hat.all_finite() || max_abs(theta_hat) == 0.0) {
        throw SingularMatrix("run_isse: degenerate refit");
      }
      est = estimate_subspaces(theta_hat, r);
    } catch (const Error& e) {
      spdlog::info("ISSE: skipping refit at t = {}: {}", knot, e.what());
      ++audit.skipped_refits;
      continue;
    }
    const double B_perp = config.S_2 * env.sigma() * env.sigma() *
                          std::pow(static_cast<double>(std::max(d1, d2)), 3) *
                          static_cast<double>(r) / static_cast<double>(knot);
    const LowOfulConfig lc = low_rank_config(config, d1, d2, T, B_perp, env.sigma());
    Matrix arms = rotate_and_vectorize(X, Z, est);
    state = std::make_unique<LowOfulState>(lc);
    for (const Observation& o : history) state->update(arms.row(o.pair), o.y);
    scorer = std::make_unique<CachedArmScorer>(std::move(arms), *state);
    audit.logdet_budget = logdet_budget(T, lc.k, config.lambda);
    double replay_beta = state->beta();
    audit_round(*state, replay_beta, audit);
    ++audit.refits;
  }
  advance_to(config.T);
  return {std::move(ep.trace()), std::move(audit)};
}

RegretTrace run_isse(const BilinearEnvironment& env, const ArmSet& X, const ArmSet& Z,
                     const EstrConfig& config, Rng& rng) {
  return run_isse_detailed(env, X, Z, config, rng).trace;
}

}  // namespace bilinear
