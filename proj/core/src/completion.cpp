#include "bilinear/completion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bilinear/error.hpp"

namespace bilinear {

namespace {

// Solves the r x r normal equations g x = h. Falls back to a tiny ridge when
// g is singular (fewer than r observations in the line).
void solve_small_spd(Matrix g, std::span<const double> h, std::span<double> x) {
  try {
    const Vector sol = Cholesky(g).solve(h);
    std::copy(sol.begin(), sol.end(), x.begin());
    return;
  } catch (const SingularMatrix&) {
  }
  double trace = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i) trace += g(i, i);
  const double ridge = std::max(1e-10 * trace, 1e-300);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += ridge;
  const Vector sol = Cholesky(g).solve(h);
  std::copy(sol.begin(), sol.end(), x.begin());
}

double observed_residual(const Matrix& k, const Mask& mask, const Matrix& a,
                         const Matrix& b) {
  double f = 0.0;
  for (std::size_t i = 0; i < k.rows(); ++i)
    for (std::size_t j = 0; j < k.cols(); ++j)
      if (mask(i, j)) {
        const double e = k(i, j) - dot(a.row(i), b.row(j));
        f += e * e;
      }
  return f;
}

// Exact least-squares update of every row of `target` with `other` fixed.
// When `transposed` is set, rows of `target` index columns of k.
void als_half_step(const Matrix& k, const Mask& mask, const Matrix& other,
                   Matrix& target, bool transposed) {
  const std::size_t r = target.cols();
  const std::size_t lines = target.rows();
  const std::size_t span_len = other.rows();
  Matrix g(r, r);
  Vector h(r);
  for (std::size_t line = 0; line < lines; ++line) {
    std::fill(g.data().begin(), g.data().end(), 0.0);
    std::fill(h.begin(), h.end(), 0.0);
    std::size_t n_obs = 0;
    for (std::size_t t = 0; t < span_len; ++t) {
      const std::size_t i = transposed ? t : line;
      const std::size_t j = transposed ? line : t;
      if (!mask(i, j)) continue;
      ++n_obs;
      auto o = other.row(t);
      const double y = k(i, j);
      for (std::size_t p = 0; p < r; ++p) {
        h[p] += y * o[p];
        for (std::size_t q = 0; q < r; ++q) g(p, q) += o[p] * o[q];
      }
    }
    if (n_obs == 0) continue;  // unobserved line keeps its spectral value
    solve_small_spd(g, h, target.row(line));
  }
}

double gradient_norm(const Matrix& k, const Mask& mask, const Matrix& a,
                     const Matrix& b) {
  Matrix ga(a.rows(), a.cols());
  Matrix gb(b.rows(), b.cols());
  for (std::size_t i = 0; i < k.rows(); ++i)
    for (std::size_t j = 0; j < k.cols(); ++j) {
      if (!mask(i, j)) continue;
      const double e = dot(a.row(i), b.row(j)) - k(i, j);
      for (std::size_t p = 0; p < a.cols(); ++p) {
        ga(i, p) += 2.0 * e * b(j, p);
        gb(j, p) += 2.0 * e * a(i, p);
      }
    }
  return std::hypot(frobenius_norm(ga), frobenius_norm(gb));
}

}  // namespace

// ---------------------------------------------------------------------------

ObservationTable::ObservationTable(std::size_t d1, std::size_t d2)
    : sum_(d1, d2), count_(d1 * d2, 0) {
  if (d1 == 0 || d2 == 0) throw InvalidDimension("ObservationTable: empty shape");
}

void ObservationTable::record(std::size_t i, std::size_t j, double y) {
  if (i >= d1() || j >= d2()) {
    throw InvalidInput("ObservationTable::record: index (" + std::to_string(i) +
                       ", " + std::to_string(j) + ") out of range");
  }
  sum_(i, j) += y;
  ++count_[i * d2() + j];
  ++total_;
}

std::size_t Mask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

AveragedObservations averaged(const ObservationTable& table) {
  AveragedObservations out{Matrix(table.d1(), table.d2()),
                           Mask(table.d1(), table.d2())};
  for (std::size_t i = 0; i < table.d1(); ++i)
    for (std::size_t j = 0; j < table.d2(); ++j) {
      const auto n = table.count(i, j);
      if (n == 0) continue;
      out.K_tilde(i, j) = table.sum(i, j) / static_cast<double>(n);
      out.mask.set(i, j, true);
    }
  return out;
}

std::string_view to_string(CompletionMethod m) noexcept {
  switch (m) {
    case CompletionMethod::BurerMonteiro:
      return "burer-monteiro";
    case CompletionMethod::OptSpaceStyle:
      return "optspace-style";
  }
  return "?";
}

CompletionMethod parse_completion_method(std::string_view name) {
  if (name == "burer-monteiro" || name == "bm") return CompletionMethod::BurerMonteiro;
  if (name == "optspace-style" || name == "optspace" || name == "os") {
    return CompletionMethod::OptSpaceStyle;
  }
  throw InvalidInput("unknown completion method '" + std::string(name) + "'");
}

CompletionResult complete(const Matrix& K_tilde, const Mask& mask, std::size_t r,
                          CompletionMethod method, const CompletionOptions& opts) {
  const std::size_t d1 = K_tilde.rows();
  const std::size_t d2 = K_tilde.cols();
  if (mask.rows() != d1 || mask.cols() != d2) {
    throw InvalidDimension("complete: mask shape differs from K_tilde");
  }
  if (r == 0 || r > std::min(d1, d2)) {
    throw InvalidRank("complete: rank " + std::to_string(r) +
                      " outside [1, min(d1, d2)]");
  }
  if (!K_tilde.all_finite()) throw InvalidInput("complete: non-finite K_tilde");

  CompletionResult res;
  res.left = Matrix(d1, r);
  res.right = Matrix(d2, r);

  std::vector<std::size_t> row_deg(d1, 0), col_deg(d2, 0);
  for (std::size_t i = 0; i < d1; ++i)
    for (std::size_t j = 0; j < d2; ++j)
      if (mask(i, j)) {
        ++row_deg[i];
        ++col_deg[j];
      }
  res.had_empty_lines =
      std::count(row_deg.begin(), row_deg.end(), 0) > 0 ||
      std::count(col_deg.begin(), col_deg.end(), 0) > 0;

  // Spectral initialization on the zero-filled (optionally trimmed) matrix.
  Mask init_mask = mask;
  if (method == CompletionMethod::OptSpaceStyle) {
    const double n_obs = static_cast<double>(mask.count());
    const double row_cap = 2.0 * n_obs / static_cast<double>(d1);
    const double col_cap = 2.0 * n_obs / static_cast<double>(d2);
    for (std::size_t i = 0; i < d1; ++i)
      if (static_cast<double>(row_deg[i]) > row_cap) {
        ++res.trimmed_rows;
        for (std::size_t j = 0; j < d2; ++j) init_mask.set(i, j, false);
      }
    for (std::size_t j = 0; j < d2; ++j)
      if (static_cast<double>(col_deg[j]) > col_cap) {
        ++res.trimmed_cols;
        for (std::size_t i = 0; i < d1; ++i) init_mask.set(i, j, false);
      }
  }
  const std::size_t n_init = init_mask.count();
  if (n_init > 0) {
    Matrix zero_filled(d1, d2);
    const double scale = static_cast<double>(d1 * d2) / static_cast<double>(n_init);
    for (std::size_t i = 0; i < d1; ++i)
      for (std::size_t j = 0; j < d2; ++j)
        if (init_mask(i, j)) zero_filled(i, j) = scale * K_tilde(i, j);
    const SvdFactors f = thin_svd(zero_filled);
    for (std::size_t p = 0; p < r; ++p) {
      const double root = std::sqrt(f.S[p]);
      for (std::size_t i = 0; i < d1; ++i) res.left(i, p) = f.U(i, p) * root;
      for (std::size_t j = 0; j < d2; ++j) res.right(j, p) = f.V(j, p) * root;
    }
  }

  double data_scale = 0.0;
  for (std::size_t i = 0; i < d1; ++i)
    for (std::size_t j = 0; j < d2; ++j)
      if (mask(i, j)) data_scale += K_tilde(i, j) * K_tilde(i, j);

  double f_prev = observed_residual(K_tilde, mask, res.left, res.right);
  if (opts.keep_history) res.history.push_back(f_prev);
  bool tolerance_met = mask.count() == 0;
  int it = 0;
  while (!tolerance_met && it < opts.max_iterations) {
    als_half_step(K_tilde, mask, res.right, res.left, /*transposed=*/false);
    als_half_step(K_tilde, mask, res.left, res.right, /*transposed=*/true);
    ++it;
    const double f = observed_residual(K_tilde, mask, res.left, res.right);
    if (opts.keep_history) res.history.push_back(f);
    const bool exact_fit = f <= 1e-30 * std::max(1.0, data_scale);
    if (exact_fit || std::abs(f_prev - f) <= opts.relative_tolerance * f_prev) {
      tolerance_met = true;
    }
    f_prev = f;
  }

  res.iterations = it;
  res.objective = f_prev;
  res.gradient_norm = gradient_norm(K_tilde, mask, res.left, res.right);
  res.converged = tolerance_met && res.gradient_norm <=
                                       opts.grad_tolerance *
                                           std::max(1.0, std::sqrt(data_scale));
  res.K_hat = res.left * res.right.transposed();
  return res;
}

IncoherenceReport incoherence(const Matrix& K, std::size_t r) {
  const SvdFactors f = thin_svd(K);
  if (r == 0 || f.rank() < r) {
    throw InvalidRank("incoherence: matrix rank below " + std::to_string(r));
  }
  const std::size_t d1 = K.rows();
  const std::size_t d2 = K.cols();
  const double rr = static_cast<double>(r);
  IncoherenceReport rep;
  double mu0 = 0.0;
  for (std::size_t i = 0; i < d1; ++i) {
    double lev = 0.0;
    for (std::size_t k = 0; k < r; ++k) lev += f.U(i, k) * f.U(i, k);
    mu0 = std::max(mu0, static_cast<double>(d1) / rr * lev);
  }
  for (std::size_t j = 0; j < d2; ++j) {
    double lev = 0.0;
    for (std::size_t k = 0; k < r; ++k) lev += f.V(j, k) * f.V(j, k);
    mu0 = std::max(mu0, static_cast<double>(d2) / rr * lev);
  }
  double mu1 = 0.0;
  const double scale = std::sqrt(static_cast<double>(d1 * d2) / rr);
  for (std::size_t i = 0; i < d1; ++i)
    for (std::size_t j = 0; j < d2; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < r; ++k) s += f.U(i, k) * (f.S[k] / f.S[0]) * f.V(j, k);
      mu1 = std::max(mu1, scale * std::abs(s));
    }
  rep.mu0 = mu0;
  rep.mu1 = mu1;
  rep.kappa = f.S[0] / f.S[r - 1];
  return rep;
}

double sin_theta_product(const Matrix& U_hat_perp, const Matrix& U_star,
                         const Matrix& V_hat_perp, const Matrix& V_star) {
  if (U_hat_perp.rows() != U_star.rows() || V_hat_perp.rows() != V_star.rows()) {
    throw InvalidInput("sin_theta_product: basis dimension mismatch");
  }
  return frobenius_norm(transpose_times(U_hat_perp, U_star)) *
         frobenius_norm(transpose_times(V_hat_perp, V_star));
}

}  // namespace bilinear
