#include "bilinear/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bilinear/error.hpp"

namespace bilinear {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidDimension(std::string(op) + ": shape mismatch");
  }
}

void require_finite(const Matrix& m, const char* op) {
  if (m.empty()) throw InvalidInput(std::string(op) + ": empty matrix");
  if (!m.all_finite()) throw InvalidInput(std::string(op) + ": non-finite entry");
}

// Extends the first `have` orthonormal rows of `basis` (each of length m) to
// `basis.rows()` orthonormal rows by Gram-Schmidt on coordinate axes.
void complete_orthonormal_rows(Matrix& basis, std::size_t have) {
  const std::size_t m = basis.cols();
  std::size_t next_axis = 0;
  for (std::size_t k = have; k < basis.rows(); ++k) {
    // Pick the axis with the largest residual after projection.
    Vector best;
    double best_norm = -1.0;
    for (std::size_t axis = next_axis; axis < m + next_axis; ++axis) {
      Vector cand(m, 0.0);
      cand[axis % m] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t q = 0; q < k; ++q) {
          const double proj = dot(cand, basis.row(q));
          for (std::size_t i = 0; i < m; ++i) cand[i] -= proj * basis(q, i);
        }
      }
      const double nrm = norm2(cand);
      if (nrm > best_norm) {
        best_norm = nrm;
        best = std::move(cand);
      }
      if (nrm > 0.5) break;
    }
    ++next_axis;
    for (std::size_t i = 0; i < m; ++i) basis(k, i) = best[i] / best_norm;
  }
}

// One-sided Jacobi on the rows of `wt` (n rows of length m, n <= m). On exit
// the rows of wt are mutually orthogonal and `vt` holds the accumulated
// rotations so that wt = vt * A^T.
void hestenes_jacobi(Matrix& wt, Matrix& vt) {
  const std::size_t n = wt.rows();
  const std::size_t m = wt.cols();
  constexpr double kEps = 1e-15;
  constexpr int kMaxSweeps = 80;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto wp = wt.row(p);
        auto wq = wt.row(q);
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          alpha += wp[i] * wp[i];
          beta += wq[i] * wq[i];
          gamma += wp[i] * wq[i];
        }
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= kEps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double a = wp[i], b = wq[i];
          wp[i] = c * a - s * b;
          wq[i] = s * a + c * b;
        }
        auto vp = vt.row(p);
        auto vq = vt.row(q);
        for (std::size_t i = 0; i < n; ++i) {
          const double a = vp[i], b = vq[i];
          vp[i] = c * a - s * b;
          vq[i] = s * a + c * b;
        }
      }
    }
    if (!rotated) break;
  }
}

// SVD of a tall (rows >= cols) matrix.
SvdFactors tall_svd(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Matrix wt = a.transposed();
  Matrix vt = Matrix::identity(n);
  hestenes_jacobi(wt, vt);

  Vector sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = norm2(wt.row(j));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  SvdFactors out;
  out.S.resize(n);
  Matrix ut(n, m);
  Matrix v_sorted_t(n, n);
  const double tol = kRankTolerance * sigma[order[0]];
  std::size_t kept = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.S[k] = sigma[j];
    std::copy(vt.row(j).begin(), vt.row(j).end(), v_sorted_t.row(k).begin());
    if (sigma[j] > tol && sigma[j] > 0.0) {
      for (std::size_t i = 0; i < m; ++i) ut(k, i) = wt(j, i) / sigma[j];
      ++kept;
    }
  }
  // Re-orthogonalize the retained left vectors (two MGS passes), then
  // complete the numerically null directions.
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t k = 0; k < kept; ++k) {
      auto uk = ut.row(k);
      for (std::size_t q = 0; q < k; ++q) {
        const double proj = dot(uk, ut.row(q));
        for (std::size_t i = 0; i < m; ++i) uk[i] -= proj * ut(q, i);
      }
      const double nrm = norm2(uk);
      for (double& x : uk) x /= nrm;
    }
  }
  complete_orthonormal_rows(ut, kept);
  out.U = ut.transposed();
  out.V = v_sorted_t.transposed();
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Matrix

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (data_.size() != rows_ * cols_) {
    throw InvalidInput("Matrix: entry count does not match rows*cols");
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw InvalidInput("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
  Matrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

Matrix Matrix::from_rows(std::span<const Vector> rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) throw InvalidInput("from_rows: ragged rows");
    std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  }
  return m;
}

Vector Matrix::col(std::size_t j) const {
  Vector out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
  return out;
}

void Matrix::set_col(std::size_t j, std::span<const double> values) {
  for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = values[i];
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix Matrix::block(std::size_t r0, std::size_t c0, std::size_t nr,
                     std::size_t nc) const {
  if (r0 + nr > rows_ || c0 + nc > cols_) {
    throw InvalidDimension("Matrix::block out of range");
  }
  Matrix b(nr, nc);
  for (std::size_t i = 0; i < nr; ++i)
    for (std::size_t j = 0; j < nc; ++j) b(i, j) = (*this)(r0 + i, c0 + j);
  return b;
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double x) { return std::isfinite(x); });
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw InvalidDimension("matrix product: inner dimension mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ci = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto bk = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "operator+");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "operator-");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
  return c;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (double& x : c.data()) x *= s;
  return c;
}

Matrix transpose_times(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw InvalidDimension("transpose_times: row mismatch");
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto ak = a.row(k);
    auto bk = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = ak[i];
      if (aki == 0.0) continue;
      auto ci = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

Matrix hstack(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw InvalidDimension("hstack: row mismatch");
  Matrix c(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::copy(a.row(i).begin(), a.row(i).end(), c.row(i).begin());
    std::copy(b.row(i).begin(), b.row(i).end(), c.row(i).begin() + a.cols());
  }
  return c;
}

Vector matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw InvalidDimension("matvec: dimension mismatch");
  Vector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

Vector matvec_transposed(const Matrix& a, std::span<const double> x) {
  if (a.rows() != x.size()) throw InvalidDimension("matvec_transposed: dimension mismatch");
  Vector y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ai = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += ai[j] * x[i];
  }
  return y;
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) noexcept { return std::sqrt(dot(a, a)); }

Matrix outer(std::span<const double> u, std::span<const double> v) {
  Matrix m(u.size(), v.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = u[i] * v[j];
  return m;
}

double frobenius_norm(const Matrix& a) noexcept { return norm2(a.data()); }

double max_abs(const Matrix& a) noexcept {
  double m = 0.0;
  for (double x : a.data()) m = std::max(m, std::abs(x));
  return m;
}

double bilinear_form(std::span<const double> x, const Matrix& a,
                     std::span<const double> y) {
  if (x.size() != a.rows() || y.size() != a.cols()) {
    throw InvalidDimension("bilinear_form: dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    if (x[i] != 0.0) s += x[i] * dot(a.row(i), y);
  }
  return s;
}

double orthonormality_residual(const Matrix& a) {
  const Matrix g = transpose_times(a, a);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j)
      worst = std::max(worst, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
  return worst;
}

// ---------------------------------------------------------------------------
// SVD and friends

std::size_t SvdFactors::rank() const noexcept {
  if (S.empty() || S[0] == 0.0) return 0;
  const double tol = kRankTolerance * S[0];
  return static_cast<std::size_t>(
      std::count_if(S.begin(), S.end(), [&](double s) { return s > tol; }));
}

Matrix SvdFactors::reconstruct() const {
  Matrix us = U;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= S[j];
  return us * V.transposed();
}

SvdFactors thin_svd(const Matrix& m) {
  require_finite(m, "thin_svd");
  if (m.rows() >= m.cols()) return tall_svd(m);
  SvdFactors t = tall_svd(m.transposed());
  std::swap(t.U, t.V);
  return t;
}

Matrix complement_basis(const Matrix& u) {
  require_finite(u, "complement_basis");
  const std::size_t d = u.rows();
  const std::size_t r = u.cols();
  if (r >= d) throw InvalidDimension("complement_basis: need fewer columns than rows");
  if (orthonormality_residual(u) > 1e-8) {
    throw InvalidInput("complement_basis: input columns are not orthonormal");
  }
  // The trailing d - r columns of the full Householder Q are orthogonal to
  // range(U) = range(Q[:, :r]).
  const QrFactors qr = householder_qr(u);
  return qr.Q.cols_range(r, d - r);
}

double min_nonzero_singular(const Matrix& m) {
  const SvdFactors f = thin_svd(m);
  const std::size_t rank = f.rank();
  return rank == 0 ? 0.0 : f.S[rank - 1];
}

double spectral_norm(const Matrix& m) { return thin_svd(m).S.front(); }

// ---------------------------------------------------------------------------
// Cholesky

Cholesky::Cholesky(const Matrix& v) : l_(v.rows(), v.cols()) {
  if (v.rows() != v.cols()) throw InvalidDimension("Cholesky: matrix not square");
  const std::size_t n = v.rows();
  for (std::size_t j = 0; j < n; ++j) {
    double diag = v(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l_(j, k) * l_(j, k);
    if (!(diag > 0.0) || !std::isfinite(diag)) {
      throw SingularMatrix("Cholesky: matrix is not positive definite");
    }
    const double ljj = std::sqrt(diag);
    l_(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = v(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
      l_(i, j) = s / ljj;
    }
  }
}

void Cholesky::forward_substitute(std::span<double> b) const noexcept {
  const std::size_t n = dim();
  for (std::size_t i = 0; i < n; ++i) {
    auto li = l_.row(i);
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= li[k] * b[k];
    b[i] = s / li[i];
  }
}

void Cholesky::back_substitute(std::span<double> b) const noexcept {
  const std::size_t n = dim();
  for (std::size_t ii = n; ii-- > 0;) {
    b[ii] /= l_(ii, ii);
    const double bi = b[ii];
    auto li = l_.row(ii);
    for (std::size_t k = 0; k < ii; ++k) b[k] -= li[k] * bi;
  }
}

Vector Cholesky::solve(std::span<const double> b) const {
  if (b.size() != dim()) throw InvalidDimension("Cholesky::solve: dimension mismatch");
  Vector x(b.begin(), b.end());
  forward_substitute(x);
  back_substitute(x);
  return x;
}

Vector Cholesky::lower_transpose_times(std::span<const double> x) const {
  const std::size_t n = dim();
  Vector y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto li = l_.row(i);
    for (std::size_t k = 0; k <= i; ++k) y[k] += li[k] * x[i];
  }
  return y;
}

double Cholesky::log_det() const noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < dim(); ++i) s += std::log(l_(i, i));
  return 2.0 * s;
}

void Cholesky::rank_one_update(std::span<const double> x_in) {
  const std::size_t n = dim();
  if (x_in.size() != n) throw InvalidDimension("rank_one_update: dimension mismatch");
  Vector x(x_in.begin(), x_in.end());
  for (std::size_t k = 0; k < n; ++k) {
    const double lkk = l_(k, k);
    const double r = std::hypot(lkk, x[k]);
    const double c = r / lkk;
    const double s = x[k] / lkk;
    l_(k, k) = r;
    for (std::size_t i = k + 1; i < n; ++i) {
      double& lik = l_(i, k);
      lik = (lik + s * x[i]) / c;
      x[i] = c * x[i] - s * lik;
    }
  }
}

Vector solve_spd(const Matrix& v, std::span<const double> b) {
  require_finite(v, "solve_spd");
  if (v.rows() != v.cols() || v.rows() != b.size()) {
    throw InvalidDimension("solve_spd: dimension mismatch");
  }
  const double scale = std::max(1.0, max_abs(v));
  for (std::size_t i = 0; i < v.rows(); ++i)
    for (std::size_t j = i + 1; j < v.cols(); ++j)
      if (std::abs(v(i, j) - v(j, i)) > 1e-10 * scale) {
        throw InvalidInput("solve_spd: matrix is not symmetric");
      }
  return Cholesky(v).solve(b);
}

// ---------------------------------------------------------------------------
// LU and QR

Matrix solve_square(const Matrix& a, const Matrix& b) {
  require_finite(a, "solve_square");
  const std::size_t n = a.rows();
  if (a.cols() != n || b.rows() != n) throw InvalidDimension("solve_square: dimension mismatch");
  Matrix lu = a;
  Matrix x = b;
  const double tol = kRankTolerance * max_abs(a);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(lu(i, k)) > std::abs(lu(piv, k))) piv = i;
    if (!(std::abs(lu(piv, k)) > tol)) throw SingularMatrix("solve_square: matrix is singular");
    if (piv != k) {
      std::swap_ranges(lu.row(k).begin(), lu.row(k).end(), lu.row(piv).begin());
      std::swap_ranges(x.row(k).begin(), x.row(k).end(), x.row(piv).begin());
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu(i, k) / lu(k, k);
      if (f == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) lu(i, j) -= f * lu(k, j);
      for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) -= f * x(k, j);
    }
  }
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      double s = x(ii, j);
      for (std::size_t k = ii + 1; k < n; ++k) s -= lu(ii, k) * x(k, j);
      x(ii, j) = s / lu(ii, ii);
    }
  }
  return x;
}

QrFactors householder_qr(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  QrFactors f{Matrix::identity(m), a};
  Matrix& q = f.Q;
  Matrix& r = f.R;
  const std::size_t steps = std::min(m > 0 ? m - 1 : 0, n);
  Vector v(m);
  for (std::size_t k = 0; k < steps; ++k) {
    double norm_x = 0.0;
    for (std::size_t i = k; i < m; ++i) norm_x += r(i, k) * r(i, k);
    norm_x = std::sqrt(norm_x);
    if (norm_x == 0.0) continue;
    const double alpha = -std::copysign(norm_x, r(k, k));
    std::fill(v.begin(), v.end(), 0.0);
    for (std::size_t i = k; i < m; ++i) v[i] = r(i, k);
    v[k] -= alpha;
    const double vnorm = norm2(v);
    if (vnorm == 0.0) continue;
    for (double& x : v) x /= vnorm;
    // R <- (I - 2 v v^T) R
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < m; ++i) s += v[i] * r(i, j);
      s *= 2.0;
      for (std::size_t i = k; i < m; ++i) r(i, j) -= s * v[i];
    }
    // Q <- Q (I - 2 v v^T)
    for (std::size_t i = 0; i < m; ++i) {
      auto qi = q.row(i);
      double s = 0.0;
      for (std::size_t j = k; j < m; ++j) s += qi[j] * v[j];
      s *= 2.0;
      for (std::size_t j = k; j < m; ++j) qi[j] -= s * v[j];
    }
    for (std::size_t i = k + 1; i < m; ++i) r(i, k) = 0.0;
  }
  return f;
}

Matrix least_squares(const Matrix& a, const Matrix& b) {
  require_finite(a, "least_squares");
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (m < n || b.rows() != m) throw InvalidDimension("least_squares: need a tall system");
  if (m == n) return solve_square(a, b);
  const QrFactors qr = householder_qr(a);
  const Matrix qtb = transpose_times(qr.Q, b);
  double rmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) rmax = std::max(rmax, std::abs(qr.R(i, i)));
  Matrix x(n, b.cols());
  for (std::size_t ii = n; ii-- > 0;) {
    const double rii = qr.R(ii, ii);
    if (!(std::abs(rii) > kRankTolerance * rmax)) {
      throw SingularMatrix("least_squares: matrix is rank deficient");
    }
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = qtb(ii, j);
      for (std::size_t k = ii + 1; k < n; ++k) s -= qr.R(ii, k) * x(k, j);
      x(ii, j) = s / rii;
    }
  }
  return x;
}

}  // namespace bilinear
