#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace bilinear {

using Vector = std::vector<double>;

/// Singular values at or below kRankTolerance * sigma_max are treated as zero.
inline constexpr double kRankTolerance = 1e-10;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  /// Takes ownership of row-major `entries`; throws InvalidInput on a size mismatch.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);
  /// Stacks equally sized vectors as rows.
  static Matrix from_rows(std::span<const Vector> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) noexcept {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) noexcept {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }
  Vector col(std::size_t j) const;
  void set_col(std::size_t j, std::span<const double> values);

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  Matrix transposed() const;
  /// Copy of the nr x nc block starting at (r0, c0).
  Matrix block(std::size_t r0, std::size_t c0, std::size_t nr,
               std::size_t nc) const;
  /// Copy of columns [c0, c0 + nc).
  Matrix cols_range(std::size_t c0, std::size_t nc) const {
    return block(0, c0, rows_, nc);
  }
  bool all_finite() const noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);
/// a^T b without forming the transpose.
Matrix transpose_times(const Matrix& a, const Matrix& b);
/// [a | b] side by side.
Matrix hstack(const Matrix& a, const Matrix& b);

Vector matvec(const Matrix& a, std::span<const double> x);
Vector matvec_transposed(const Matrix& a, std::span<const double> x);
double dot(std::span<const double> a, std::span<const double> b) noexcept;
double norm2(std::span<const double> a) noexcept;
Matrix outer(std::span<const double> u, std::span<const double> v);
double frobenius_norm(const Matrix& a) noexcept;
double max_abs(const Matrix& a) noexcept;
/// x^T A y.
double bilinear_form(std::span<const double> x, const Matrix& a,
                     std::span<const double> y);
/// Max |(A^T A - I)_ij|; zero for exactly column-orthonormal A.
double orthonormality_residual(const Matrix& a);

struct SvdFactors {
  Matrix U;  // m x min(m, n), orthonormal columns
  Vector S;  // non-increasing, nonnegative
  Matrix V;  // n x min(m, n), orthonormal columns

  /// Number of singular values above kRankTolerance * S[0].
  std::size_t rank() const noexcept;
  Matrix reconstruct() const;
};

/// Thin SVD by one-sided (Hestenes) Jacobi rotations. Throws InvalidInput for
/// an empty or non-finite matrix.
SvdFactors thin_svd(const Matrix& m);

/// Orthonormal basis of the orthogonal complement of range(U), d x (d - r).
Matrix complement_basis(const Matrix& u);

/// Smallest singular value above kRankTolerance * sigma_max; 0 for a zero matrix.
double min_nonzero_singular(const Matrix& m);

/// Largest singular value.
double spectral_norm(const Matrix& m);

/// Solve V x = b for symmetric positive-definite V via Cholesky.
Vector solve_spd(const Matrix& v, std::span<const double> b);

/// Lower-triangular Cholesky factor V = L L^T with O(n^2) rank-one updates.
class Cholesky {
 public:
  Cholesky() = default;
  /// Throws SingularMatrix if `v` is not numerically positive definite.
  explicit Cholesky(const Matrix& v);

  std::size_t dim() const noexcept { return l_.rows(); }
  const Matrix& lower() const noexcept { return l_; }

  Vector solve(std::span<const double> b) const;
  /// Overwrites b with L^{-1} b.
  void forward_substitute(std::span<double> b) const noexcept;
  /// Overwrites b with L^{-T} b.
  void back_substitute(std::span<double> b) const noexcept;
  /// L^T x.
  Vector lower_transpose_times(std::span<const double> x) const;
  double log_det() const noexcept;

  /// Refactor for V + x x^T in place.
  void rank_one_update(std::span<const double> x);

 private:
  Matrix l_;
};

/// Solve A X = B for square A using partial-pivot LU. Throws SingularMatrix
/// when a pivot falls below kRankTolerance * max|A|.
Matrix solve_square(const Matrix& a, const Matrix& b);

/// Householder QR; Q is m x m orthogonal, R is m x n upper triangular.
struct QrFactors {
  Matrix Q;
  Matrix R;
};
QrFactors householder_qr(const Matrix& a);

/// Minimizer of ||A X - B||_F for tall A with full column rank.
Matrix least_squares(const Matrix& a, const Matrix& b);

}  // namespace bilinear
