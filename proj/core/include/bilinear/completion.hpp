#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "bilinear/linalg.hpp"

namespace bilinear {

/// Running sums and counts of noisy entry observations for a d1 x d2 matrix.
class ObservationTable {
 public:
  ObservationTable(std::size_t d1, std::size_t d2);

  std::size_t d1() const noexcept { return sum_.rows(); }
  std::size_t d2() const noexcept { return sum_.cols(); }

  /// Adds reward y to cell (i, j). Throws InvalidInput for an out-of-range index.
  void record(std::size_t i, std::size_t j, double y);

  double sum(std::size_t i, std::size_t j) const { return sum_(i, j); }
  std::uint64_t count(std::size_t i, std::size_t j) const {
    return count_[i * d2() + j];
  }
  std::uint64_t total_count() const noexcept { return total_; }

 private:
  Matrix sum_;
  std::vector<std::uint64_t> count_;
  std::uint64_t total_ = 0;
};

/// Boolean observation pattern, row-major.
class Mask {
 public:
  Mask() = default;
  Mask(std::size_t rows, std::size_t cols, bool fill = false)
      : rows_(rows), cols_(cols), bits_(rows * cols, fill ? 1 : 0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool operator()(std::size_t i, std::size_t j) const noexcept {
    return bits_[i * cols_ + j] != 0;
  }
  void set(std::size_t i, std::size_t j, bool v) noexcept {
    bits_[i * cols_ + j] = v ? 1 : 0;
  }
  std::size_t count() const noexcept;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<unsigned char> bits_;
};

struct AveragedObservations {
  Matrix K_tilde;  // cell averages, 0 where unobserved
  Mask mask;       // true where at least one sample was recorded
};

/// Cell averages of the table; unobserved cells are 0 with mask false.
AveragedObservations averaged(const ObservationTable& table);

enum class CompletionMethod { BurerMonteiro, OptSpaceStyle };

std::string_view to_string(CompletionMethod m) noexcept;
/// Accepts "burer-monteiro" / "bm" and "optspace-style" / "optspace" / "os".
CompletionMethod parse_completion_method(std::string_view name);

struct CompletionOptions {
  int max_iterations = 200;
  /// Stop once |f_prev - f| <= relative_tolerance * f_prev.
  double relative_tolerance = 1e-9;
  /// Reported convergence additionally requires a gradient norm below this.
  double grad_tolerance = 1e-6;
  /// Record the residual after every sweep in CompletionResult::history.
  bool keep_history = false;
};

struct CompletionResult {
  Matrix K_hat;      // A B^T, rank <= r
  Matrix left;       // A, d1 x r
  Matrix right;      // B, d2 x r
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;     // sum of squared residuals on observed cells
  double gradient_norm = 0.0; // Frobenius norm of the factor gradient at exit
  bool had_empty_lines = false;  // some row or column had no observation
  std::size_t trimmed_rows = 0;
  std::size_t trimmed_cols = 0;
  std::vector<double> history;
};

/// Rank-r fit to the observed cells of K_tilde by alternating least squares
/// on K ~ A B^T, initialized from the top-r SVD of the zero-filled (and, for
/// OptSpaceStyle, trimmed) matrix rescaled by d1*d2/|E|.
CompletionResult complete(const Matrix& K_tilde, const Mask& mask, std::size_t r,
                          CompletionMethod method,
                          const CompletionOptions& opts = {});

struct IncoherenceReport {
  double mu0 = 1.0;
  double mu1 = 0.0;
  double kappa = 1.0;
};

/// Incoherence parameters of the rank-r part of K. Throws InvalidRank when
/// K has fewer than r numerically nonzero singular values.
IncoherenceReport incoherence(const Matrix& K, std::size_t r);

/// ||U_hat_perp^T U_star||_F * ||V_hat_perp^T V_star||_F.
double sin_theta_product(const Matrix& U_hat_perp, const Matrix& U_star,
                         const Matrix& V_hat_perp, const Matrix& V_star);

}  // namespace bilinear
