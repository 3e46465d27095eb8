#pragma once

#include "bilinear/linalg.hpp"
#include "bilinear/rng.hpp"

namespace testing_helpers {

inline bilinear::Matrix random_matrix(std::size_t rows, std::size_t cols, bilinear::Rng& rng) {
  bilinear::Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

// d x r with orthonormal columns.
inline bilinear::Matrix random_orthonormal(std::size_t d, std::size_t r, bilinear::Rng& rng) {
  return bilinear::householder_qr(random_matrix(d, r, rng)).Q.cols_range(0, r);
}

inline bilinear::Vector random_unit(std::size_t d, bilinear::Rng& rng) {
  bilinear::Vector v(d);
  for (double& x : v) x = rng.normal();
  const double n = bilinear::norm2(v);
  for (double& x : v) x /= n;
  return v;
}

inline double max_abs_diff(const bilinear::Matrix& a, const bilinear::Matrix& b) {
  return bilinear::max_abs(a - b);
}

}  // namespace testing_helpers
