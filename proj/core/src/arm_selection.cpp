#include "bilinear/arm_selection.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "bilinear/error.hpp"

namespace bilinear {

namespace {

Matrix weighted_gram(const ArmSet& arms, std::span<const double> w) {
  const std::size_t d = arms.dim();
  Matrix g(d, d);
  for (std::size_t i = 0; i < arms.size(); ++i) {
    if (w[i] == 0.0) continue;
    auto x = arms[i];
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = 0; q < d; ++q) g(p, q) += w[i] * x[p] * x[q];
  }
  return g;
}

}  // namespace

std::string_view to_string(SubsetSource s) noexcept {
  return s == SubsetSource::Relaxation ? "relaxation" : "random-candidate";
}

double score_subset(const ArmSet& arms, std::span<const std::size_t> indices) {
  if (indices.size() != arms.dim()) {
    throw InvalidInput("score_subset: need exactly dim indices");
  }
  std::set<std::size_t> seen(indices.begin(), indices.end());
  if (seen.size() != indices.size()) throw InvalidInput("score_subset: duplicate index");
  const SvdFactors f = thin_svd(arms.stacked(indices));
  return f.rank() < arms.dim() ? 0.0 : f.S.back();
}

double design_min_eigenvalue(const ArmSet& arms, std::span<const double> weights) {
  if (weights.size() != arms.size()) {
    throw InvalidDimension("design_min_eigenvalue: weight count mismatch");
  }
  // The weighted Gram matrix is symmetric PSD, so its singular values are its
  // eigenvalues.
  return thin_svd(weighted_gram(arms, weights)).S.back();
}

std::vector<double> relaxation_weights(const ArmSet& arms, const RelaxationOptions& opts) {
  const std::size_t n = arms.size();
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  for (int k = 0; k < opts.iterations; ++k) {
    const SvdFactors f = thin_svd(weighted_gram(arms, w));
    const Vector v = f.V.col(f.V.cols() - 1);
    std::size_t best = 0;
    double best_val = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double proj = dot(arms[i], v);
      if (proj * proj > best_val) {
        best_val = proj * proj;
        best = i;
      }
    }
    const double step = 2.0 / (static_cast<double>(k) + 2.0);
    for (double& x : w) x *= 1.0 - step;
    w[best] += step;
  }
  return w;
}

std::vector<std::size_t> random_subset(std::size_t n, std::size_t k, Rng& rng) {
  if (k > n) throw InvalidInput("random_subset: k exceeds n");
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

SubsetSelection select_subset(const ArmSet& arms, Rng& rng, const SelectionOptions& opts) {
  const std::size_t d = arms.dim();
  const std::size_t n = arms.size();
  if (n < d) throw InvalidInput("select_subset: fewer arms than dimensions");

  const std::vector<double> w = relaxation_weights(arms, opts.relaxation);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
  std::vector<std::size_t> top(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(d));
  std::sort(top.begin(), top.end());

  SubsetSelection best{top, score_subset(arms, top), SubsetSource::Relaxation};
  auto consider = [&](std::vector<std::size_t> idx) {
    const double s = score_subset(arms, idx);
    if (s > best.score) best = {std::move(idx), s, SubsetSource::RandomCandidate};
  };
  for (std::size_t c = 0; c < opts.n_random; ++c) consider(random_subset(n, d, rng));
  for (std::size_t retry = 0; best.score <= 0.0 && retry < opts.max_retries; ++retry) {
    consider(random_subset(n, d, rng));
  }
  if (best.score <= 0.0) {
    throw DegenerateArmSet("select_subset: no nonsingular subset of arms found");
  }
  return best;
}

}  // namespace bilinear
