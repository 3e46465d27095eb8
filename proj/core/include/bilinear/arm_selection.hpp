#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "bilinear/environment.hpp"
#include "bilinear/linalg.hpp"
#include "bilinear/rng.hpp"

namespace bilinear {

enum class SubsetSource { Relaxation, RandomCandidate };

std::string_view to_string(SubsetSource s) noexcept;

struct SubsetSelection {
  std::vector<std::size_t> indices;  // exactly dim distinct arm indices
  double score = 0.0;                // smallest singular value of the stack
  SubsetSource source = SubsetSource::Relaxation;
};

/// Smallest singular value of the dim x dim matrix whose rows are the chosen
/// arms; 0 when that matrix is numerically singular.
double score_subset(const ArmSet& arms, std::span<const std::size_t> indices);

struct RelaxationOptions {
  int iterations = 500;  // Frank-Wolfe steps with step size 2 / (k + 2)
};

/// Frank-Wolfe approximation of argmax_w lambda_min(sum_i w_i x_i x_i^T) over
/// the probability simplex.
std::vector<double> relaxation_weights(const ArmSet& arms,
                                       const RelaxationOptions& opts = {});

/// lambda_min(sum_i w_i x_i x_i^T).
double design_min_eigenvalue(const ArmSet& arms, std::span<const double> weights);

struct SelectionOptions {
  std::size_t n_random = 20;
  std::size_t max_retries = 100;
  RelaxationOptions relaxation;
};

/// Best of {top-dim arms by relaxation weight} and n_random uniform subsets.
/// Throws DegenerateArmSet if no candidate, including up to max_retries
/// extra random ones, is nonsingular.
SubsetSelection select_subset(const ArmSet& arms, Rng& rng,
                              const SelectionOptions& opts = {});

/// A uniformly random k-subset of [0, n), in increasing order.
std::vector<std::size_t> random_subset(std::size_t n, std::size_t k, Rng& rng);

}  // namespace bilinear
