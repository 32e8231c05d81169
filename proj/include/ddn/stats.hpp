#pragma once

#include <span>
#include <vector>

#include "ddn/common.hpp"

namespace ddn {

// Midranks (ties averaged), 1-based.
std::vector<double> ranks(std::span<const double> xs);

// Spearman rank correlation; needs at least 3 points and non-constant input.
double spearman(std::span<const double> x, std::span<const double> y);

// Kendall tau-b.
double kendall_tau(std::span<const double> x, std::span<const double> y);

// One-sided Monte-Carlo permutation p-value for Spearman correlation,
// alternative "rho < 0": fraction of label permutations at least as negative
// as the observed statistic.
double spearman_perm_pvalue_neg(std::span<const double> x, std::span<const double> y,
                                int permutations, uint64_t seed);

double mean_of(std::span<const double> xs);
double sample_std(std::span<const double> xs);  // ddof = 1; 0 when n < 2

}  // namespace ddn
