#pragma once

#include <vector>

#include "extremodep/numerics.hpp"
#include "extremodep/rng.hpp"

namespace extremodep {

// Positive alpha-stable variable with Laplace transform exp(-s^alpha), 0 < alpha <= 1 (Kanter).
double positive_stable(double alpha, Rng& rng);

// n draws of a d-variate symmetric logistic max-stable vector with unit-Frechet
// margins: Z_j = (S / E_j)^alpha. alpha = 1 gives independence.
Matrix sample_logistic(int n, int d, double alpha, Rng& rng);

// Columns split into groups; logistic(alpha) within a group, independent across.
Matrix sample_planted_logistic(int n, const std::vector<int>& group_sizes, double alpha, Rng& rng);

}  // namespace extremodep
