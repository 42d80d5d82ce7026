#pragma once

#include <cstdint>
#include <vector>

#include "underlap/density.hpp"

namespace underlap {

// One importance-sampling run against a fixed set of K group densities.
// value is the average weight (weight_mean repeats it for CSV symmetry);
// weights live in [1, K] for the equal-weight proposal, so value does too.
struct UnlEstimate {
  double value = 0.0;
  int m = 0;
  double weight_mean = 0.0;
  double weight_max = 0.0;
  double ess = 0.0;  // (sum w)^2 / sum w^2
  std::uint64_t seed = 0;
};

// One UnlEstimate per posterior density draw s = 1..S.
struct UnlPosterior {
  std::vector<UnlEstimate> draws;
};

// Underlap estimate by importance sampling from the equally weighted mixture
// proposal q = (1/K) sum_k f_k. All density arithmetic happens in log space;
// the weight max_k f_k / q is exp(max_k log f_k - log q) and is bounded by K.
// Deterministic given the seed.
UnlEstimate estimate_unl(const std::vector<DensityModel>& groups, int m, std::uint64_t seed);

// Runs estimate_unl once per row of an S x K model matrix. Per-row seeds are
// derived via split_seed(master_seed, row), so the result is identical for
// any `threads`; threads <= 1 is the serial reference path, larger values run
// the rows under OpenMP.
UnlPosterior estimate_unl_posterior(const std::vector<std::vector<DensityModel>>& group_draws,
                                    int m, std::uint64_t master_seed, int threads = 1);

// Upper bound unl * (k_groups - unl) / m on the variance of the estimator.
double variance_bound(int k_groups, double unl, int m);

// Exact sum of max_k p_k over the whole product state space. Groups must be
// discrete-only (CategoricalProduct or mixtures of them); the state space is
// capped at 10^7 states.
double unl_exact_discrete(const std::vector<DensityModel>& groups);

// Midpoint-Riemann oracle for p_continuous <= 2 (discrete part summed
// exhaustively). One axis per continuous coordinate. The value is computed at
// the given step and again at step/2; the two must agree within 1e-4 and each
// group's mass on the grid must be >= 1 - 1e-6, otherwise the grid is
// rejected. Returns the refined value.
struct GridAxis {
  double lo = 0.0;
  double hi = 0.0;
  double step = 0.0;
};
double unl_quadrature(const std::vector<DensityModel>& groups, const std::vector<GridAxis>& grid);

// Brute-force sup over all set partitions of a tiny discrete state space of
// sum_A max_k P_k(A). Equals unl_exact_discrete on the same input; kept as an
// independent identity check. Bell-number enumeration, so the total state
// count is capped at max_states <= 6.
double tv_partition_sup_discrete(const std::vector<CategoricalProduct>& groups,
                                 int max_states = 6);

}  // namespace underlap
