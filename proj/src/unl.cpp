#include "underlap/unl.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "underlap/errors.hpp"

#ifdef UNDERLAP_HAVE_OPENMP
#include <omp.h>
#endif

namespace underlap {

namespace {

void check_group_set(const std::vector<DensityModel>& groups, int min_k) {
  if (static_cast<int>(groups.size()) < min_k)
    throw ArgumentError("underlap: need at least " + std::to_string(min_k) + " groups");
  const SupportSignature sig = groups.front().signature();
  for (const auto& g : groups)
    if (!(g.signature() == sig))
      throw ShapeError("underlap: groups disagree on support signature");
}

// Odometer over the categorical state space; calls fn with each code vector.
// Returns false without calling fn if the space exceeds the cap.
bool for_each_state(const std::vector<int>& cards, std::size_t cap,
                    const std::function<void(const std::vector<int>&)>& fn) {
  double total = 1.0;
  for (int c : cards) total *= static_cast<double>(c);
  if (total > static_cast<double>(cap)) return false;
  std::vector<int> codes(cards.size(), 0);
  for (;;) {
    fn(codes);
    int k = static_cast<int>(cards.size()) - 1;
    while (k >= 0) {
      if (++codes[k] < cards[k]) break;
      codes[k] = 0;
      --k;
    }
    if (k < 0) break;
  }
  return true;
}

}  // namespace

UnlEstimate estimate_unl(const std::vector<DensityModel>& groups, int m, std::uint64_t seed) {
  check_group_set(groups, 2);
  if (m < 1) throw ArgumentError("estimate_unl: m must be >= 1");
  const int k_groups = static_cast<int>(groups.size());
  const double log_k = std::log(static_cast<double>(k_groups));

  Rng rng(seed);
  Eigen::VectorXd logf(k_groups);
  double sum_w = 0.0, sum_w2 = 0.0, w_max = 0.0;
  for (int i = 0; i < m; ++i) {
    const int pick = rng.uniform_int(k_groups);
    const MixedPoint x = sample_point(groups[pick], rng);
    for (int k = 0; k < k_groups; ++k) logf[k] = log_density(groups[k], x);
    // w = max_k f_k / q with q = (1/K) sum_k f_k, computed as
    // exp(log K - log sum_k exp(log f_k - log max f_k)). Shifting by the max
    // keeps the sum in [1, K] and makes identical groups cancel exactly
    // (s == K bitwise, so w == 1 bitwise).
    const double log_max = logf.maxCoeff();
    double s = 0.0;
    for (int k = 0; k < k_groups; ++k) s += std::exp(logf[k] - log_max);
    const double w = std::exp(log_k - std::log(s));
    // Bounded-weight guarantee of the equal-weight proposal; a violation
    // beyond fp noise means a density evaluated inconsistently.
    if (w < 1.0 - 1e-6 || w > k_groups + 1e-6)
      throw NumericError("estimate_unl: importance weight escaped [1, K]");
    sum_w += w;
    sum_w2 += w * w;
    w_max = std::max(w_max, w);
  }

  UnlEstimate est;
  est.value = sum_w / m;
  est.m = m;
  est.weight_mean = est.value;
  est.weight_max = w_max;
  est.ess = sum_w2 > 0.0 ? (sum_w * sum_w) / sum_w2 : 0.0;
  est.seed = seed;
  return est;
}

UnlPosterior estimate_unl_posterior(const std::vector<std::vector<DensityModel>>& group_draws,
                                    int m, std::uint64_t master_seed, int threads) {
  if (group_draws.empty()) throw ShapeError("estimate_unl_posterior: no rows");
  const std::size_t k_groups = group_draws.front().size();
  const SupportSignature sig = group_draws.front().front().signature();
  for (const auto& row : group_draws) {
    if (row.size() != k_groups) throw ShapeError("estimate_unl_posterior: ragged rows");
    for (const auto& g : row)
      if (!(g.signature() == sig))
        throw ShapeError("estimate_unl_posterior: signature varies across rows");
  }

  const int s_rows = static_cast<int>(group_draws.size());
  UnlPosterior post;
  post.draws.resize(s_rows);

  if (threads <= 1) {
    // Serial reference path; must stay byte-identical to the parallel one.
    for (int s = 0; s < s_rows; ++s)
      post.draws[s] = estimate_unl(group_draws[s], m, split_seed(master_seed, s));
  } else {
#ifdef UNDERLAP_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int s = 0; s < s_rows; ++s)
      post.draws[s] = estimate_unl(group_draws[s], m, split_seed(master_seed, s));
#else
    for (int s = 0; s < s_rows; ++s)
      post.draws[s] = estimate_unl(group_draws[s], m, split_seed(master_seed, s));
#endif
  }
  return post;
}

double variance_bound(int k_groups, double unl, int m) {
  if (k_groups < 1) throw ArgumentError("variance_bound: k_groups must be >= 1");
  if (m < 1) throw ArgumentError("variance_bound: m must be >= 1");
  if (unl < 1.0 - 1e-9 || unl > k_groups + 1e-9)
    throw ArgumentError("variance_bound: unl outside [1, K]");
  const double u = std::clamp(unl, 1.0, static_cast<double>(k_groups));
  return u * (k_groups - u) / m;
}

double unl_exact_discrete(const std::vector<DensityModel>& groups) {
  check_group_set(groups, 2);
  const SupportSignature sig = groups.front().signature();
  if (sig.p_continuous != 0)
    throw ArgumentError("unl_exact_discrete: groups must be discrete-only");

  double total = 0.0;
  MixedPoint pt;
  pt.cont = Eigen::VectorXd(0);
  const bool ok = for_each_state(sig.cardinalities, 10000000u, [&](const std::vector<int>& codes) {
    pt.cat = codes;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& g : groups) best = std::max(best, log_density(g, pt));
    total += std::exp(best);
  });
  if (!ok) throw CapacityError("unl_exact_discrete: state space exceeds 10^7");
  return total;
}

// ---------------------------------------------------------------------------
// Quadrature oracle

namespace {

// Single fixed-step midpoint pass. Also accumulates each group's own mass so
// the coverage precondition can be checked from the same sweep.
double riemann_pass(const std::vector<DensityModel>& groups, const std::vector<GridAxis>& axes,
                    const std::vector<int>& cards, std::vector<double>* masses) {
  const int k_groups = static_cast<int>(groups.size());
  const int p = static_cast<int>(axes.size());

  std::vector<long> counts(p);
  double cell = 1.0;
  for (int d = 0; d < p; ++d) {
    counts[d] = std::max<long>(1, std::lround((axes[d].hi - axes[d].lo) / axes[d].step));
    cell *= axes[d].step;
  }
  if (p == 0) cell = 1.0;

  double total = 0.0;
  if (masses) masses->assign(k_groups, 0.0);

  MixedPoint pt;
  pt.cont = Eigen::VectorXd(p);
  Eigen::VectorXd f(k_groups);

  auto accumulate = [&]() {
    double best = 0.0;
    for (int k = 0; k < k_groups; ++k) {
      f[k] = std::exp(log_density(groups[k], pt));
      if (masses) (*masses)[k] += f[k] * cell;
      best = std::max(best, f[k]);
    }
    total += best * cell;
  };

  auto sweep_continuous = [&]() {
    if (p == 0) {
      accumulate();
      return;
    }
    std::vector<long> ix(p, 0);
    for (;;) {
      for (int d = 0; d < p; ++d) pt.cont[d] = axes[d].lo + (ix[d] + 0.5) * axes[d].step;
      accumulate();
      int d = p - 1;
      while (d >= 0) {
        if (++ix[d] < counts[d]) break;
        ix[d] = 0;
        --d;
      }
      if (d < 0) break;
    }
  };

  if (cards.empty()) {
    pt.cat.clear();
    sweep_continuous();
  } else {
    for_each_state(cards, 10000000u, [&](const std::vector<int>& codes) {
      pt.cat = codes;
      sweep_continuous();
    });
  }
  return total;
}

}  // namespace

double unl_quadrature(const std::vector<DensityModel>& groups, const std::vector<GridAxis>& grid) {
  check_group_set(groups, 1);
  const SupportSignature sig = groups.front().signature();
  if (sig.p_continuous > 2)
    throw CapacityError("unl_quadrature: only p_continuous <= 2 is supported");
  if (static_cast<int>(grid.size()) != sig.p_continuous)
    throw ArgumentError("unl_quadrature: one grid axis per continuous coordinate required");
  for (const auto& ax : grid)
    if (!(ax.step > 0.0) || !(ax.hi > ax.lo))
      throw ArgumentError("unl_quadrature: grid axis needs hi > lo and step > 0");

  const double coarse = riemann_pass(groups, grid, sig.cardinalities, nullptr);

  std::vector<GridAxis> fine = grid;
  for (auto& ax : fine) ax.step *= 0.5;
  std::vector<double> masses;
  const double refined = riemann_pass(groups, fine, sig.cardinalities, &masses);

  for (std::size_t k = 0; k < masses.size(); ++k)
    if (masses[k] < 1.0 - 1e-6)
      throw PreconditionError("unl_quadrature: grid covers too little of group " +
                              std::to_string(k) + " (mass " + std::to_string(masses[k]) + ")");
  if (std::abs(refined - coarse) >= 1e-4)
    throw PreconditionError("unl_quadrature: halving the step moved the value by " +
                            std::to_string(std::abs(refined - coarse)) +
                            "; grid step too coarse to trust");
  return refined;
}

// ---------------------------------------------------------------------------
// Partition-sup identity check

double tv_partition_sup_discrete(const std::vector<CategoricalProduct>& groups, int max_states) {
  if (max_states < 1 || max_states > 6)
    throw ArgumentError("tv_partition_sup_discrete: max_states must be in [1, 6]");
  if (groups.size() < 2) throw ArgumentError("tv_partition_sup_discrete: need >= 2 groups");
  const std::vector<int> cards = groups.front().cardinalities();
  for (const auto& g : groups)
    if (g.cardinalities() != cards)
      throw ShapeError("tv_partition_sup_discrete: groups disagree on support signature");

  // Flatten each pmf over the product space.
  const int k_groups = static_cast<int>(groups.size());
  std::vector<std::vector<double>> pmf(k_groups);
  const bool ok = for_each_state(cards, static_cast<std::size_t>(max_states),
                                 [&](const std::vector<int>& codes) {
                                   for (int k = 0; k < k_groups; ++k)
                                     pmf[k].push_back(std::exp(groups[k].log_prob(codes)));
                                 });
  if (!ok)
    throw CapacityError("tv_partition_sup_discrete: state space exceeds max_states");
  const int n_states = static_cast<int>(pmf[0].size());

  // Enumerate set partitions via restricted growth strings: state s may join
  // any existing block or open block (max used + 1).
  double sup = 0.0;
  std::vector<int> assign(n_states, 0);
  std::function<void(int, int)> rec = [&](int s, int blocks) {
    if (s == n_states) {
      double value = 0.0;
      for (int b = 0; b < blocks; ++b) {
        double best = 0.0;
        for (int k = 0; k < k_groups; ++k) {
          double mass = 0.0;
          for (int t = 0; t < n_states; ++t)
            if (assign[t] == b) mass += pmf[k][t];
          best = std::max(best, mass);
        }
        value += best;
      }
      sup = std::max(sup, value);
      return;
    }
    for (int b = 0; b <= blocks; ++b) {
      assign[s] = b;
      rec(s + 1, std::max(blocks, b + 1));
    }
  };
  rec(0, 0);
  return sup;
}

}  // namespace underlap
