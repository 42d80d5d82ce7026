#include "underlap/kmeans.hpp"

#include <limits>
#include <numeric>

#include "underlap/errors.hpp"
#include "underlap/rng.hpp"

namespace underlap {

namespace {

// Assigns every row to its nearest centroid (ties to the lowest index) and
// returns the within-cluster sum of squares.
double assign(const Eigen::MatrixXd& x, const Eigen::MatrixXd& centroids,
              std::vector<int>* labels) {
  const int n = static_cast<int>(x.rows());
  const int k = static_cast<int>(centroids.rows());
  double sse = 0.0;
  for (int i = 0; i < n; ++i) {
    int best = 0;
    double best_d = (x.row(i) - centroids.row(0)).squaredNorm();
    for (int l = 1; l < k; ++l) {
      const double d = (x.row(i) - centroids.row(l)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = l;
      }
    }
    (*labels)[static_cast<std::size_t>(i)] = best;
    sse += best_d;
  }
  return sse;
}

}  // namespace

KmeansResult kmeans(const Eigen::MatrixXd& x, int k, std::uint64_t seed, int iters,
                    int restarts) {
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  if (k < 1) throw ArgumentError("kmeans: k must be positive");
  if (iters < 1 || restarts < 1) throw ArgumentError("kmeans: iters and restarts must be positive");
  if (n < k) {
    throw ArgumentError("kmeans: " + std::to_string(n) + " rows cannot seed " + std::to_string(k) +
                        " clusters");
  }

  KmeansResult best;
  best.sse = std::numeric_limits<double>::infinity();
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  std::vector<int> order(static_cast<std::size_t>(n));

  for (int r = 0; r < restarts; ++r) {
    Rng rng(split_seed(seed, static_cast<std::uint64_t>(r)));

    // Seed centroids on k distinct row indices via a partial shuffle. Rows
    // may still hold duplicate values; empty-cluster repair handles that.
    std::iota(order.begin(), order.end(), 0);
    Eigen::MatrixXd centroids(k, p);
    for (int l = 0; l < k; ++l) {
      const int j = l + rng.uniform_int(n - l);
      std::swap(order[static_cast<std::size_t>(l)], order[static_cast<std::size_t>(j)]);
      centroids.row(l) = x.row(order[static_cast<std::size_t>(l)]);
    }

    int reseeds = 0;
    for (int it = 0; it < iters; ++it) {
      assign(x, centroids, &labels);
      centroids.setZero();
      std::fill(counts.begin(), counts.end(), 0);
      for (int i = 0; i < n; ++i) {
        centroids.row(labels[static_cast<std::size_t>(i)]) += x.row(i);
        ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
      }
      for (int l = 0; l < k; ++l) {
        if (counts[static_cast<std::size_t>(l)] > 0) {
          centroids.row(l) /= static_cast<double>(counts[static_cast<std::size_t>(l)]);
        } else {
          centroids.row(l) = x.row(rng.uniform_int(n));
          ++reseeds;
        }
      }
    }
    const double sse = assign(x, centroids, &labels);
    if (sse < best.sse) {
      best.centroids = centroids;
      best.labels = labels;
      best.sse = sse;
      best.reseeds = reseeds;
    }
  }
  return best;
}

}  // namespace underlap
