#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace underlap {

struct KmeansResult {
  Eigen::MatrixXd centroids;  // k x p
  std::vector<int> labels;    // nearest-centroid assignment of each row
  double sse = 0.0;           // within-cluster sum of squares
  int reseeds = 0;            // empty-centroid repairs across all restarts
};

// Lloyd's algorithm with a fixed iteration count and multiple seeded
// restarts; the restart with the smallest within-cluster sum of squares
// wins. Centroids that lose all members are re-seeded from a random data
// row and counted in `reseeds`. Deterministic given the seed.
KmeansResult kmeans(const Eigen::MatrixXd& x, int k, std::uint64_t seed, int iters = 50,
                    int restarts = 10);

}  // namespace underlap
