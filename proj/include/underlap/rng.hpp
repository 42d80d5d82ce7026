#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace underlap {

// Derives the seed for an independent stream from a master seed and a stream
// index (posterior row, cluster id, grid point, ...). splitmix64 finalizer
// over master + a golden-ratio stride; see docs/determinism.md. Every loop
// that fans out work derives its per-item seeds through this one function, so
// results are independent of worker count and iteration order.
std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream);

// Deterministic generator facade. mt19937_64 supplies raw bits; every
// distribution transform lives here so the draw sequence is pinned by this
// file alone and never shifts underneath a recorded seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform();      // [0, 1)
  double uniform_pos();  // (0, 1]
  double normal();       // standard normal, Box-Muller with cached spare
  double gamma(double shape, double rate);
  double beta(double a, double b);
  double chi_square(double dof);

  int uniform_int(int n);  // uniform over {0, ..., n-1}
  int categorical(const Eigen::VectorXd& probs);
  // Categorical draw from unnormalized log-weights (-inf allowed).
  int categorical_log(const Eigen::VectorXd& log_weights);

  Eigen::VectorXd dirichlet(const Eigen::VectorXd& alpha);
  Eigen::VectorXd normal_vector(int n);

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace underlap
