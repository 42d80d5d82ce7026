#include "underlap/rng.hpp"

#include <cmath>
#include <limits>

#include "underlap/errors.hpp"

namespace underlap {

std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream) {
  // One splitmix64 round applied to master + (stream+1) * golden ratio.
  // The +1 keeps stream 0 from colliding with the bare master seed.
  std::uint64_t z = master + (stream + 1) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  // 53-bit mantissa in [0, 1).
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double Rng::uniform_pos() {
  return (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform_pos();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double Rng::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw ArgumentError("gamma: shape and rate must be positive");
  // Marsaglia-Tsang squeeze; shape < 1 boosted through the u^(1/shape) trick.
  if (shape < 1.0) {
    const double u = uniform_pos();
    return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_pos();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v / rate;
  }
}

double Rng::beta(double a, double b) {
  const double ga = gamma(a, 1.0);
  const double gb = gamma(b, 1.0);
  return ga / (ga + gb);
}

double Rng::chi_square(double dof) { return gamma(0.5 * dof, 0.5); }

int Rng::uniform_int(int n) {
  if (n <= 0) throw ArgumentError("uniform_int: n must be positive");
  // Rejection-free for our use: n is tiny relative to 2^53.
  const int k = static_cast<int>(uniform() * n);
  return k < n ? k : n - 1;
}

int Rng::categorical(const Eigen::VectorXd& probs) {
  const int n = static_cast<int>(probs.size());
  if (n == 0) throw ArgumentError("categorical: empty probability vector");
  const double total = probs.sum();
  double u = uniform() * total;
  for (int i = 0; i < n; ++i) {
    u -= probs[i];
    if (u < 0.0) return i;
  }
  return n - 1;  // fp leftovers land on the last category
}

int Rng::categorical_log(const Eigen::VectorXd& log_weights) {
  const int n = static_cast<int>(log_weights.size());
  if (n == 0) throw ArgumentError("categorical_log: empty weight vector");
  const double m = log_weights.maxCoeff();
  if (!std::isfinite(m)) throw NumericError("categorical_log: all weights are zero");
  Eigen::VectorXd p(n);
  for (int i = 0; i < n; ++i) p[i] = std::exp(log_weights[i] - m);
  return categorical(p);
}

Eigen::VectorXd Rng::dirichlet(const Eigen::VectorXd& alpha) {
  const int n = static_cast<int>(alpha.size());
  Eigen::VectorXd g(n);
  for (int i = 0; i < n; ++i) g[i] = gamma(alpha[i], 1.0);
  const double s = g.sum();
  if (s <= 0.0) throw NumericError("dirichlet: degenerate draw (all gammas zero)");
  return g / s;
}

Eigen::VectorXd Rng::normal_vector(int n) {
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z[i] = normal();
  return z;
}

}  // namespace underlap
