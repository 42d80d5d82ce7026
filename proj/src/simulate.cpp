#include "underlap/simulate.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "underlap/density.hpp"
#include "underlap/errors.hpp"
#include "underlap/rng.hpp"

namespace underlap {

namespace {

constexpr double kPi = 3.14159265358979323846;

MixedDataset continuous_frame(const std::vector<std::string>& names, int n) {
  MixedDataset out;
  out.names = names;
  out.kinds.assign(names.size(), ColumnKind::continuous);
  out.block_pos.resize(names.size());
  for (std::size_t c = 0; c < names.size(); ++c) out.block_pos[c] = static_cast<int>(c);
  out.cont.resize(n, static_cast<int>(names.size()));
  out.cat.resize(n, 0);
  return out;
}

MixedDataset simulate_a(int n, Rng& rng) {
  MixedDataset out = continuous_frame({"y", "x"}, n);
  for (int i = 0; i < n; ++i) {
    const double x = -3.0 + 6.0 * rng.uniform();
    double mean = 0.0;
    if (x <= -1.0) mean = 2.0;
    if (x >= 1.0) mean = -5.0;
    out.cont(i, 0) = mean + 0.1 * rng.normal();
    out.cont(i, 1) = x;
  }
  return out;
}

MixedDataset simulate_b(int n, Rng& rng) {
  MixedDataset out = continuous_frame({"y", "x1", "x2"}, n);
  for (int i = 0; i < n; ++i) {
    const double x1 = -2.0 + 4.0 * rng.uniform();
    const double x2 = -2.0 + 4.0 * rng.uniform();
    const double s = std::sin(x1 * x2 * kPi / 2.0);
    const double mean = s > 0.0 ? -1.0 : 1.0;
    out.cont(i, 0) = mean + 0.1 * rng.normal();
    out.cont(i, 1) = x1;
    out.cont(i, 2) = x2;
  }
  return out;
}

// Shared frame for C1/C2: y and x_c continuous, x_d categorical with levels
// "1" and "2" (codes 0 and 1).
MixedDataset mixed_frame_c(int n) {
  MixedDataset out;
  out.names = {"y", "x_c", "x_d"};
  out.kinds = {ColumnKind::continuous, ColumnKind::continuous, ColumnKind::categorical};
  out.block_pos = {0, 1, 0};
  out.levels = {{"1", "2"}};
  out.cont.resize(n, 2);
  out.cat.resize(n, 1);
  return out;
}

MixedDataset simulate_c(int n, Rng& rng, bool variant_two) {
  MixedDataset out = mixed_frame_c(n);
  for (int i = 0; i < n; ++i) {
    const double xc = -3.0 + 6.0 * rng.uniform();
    const int xd = rng.uniform() < 0.5 ? 0 : 1;
    const bool second_line = rng.uniform() < 0.5;
    double mean;
    if (xd == 0) {
      const double slope = variant_two ? 12.0 : 2.0;
      mean = second_line ? slope * xc : -slope * xc;
    } else {
      mean = second_line ? 12.0 * xc + 80.0 : -12.0 * xc + 80.0;
    }
    out.cont(i, 0) = mean + 0.4 * rng.normal();
    out.cont(i, 1) = xc;
    out.cat(i, 0) = xd;
  }
  return out;
}

MixedDataset simulate_d(int n, Rng& rng) {
  const int p = 20;
  std::vector<std::string> names = {"y"};
  for (int j = 1; j <= p; ++j) names.push_back("x" + std::to_string(j));
  MixedDataset out = continuous_frame(names, n);

  // Covariates share a two-block covariance: variance 4 on the diagonal,
  // covariance 3 within the odd-indexed and within the even-indexed blocks,
  // zero across blocks.
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(p, p);
  for (int a = 0; a < p; ++a) {
    for (int b = 0; b < p; ++b) {
      if (a == b) {
        sigma(a, b) = 4.0;
      } else if (a % 2 == b % 2) {
        sigma(a, b) = 3.0;
      }
    }
  }
  const Gaussian covariate_law(Eigen::VectorXd::Constant(p, 4.0), sigma);

  const double tau1 = 2.0, tau2 = 2.0, mu1 = 4.0, mu2 = 6.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x = covariate_law.sample(rng);
    const double x1 = x(0);
    const double g1 = tau1 * std::exp(-0.5 * tau1 * tau1 * (x1 - mu1) * (x1 - mu1));
    const double g2 = tau2 * std::exp(-0.5 * tau2 * tau2 * (x1 - mu2) * (x1 - mu2));
    const double gate = g1 / (g1 + g2);
    double y;
    if (rng.uniform() < gate) {
      y = x1 + std::sqrt(1.0 / 16.0) * rng.normal();
    } else {
      y = 4.5 + 0.1 * x1 + std::sqrt(1.0 / 8.0) * rng.normal();
    }
    out.cont(i, 0) = y;
    for (int j = 0; j < p; ++j) out.cont(i, j + 1) = x(j);
  }
  return out;
}

}  // namespace

ExampleId parse_example_id(const std::string& name) {
  if (name == "A" || name == "a") return ExampleId::A;
  if (name == "B" || name == "b") return ExampleId::B;
  if (name == "C1" || name == "c1") return ExampleId::C1;
  if (name == "C2" || name == "c2") return ExampleId::C2;
  if (name == "D" || name == "d") return ExampleId::D;
  throw ArgumentError("unknown example '" + name + "' (expected A, B, C1, C2 or D)");
}

std::string example_name(ExampleId id) {
  switch (id) {
    case ExampleId::A: return "A";
    case ExampleId::B: return "B";
    case ExampleId::C1: return "C1";
    case ExampleId::C2: return "C2";
    case ExampleId::D: return "D";
  }
  throw ArgumentError("unreachable example id");
}

int example_default_n(ExampleId id) {
  switch (id) {
    case ExampleId::A: return 600;
    case ExampleId::B: return 600;
    case ExampleId::C1: return 800;
    case ExampleId::C2: return 800;
    case ExampleId::D: return 1000;
  }
  throw ArgumentError("unreachable example id");
}

MixedDataset simulate_example(ExampleId id, int n, std::uint64_t seed) {
  if (n < 10) throw ArgumentError("simulate_example: n must be at least 10");
  Rng rng(seed);
  switch (id) {
    case ExampleId::A: return simulate_a(n, rng);
    case ExampleId::B: return simulate_b(n, rng);
    case ExampleId::C1: return simulate_c(n, rng, false);
    case ExampleId::C2: return simulate_c(n, rng, true);
    case ExampleId::D: return simulate_d(n, rng);
  }
  throw ArgumentError("unreachable example id");
}

}  // namespace underlap
