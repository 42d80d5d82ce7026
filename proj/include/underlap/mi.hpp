#pragma once

#include <cstdint>
#include <vector>

#include "underlap/density.hpp"

namespace underlap {

// Group densities paired with their prevalences; the joint law of (Z, X) is
// p(k, x) = priors[k] * f_k(x).
struct LabeledMixture {
  Eigen::VectorXd priors;
  std::vector<DensityModel> groups;
};

// Shannon entropy of a label distribution, in nats; 0 log 0 := 0.
double entropy_labels(const Eigen::VectorXd& priors);

// Monte Carlo estimate of I(Z; X) = E[log f_z(x) - log p_X(x)] over
// (z, x) ~ joint, with p_X = sum_k priors[k] f_k. Nats. The value is clipped
// below at 0; stderr is the plain sample standard error of the averaged terms.
struct MiEstimate {
  double value = 0.0;   // clipped at 0
  double stderr_ = 0.0;
  int m = 0;
};
MiEstimate mutual_information_estimate(const LabeledMixture& model, int m, std::uint64_t seed);
double mutual_information(const LabeledMixture& model, int m, std::uint64_t seed);

// MI_Z = mi / H(Z), clamped to [0, 1 + 1e-6]. Degenerate priors (H = 0) are
// rejected.
double normalized_mi_z(double mi, const Eigen::VectorXd& priors);

// The two three-group unit-variance families behind the UNL-vs-MI_Z curves:
// symmetric_pair has means (-D, 0, D); fixed_first pins the first two groups
// at (-0.1, 0) and moves the third to D.
enum class CurveFamily { symmetric_pair, fixed_first };

struct CurvePoint {
  double d = 0.0;
  double unl = 0.0;
  double unl_stderr_bound = 0.0;  // sqrt(variance_bound) at the estimated UNL
  double mi_z = 0.0;
};

// One (UNL, MI_Z) pair per grid value of D, with priors as given. Grid points
// get derived seeds and may run under OpenMP (threads > 1); results are
// independent of thread count.
std::vector<CurvePoint> mi_unl_curve(CurveFamily family, const Eigen::VectorXd& priors,
                                     const std::vector<double>& d_grid, int m,
                                     std::uint64_t master_seed, int threads = 1);

// Group means for one curve family at displacement d (exposed for tests and
// for the oracle-side evaluation of the same scenarios).
std::vector<double> curve_family_means(CurveFamily family, double d);

}  // namespace underlap
