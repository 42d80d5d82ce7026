#include "underlap/mi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "underlap/errors.hpp"
#include "underlap/unl.hpp"

namespace underlap {

namespace {

void check_priors(const Eigen::VectorXd& priors) {
  if (priors.size() == 0) throw ArgumentError("priors: empty vector");
  if ((priors.array() < 0.0).any()) throw ArgumentError("priors: negative entry");
  if (std::abs(priors.sum() - 1.0) > 1e-9)
    throw ArgumentError("priors: must sum to 1");
}

}  // namespace

double entropy_labels(const Eigen::VectorXd& priors) {
  check_priors(priors);
  double h = 0.0;
  for (Eigen::Index k = 0; k < priors.size(); ++k)
    if (priors[k] > 0.0) h -= priors[k] * std::log(priors[k]);
  return h;
}

MiEstimate mutual_information_estimate(const LabeledMixture& model, int m, std::uint64_t seed) {
  check_priors(model.priors);
  if (m < 1) throw ArgumentError("mutual_information: m must be >= 1");
  const int k_groups = static_cast<int>(model.groups.size());
  if (k_groups != model.priors.size())
    throw ShapeError("mutual_information: priors/groups length mismatch");
  const SupportSignature sig = model.groups.front().signature();
  for (const auto& g : model.groups)
    if (!(g.signature() == sig))
      throw ShapeError("mutual_information: groups disagree on support signature");

  // Accumulated in the same loop order as the shifted mixture sum below so
  // that identical groups make s == prior_sum bitwise and every term exactly
  // zero.
  double prior_sum = 0.0;
  for (int k = 0; k < k_groups; ++k) prior_sum += model.priors[k];

  Rng rng(seed);
  Eigen::VectorXd logf(k_groups);
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < m; ++i) {
    const int z = rng.categorical(model.priors);
    const MixedPoint x = sample_point(model.groups[z], rng);
    for (int k = 0; k < k_groups; ++k) logf[k] = log_density(model.groups[k], x);
    const double mx = logf.maxCoeff();
    double s = 0.0;
    for (int k = 0; k < k_groups; ++k) s += model.priors[k] * std::exp(logf[k] - mx);
    // log f_z - log p_X with p_X = sum_k prior_k f_k, shifted by max_k log f_k.
    const double t = (logf[z] - mx) - std::log(s / prior_sum);
    sum += t;
    sum2 += t * t;
  }

  MiEstimate est;
  const double mean = sum / m;
  const double var = std::max(0.0, sum2 / m - mean * mean);
  est.value = std::max(0.0, mean);
  est.stderr_ = std::sqrt(var / m);
  est.m = m;
  return est;
}

double mutual_information(const LabeledMixture& model, int m, std::uint64_t seed) {
  return mutual_information_estimate(model, m, seed).value;
}

double normalized_mi_z(double mi, const Eigen::VectorXd& priors) {
  const double h = entropy_labels(priors);
  if (h <= 0.0) throw ArgumentError("normalized_mi_z: degenerate priors (H(Z) = 0)");
  return std::clamp(mi / h, 0.0, 1.0 + 1e-6);
}

std::vector<double> curve_family_means(CurveFamily family, double d) {
  switch (family) {
    case CurveFamily::symmetric_pair:
      return {-d, 0.0, d};
    case CurveFamily::fixed_first:
      return {-0.1, 0.0, d};
  }
  throw ArgumentError("curve_family_means: unknown family");
}

std::vector<CurvePoint> mi_unl_curve(CurveFamily family, const Eigen::VectorXd& priors,
                                     const std::vector<double>& d_grid, int m,
                                     std::uint64_t master_seed, int threads) {
  check_priors(priors);
  if (priors.size() != 3) throw ArgumentError("mi_unl_curve: the curve families have 3 groups");
  if (d_grid.empty()) throw ArgumentError("mi_unl_curve: empty grid");
  if (m < 1) throw ArgumentError("mi_unl_curve: m must be >= 1");

  const int n = static_cast<int>(d_grid.size());
  std::vector<CurvePoint> out(n);

  auto eval_point = [&](int i) {
    const std::vector<double> means = curve_family_means(family, d_grid[i]);
    std::vector<DensityModel> groups;
    groups.reserve(3);
    for (double mu : means)
      groups.emplace_back(Gaussian(Eigen::VectorXd::Constant(1, mu),
                                   Eigen::MatrixXd::Identity(1, 1)));
    const UnlEstimate unl = estimate_unl(groups, m, split_seed(master_seed, 2 * i));
    const MiEstimate mi =
        mutual_information_estimate({priors, groups}, m, split_seed(master_seed, 2 * i + 1));
    CurvePoint pt;
    pt.d = d_grid[i];
    pt.unl = unl.value;
    pt.unl_stderr_bound = std::sqrt(variance_bound(3, unl.value, m));
    pt.mi_z = normalized_mi_z(mi.value, priors);
    out[i] = pt;
  };

  if (threads <= 1) {
    for (int i = 0; i < n; ++i) eval_point(i);
  } else {
#ifdef UNDERLAP_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int i = 0; i < n; ++i) eval_point(i);
#else
    for (int i = 0; i < n; ++i) eval_point(i);
#endif
  }
  return out;
}

}  // namespace underlap
