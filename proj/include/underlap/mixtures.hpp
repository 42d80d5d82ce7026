#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "underlap/dataset.hpp"
#include "underlap/density.hpp"
#include "underlap/partitions.hpp"

namespace underlap {

// Configuration for the truncated Dirichlet process mixture sampler with a
// Gaussian x categorical product kernel.
struct DpmConfig {
  int truncation = 10;
  double a_alpha = 2.0;
  double b_alpha = 2.0;
  double tau_k = 10.0;  // Dirichlet pseudo-count for categorical blocks
  int kmeans_k = 5;     // clusters for hyperparameter derivation, in [3,10]
  int n_iter = 10000;
  int n_burn = 10000;
  std::uint64_t seed = 0;
};

struct DpmHyperparams {
  Eigen::VectorXd m0;  // empty when the data has no continuous block
  Eigen::MatrixXd L0;
  double nu0 = 0.0;
  Eigen::MatrixXd S0;
  std::vector<Eigen::VectorXd> eta;  // one Dirichlet parameter vector per categorical column
  int ridge_repairs = 0;             // diagonal repairs logged during derivation
  int kmeans_reseeds = 0;            // empty-centroid repairs in the K-means step
};

// One retained sweep of the DPM chain. Component vectors always have length
// L; continuous parameters are absent when the data has no continuous block,
// categorical ones when it has no categorical block.
struct DpmIteration {
  std::vector<int> z;  // 0-based component ids, one per row
  Eigen::VectorXd w;
  std::vector<Eigen::VectorXd> mu;
  std::vector<Eigen::MatrixXd> sigma;
  std::vector<std::vector<Eigen::VectorXd>> catp;  // [component][categorical column]
  double alpha = 0.0;
};

struct FitReport {
  int sweeps = 0;
  double seconds = 0.0;
  int repairs = 0;  // covariance draws that needed a diagonal ridge
  std::vector<std::string> warnings;
};

struct DpmDraws {
  SupportSignature sig;
  DpmConfig cfg;
  DpmHyperparams hp;
  std::vector<DpmIteration> iterations;
  FitReport report;

  // Allocation vectors of every retained iteration, for partition summaries.
  std::vector<std::vector<int>> allocations() const;
};

// Data-adaptive hyperparameters: m0 the continuous sample mean, L0 the
// covariance of seeded K-means centroids, nu0 = p+2, S0 matched to the
// average within-cluster covariance, eta = tau_k times empirical category
// proportions. Degenerate spread is ridge-repaired and logged.
DpmHyperparams derive_dpm_hyperparams(const MixedDataset& data, int kmeans_k, std::uint64_t seed,
                                      double tau_k = 10.0);

// Truncated blocked Gibbs sampler. Each sweep updates allocations, sticks,
// component parameters and the concentration in turn; post-burn-in sweeps
// are retained. Deterministic given cfg.seed.
DpmDraws fit_dpm(const MixedDataset& data, const DpmHyperparams& hp, const DpmConfig& cfg);

// The mixture over all L components encoded by one retained iteration.
DensityModel dpm_iteration_mixture(const DpmIteration& it, const SupportSignature& sig);

// Replicated datasets from the DPM posterior predictive: each replicate
// picks a retained iteration uniformly and draws n_rows fresh points from
// its mixture.
std::vector<std::vector<MixedPoint>> dpm_posterior_predictive(const DpmDraws& draws, int n_rows,
                                                              int n_rep, std::uint64_t seed);

// Configuration for the truncated single-weights mixture of linear
// regressions.
struct LddpConfig {
  int truncation = 20;
  double a_alpha = 2.0;
  double b_alpha = 2.0;
  int n_iter = 10000;
  int n_burn = 10000;
  std::uint64_t seed = 0;
};

struct LddpHyperparams {
  Eigen::VectorXd m0;  // length p including the intercept column
  Eigen::MatrixXd S0;
  double nu = 0.0;
  Eigen::MatrixXd psi;
  double a = 0.0;
  double b = 0.0;
  int ridge_repairs = 0;
  bool b_floored = false;  // set when a near-perfect fit forced the floor on b
};

struct LddpIteration {
  std::vector<int> z;
  Eigen::VectorXd w;
  Eigen::MatrixXd beta;  // L x p
  Eigen::VectorXd tau;   // length L
  double alpha = 0.0;
};

struct LddpDraws {
  int p = 0;
  LddpConfig cfg;
  LddpHyperparams hp;
  std::vector<LddpIteration> iterations;
  FitReport report;

  std::vector<std::vector<int>> allocations() const;
};

// OLS-anchored hyperparameters: m0 the OLS coefficients, S0 the scaled OLS
// coefficient covariance, nu = p+2, psi = 30 * S0, a = 2, b = half the
// residual variance (floored when the fit is exact). Rank deficiency is
// ridge-repaired and logged.
LddpHyperparams derive_lddp_hyperparams(const Eigen::VectorXd& y, const Eigen::MatrixXd& x);

// Blocked Gibbs for the regression mixture: allocations, sticks, component
// coefficients and precisions, the shared (mu, Sigma) base measure, and the
// concentration. Deterministic given cfg.seed.
LddpDraws fit_lddp(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const LddpHyperparams& hp,
                   const LddpConfig& cfg);

// Replicated response vectors at the given design rows: each replicate picks
// a retained iteration uniformly, then draws a component and a response per
// row. Row r of the result is replicate r.
Eigen::MatrixXd lddp_posterior_predictive(const LddpDraws& draws, const Eigen::MatrixXd& x_new,
                                          int n_rep, std::uint64_t seed);

// Fits one DPM per cluster of the partition on that cluster's covariate rows
// and returns the S x K matrix of per-iteration mixtures, ready for
// estimate_unl_posterior. Every cluster needs at least 5 members. Cluster
// fits are independent given derived seeds and may run in parallel.
std::vector<std::vector<DensityModel>> cluster_covariate_densities(
    const Partition& partition, const MixedDataset& covariates, const DpmConfig& cfg,
    std::uint64_t master_seed, int threads = 1, std::vector<FitReport>* reports = nullptr);

// Newline-delimited JSON round trip for posterior draws: a header object on
// the first line, then one iteration per line. Allocations serialize
// 1-based.
void dpm_draws_to_ndjson(const DpmDraws& draws, std::ostream& out);
DpmDraws dpm_draws_from_ndjson(std::istream& in);
void lddp_draws_to_ndjson(const LddpDraws& draws, std::ostream& out);
LddpDraws lddp_draws_from_ndjson(std::istream& in);

// Peeks at an NDJSON header and reports which sampler wrote it ("dpm" or
// "lddp").
std::string ndjson_kind(std::istream& in);

}  // namespace underlap
