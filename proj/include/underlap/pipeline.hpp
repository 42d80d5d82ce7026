#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "underlap/dataset.hpp"
#include "underlap/mixtures.hpp"
#include "underlap/partitions.hpp"
#include "underlap/unl.hpp"

namespace underlap {

// One UNL diagnostic target: a named subset of the covariate columns.
struct UnlTargetSpec {
  std::string name;
  std::vector<std::string> columns;
};

// Marginal workflow: cluster on the response alone, then measure how far the
// covariate distributions separate across the induced clusters.
struct MarginalPipelineConfig {
  std::vector<std::string> response;
  std::vector<std::string> covariates;  // empty selects every non-response column
  std::vector<UnlTargetSpec> subsets;   // empty selects the joint set plus each single covariate
  DpmConfig response_fit;               // seeds are derived from `seed`, not taken from here
  DpmConfig covariate_fit;
  int m = 5000;
  std::uint64_t seed = 0;
  int threads = 1;
};

// Posterior predictive checking block for the conditional workflow.
struct PpcConfig {
  bool enabled = false;
  int n_rep = 200;
  std::string condition_on;  // empty selects the first regressor
  std::vector<double> quantile_cutoffs = {0.25, 0.5, 0.75};
};

// Conditional workflow: a single-weights regression mixture on (y | x), then
// the same covariate-separation diagnostics on the induced partition.
struct ConditionalPipelineConfig {
  std::string response;
  std::vector<std::string> regressors;  // design columns; empty selects every non-response column
  std::vector<std::string> covariates;  // diagnostic pool; empty selects the regressors
  std::vector<UnlTargetSpec> subsets;
  LddpConfig response_fit;
  DpmConfig covariate_fit;
  PpcConfig ppc;
  int m = 5000;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct UnlTargetResult {
  UnlTargetSpec spec;
  int k_groups = 0;
  UnlPosterior posterior;
};

struct PipelineResult {
  Partition partition;
  double partition_score = 0.0;
  int source_draw = 0;
  std::vector<UnlTargetResult> targets;
  nlohmann::json report;  // the full report document the CLI writes out
};

PipelineResult run_marginal_pipeline(const MixedDataset& data, const MarginalPipelineConfig& cfg);
PipelineResult run_conditional_pipeline(const MixedDataset& data,
                                        const ConditionalPipelineConfig& cfg);

// Design matrix for the conditional fit: an intercept column followed by the
// named columns, categorical ones entering as their 0-based codes.
Eigen::MatrixXd build_design_matrix(const MixedDataset& data,
                                    const std::vector<std::string>& regressors);

// Summary block (mean, sd, quantiles, per-draw diagnostics) for a UNL
// posterior; shared by reports and the CLI.
nlohmann::json unl_posterior_summary(const UnlPosterior& posterior, int k_groups, int m);

// Posterior predictive check statistics for an already fitted conditional
// model. Builds the response vector and design matrix from the named columns;
// empty regressors select every non-response column.
nlohmann::json posterior_predictive_check(const MixedDataset& data, const std::string& response,
                                          const std::vector<std::string>& regressors,
                                          const LddpDraws& draws, const PpcConfig& cfg,
                                          std::uint64_t seed);

// UTC wall-clock stamp for report documents, the one field exempt from the
// byte-identical reproducibility rule.
std::string report_timestamp_utc();

// File emitters used by the CLI subcommands.
void write_report_json(const nlohmann::json& report, const std::string& path);
void write_partition_csv(const Partition& partition, const std::string& path);
void write_unl_draws_csv(const UnlPosterior& posterior, const std::string& path);
void write_similarity_csv(const Eigen::MatrixXd& psm, const std::string& path);

// Current report document version.
extern const char* const kReportSchemaVersion;

}  // namespace underlap
