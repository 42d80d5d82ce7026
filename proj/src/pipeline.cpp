#include "underlap/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "underlap/errors.hpp"
#include "underlap/rng.hpp"

namespace underlap {

const char* const kReportSchemaVersion = "1.0";

namespace {

using Json = nlohmann::json;

// Re-throws module errors with the pipeline stage prepended, preserving the
// error type so callers can still dispatch on it.
template <typename Fn>
auto run_stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ShapeError& e) {
    throw ShapeError("stage " + name + ": " + e.what());
  } catch (const ArgumentError& e) {
    throw ArgumentError("stage " + name + ": " + e.what());
  } catch (const CapacityError& e) {
    throw CapacityError("stage " + name + ": " + e.what());
  } catch (const PreconditionError& e) {
    throw PreconditionError("stage " + name + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError("stage " + name + ": " + e.what());
  }
}


// Type-7 (linear interpolation) quantile of a copy of the values.
double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ArgumentError("quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double h = q * (static_cast<double>(values.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = h - std::floor(h);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s2 = 0.0;
  for (double x : v) s2 += (x - m) * (x - m);
  return std::sqrt(s2 / (static_cast<double>(v.size()) - 1.0));
}

// Central-moment skewness and plain (non-excess) kurtosis.
double skewness_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double m2 = 0.0, m3 = 0.0;
  for (double x : v) {
    const double d = x - m;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= static_cast<double>(v.size());
  m3 /= static_cast<double>(v.size());
  return m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
}

double kurtosis_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d = x - m;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= static_cast<double>(v.size());
  m4 /= static_cast<double>(v.size());
  return m2 > 0.0 ? m4 / (m2 * m2) : 0.0;
}

std::vector<std::string> non_response_columns(const MixedDataset& data,
                                              const std::vector<std::string>& response) {
  std::vector<std::string> out;
  for (const auto& name : data.names) {
    if (std::find(response.begin(), response.end(), name) == response.end()) {
      out.push_back(name);
    }
  }
  return out;
}

std::string joined(const std::vector<std::string>& cols, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i > 0) out += sep;
    out += cols[i];
  }
  return out;
}

// Expands/validates the UNL target list against the covariate pool. Default:
// the joint set, plus each single covariate when there are several.
std::vector<UnlTargetSpec> resolve_targets(const std::vector<std::string>& covariates,
                                           const std::vector<UnlTargetSpec>& requested) {
  std::vector<UnlTargetSpec> targets;
  if (requested.empty()) {
    targets.push_back({"joint", covariates});
    if (covariates.size() > 1) {
      for (const auto& c : covariates) targets.push_back({c, {c}});
    }
  } else {
    targets = requested;
    for (auto& t : targets) {
      if (t.columns.empty()) throw ArgumentError("unl target with no columns");
      std::set<std::string> seen;
      for (const auto& c : t.columns) {
        if (std::find(covariates.begin(), covariates.end(), c) == covariates.end()) {
          throw ArgumentError("unl target column '" + c + "' is not a covariate");
        }
        if (!seen.insert(c).second) {
          throw ArgumentError("unl target lists column '" + c + "' twice");
        }
      }
      if (t.name.empty()) t.name = joined(t.columns, "+");
    }
  }
  return targets;
}

// Positions of the named columns inside the covariate dataset's support
// signature (continuous block first, then categorical), sorted ascending as
// marginalize requires.
std::vector<int> signature_indices(const MixedDataset& cov, const std::vector<std::string>& cols) {
  std::vector<int> keep;
  keep.reserve(cols.size());
  for (const auto& name : cols) {
    const int c = cov.column(name);
    const int b = cov.block_pos[static_cast<std::size_t>(c)];
    keep.push_back(cov.kinds[static_cast<std::size_t>(c)] == ColumnKind::continuous
                       ? b
                       : cov.p_cont() + b);
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

// Wall-clock seconds stay out of the document so identical config and seed
// reproduce it byte for byte; the timestamp is the one sanctioned exception.
Json fit_report_json(const FitReport& report) {
  return {{"sweeps", report.sweeps},
          {"repairs", report.repairs},
          {"warnings", report.warnings}};
}

Json dataset_json(const MixedDataset& data) {
  Json columns = Json::array();
  for (int c = 0; c < data.n_cols(); ++c) {
    Json col = {{"name", data.names[static_cast<std::size_t>(c)]}};
    if (data.kinds[static_cast<std::size_t>(c)] == ColumnKind::continuous) {
      col["kind"] = "continuous";
    } else {
      col["kind"] = "categorical";
      col["levels"] = data.levels[static_cast<std::size_t>(data.block_pos[static_cast<std::size_t>(c)])];
    }
    columns.push_back(col);
  }
  return {{"n", data.n()}, {"dropped_rows", data.dropped_rows}, {"columns", columns}};
}

Json partition_json(const Partition& partition, double score, int source_draw) {
  std::vector<int> sizes(static_cast<std::size_t>(partition.k), 0);
  Json labels = Json::array();
  for (int zi : partition.labels) {
    ++sizes[static_cast<std::size_t>(zi)];
    labels.push_back(zi + 1);
  }
  return {{"k", partition.k},
          {"sizes", sizes},
          {"score_bits", score},
          {"source_draw", source_draw + 1},
          {"labels", labels}};
}

Json dpm_config_json(const DpmConfig& cfg) {
  return {{"truncation", cfg.truncation}, {"a_alpha", cfg.a_alpha}, {"b_alpha", cfg.b_alpha},
          {"tau_k", cfg.tau_k},           {"kmeans_k", cfg.kmeans_k}, {"n_iter", cfg.n_iter},
          {"n_burn", cfg.n_burn}};
}

Json lddp_config_json(const LddpConfig& cfg) {
  return {{"truncation", cfg.truncation},
          {"a_alpha", cfg.a_alpha},
          {"b_alpha", cfg.b_alpha},
          {"n_iter", cfg.n_iter},
          {"n_burn", cfg.n_burn}};
}

// Shared tail of both pipelines: per-cluster covariate density fits, then one
// UNL posterior per target (marginalizing when the target is a strict
// subset). Appends to the report and the result in place.
void covariate_unl_stages(const MixedDataset& data, const std::vector<std::string>& covariates,
                          const std::vector<UnlTargetSpec>& targets, const DpmConfig& fit_cfg,
                          int m, std::uint64_t master_seed, int threads, PipelineResult* result,
                          Json* report) {
  if (result->partition.k < 2) {
    (*report)["notices"].push_back("K=1, UNL undefined for one group");
    (*report)["unl"] = Json::array();
    return;
  }

  const MixedDataset cov = run_stage("select-covariates",
                                     [&] { return data.select_columns(covariates); });
  std::vector<FitReport> cluster_reports;
  const std::vector<std::vector<DensityModel>> models =
      run_stage("covariate-densities", [&] {
        return cluster_covariate_densities(result->partition, cov, fit_cfg,
                                           split_seed(master_seed, 2), threads, &cluster_reports);
      });
  Json cluster_json = Json::array();
  for (std::size_t k = 0; k < cluster_reports.size(); ++k) {
    Json entry = fit_report_json(cluster_reports[k]);
    entry["cluster"] = static_cast<int>(k) + 1;
    cluster_json.push_back(entry);
  }
  (*report)["cluster_fit_reports"] = cluster_json;

  const std::vector<int> full_keep = signature_indices(cov, covariates);
  Json unl_json = Json::array();
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const UnlTargetSpec& spec = targets[t];
    const std::vector<int> keep = signature_indices(cov, spec.columns);
    UnlTargetResult target;
    target.spec = spec;
    target.k_groups = result->partition.k;
    target.posterior = run_stage("unl[" + spec.name + "]", [&] {
      if (keep == full_keep) {
        return estimate_unl_posterior(models, m,
                                      split_seed(master_seed, 100 + static_cast<std::uint64_t>(t)),
                                      threads);
      }
      std::vector<std::vector<DensityModel>> subset;
      subset.reserve(models.size());
      for (const auto& row : models) {
        std::vector<DensityModel> sub_row;
        sub_row.reserve(row.size());
        for (const auto& model : row) sub_row.push_back(marginalize(model, keep));
        subset.push_back(std::move(sub_row));
      }
      return estimate_unl_posterior(subset, m,
                                    split_seed(master_seed, 100 + static_cast<std::uint64_t>(t)),
                                    threads);
    });

    Json block = unl_posterior_summary(target.posterior, target.k_groups, m);
    block["name"] = spec.name;
    block["columns"] = spec.columns;
    unl_json.push_back(block);
    result->targets.push_back(std::move(target));
  }
  (*report)["unl"] = unl_json;
}

std::vector<double> column_values(const MixedDataset& data, const std::string& name) {
  const int c = data.column(name);
  const int b = data.block_pos[static_cast<std::size_t>(c)];
  std::vector<double> values(static_cast<std::size_t>(data.n()));
  for (int i = 0; i < data.n(); ++i) {
    values[static_cast<std::size_t>(i)] =
        data.kinds[static_cast<std::size_t>(c)] == ColumnKind::continuous
            ? data.cont(i, b)
            : static_cast<double>(data.cat(i, b));
  }
  return values;
}

void validate_ppc_config(const PpcConfig& cfg) {
  if (cfg.n_rep < 1) throw ArgumentError("ppc: n_rep must be at least 1");
  for (std::size_t i = 0; i < cfg.quantile_cutoffs.size(); ++i) {
    const double q = cfg.quantile_cutoffs[i];
    if (!(q > 0.0 && q < 1.0)) throw ArgumentError("ppc: quantile cutoffs must lie in (0, 1)");
    if (i > 0 && q <= cfg.quantile_cutoffs[i - 1]) {
      throw ArgumentError("ppc: quantile cutoffs must be strictly increasing");
    }
  }
}

Json run_ppc(const MixedDataset& data, const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
             const LddpDraws& draws, const PpcConfig& cfg, std::uint64_t seed) {
  validate_ppc_config(cfg);
  const std::string cond = cfg.condition_on;
  const std::vector<double> cond_values = column_values(data, cond);

  const Eigen::MatrixXd reps = lddp_posterior_predictive(draws, x, cfg.n_rep, seed);
  const int n = static_cast<int>(x.rows());

  std::vector<double> y_obs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) y_obs[static_cast<std::size_t>(i)] = y(i);

  Json rep_stats = {{"sd", Json::array()},
                    {"skewness", Json::array()},
                    {"kurtosis", Json::array()},
                    {"max", Json::array()}};
  std::vector<double> rep_row(static_cast<std::size_t>(n));
  for (int r = 0; r < cfg.n_rep; ++r) {
    for (int i = 0; i < n; ++i) rep_row[static_cast<std::size_t>(i)] = reps(r, i);
    rep_stats["sd"].push_back(sd_of(rep_row));
    rep_stats["skewness"].push_back(skewness_of(rep_row));
    rep_stats["kurtosis"].push_back(kurtosis_of(rep_row));
    rep_stats["max"].push_back(*std::max_element(rep_row.begin(), rep_row.end()));
  }

  std::vector<double> cuts;
  for (double q : cfg.quantile_cutoffs) cuts.push_back(quantile(cond_values, q));

  Json intervals = Json::array();
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b <= cuts.size(); ++b) {
    const double lo = b == 0 ? -inf : cuts[b - 1];
    const double hi = b == cuts.size() ? inf : cuts[b];
    Json observed_y = Json::array();
    Json replicate_y = Json::array();
    int n_bin = 0;
    for (int i = 0; i < n; ++i) {
      const double v = cond_values[static_cast<std::size_t>(i)];
      if (v > lo && v <= hi) {
        ++n_bin;
        observed_y.push_back(y(i));
        for (int r = 0; r < cfg.n_rep; ++r) replicate_y.push_back(reps(r, i));
      }
    }
    Json interval = {{"n_obs", n_bin},
                     {"observed_y", observed_y},
                     {"replicate_y", replicate_y}};
    if (std::isfinite(lo)) interval["lo"] = lo;
    if (std::isfinite(hi)) interval["hi"] = hi;
    intervals.push_back(interval);
  }

  return {{"n_rep", cfg.n_rep},
          {"condition_on", cond},
          {"quantile_cutoffs", cfg.quantile_cutoffs},
          {"cutoff_values", cuts},
          {"observed",
           {{"sd", sd_of(y_obs)},
            {"skewness", skewness_of(y_obs)},
            {"kurtosis", kurtosis_of(y_obs)},
            {"max", *std::max_element(y_obs.begin(), y_obs.end())}}},
          {"replicates", rep_stats},
          {"intervals", intervals}};
}

}  // namespace

Json unl_posterior_summary(const UnlPosterior& posterior, int k_groups, int m) {
  std::vector<double> values;
  Json draws = Json::array(), ess = Json::array(), weight_max = Json::array(),
       bound = Json::array();
  for (const auto& d : posterior.draws) {
    values.push_back(d.value);
    draws.push_back(d.value);
    ess.push_back(d.ess);
    weight_max.push_back(d.weight_max);
    bound.push_back(variance_bound(k_groups, d.value, d.m));
  }
  const double mean = mean_of(values);
  return {{"k_groups", k_groups},
          {"m", m},
          {"n_draws", static_cast<int>(values.size())},
          {"mean", mean},
          {"sd", sd_of(values)},
          {"q025", quantile(values, 0.025)},
          {"q500", quantile(values, 0.5)},
          {"q975", quantile(values, 0.975)},
          {"stderr_bound_at_mean", std::sqrt(variance_bound(k_groups, mean, m))},
          {"draws", draws},
          {"ess", ess},
          {"weight_max", weight_max},
          {"variance_bound", bound}};
}

Eigen::MatrixXd build_design_matrix(const MixedDataset& data,
                                    const std::vector<std::string>& regressors) {
  if (regressors.empty()) throw ArgumentError("build_design_matrix: no regressors");
  const int n = data.n();
  Eigen::MatrixXd x(n, static_cast<int>(regressors.size()) + 1);
  x.col(0).setOnes();
  for (std::size_t j = 0; j < regressors.size(); ++j) {
    const std::vector<double> values = column_values(data, regressors[j]);
    for (int i = 0; i < n; ++i) x(i, static_cast<int>(j) + 1) = values[static_cast<std::size_t>(i)];
  }
  return x;
}

PipelineResult run_marginal_pipeline(const MixedDataset& data,
                                     const MarginalPipelineConfig& cfg) {
  if (cfg.response.empty()) throw ArgumentError("marginal pipeline: no response columns");
  if (cfg.m < 1) throw ArgumentError("marginal pipeline: m must be at least 1");
  if (cfg.threads < 1) throw ArgumentError("marginal pipeline: threads must be at least 1");
  for (const auto& r : cfg.response) data.column(r);
  const std::vector<std::string> covariates =
      cfg.covariates.empty() ? non_response_columns(data, cfg.response) : cfg.covariates;
  if (covariates.empty()) throw ArgumentError("marginal pipeline: no covariate columns");
  for (const auto& c : covariates) {
    data.column(c);
    if (std::find(cfg.response.begin(), cfg.response.end(), c) != cfg.response.end()) {
      throw ArgumentError("marginal pipeline: column '" + c +
                          "' appears as both response and covariate");
    }
  }
  const std::vector<UnlTargetSpec> targets = resolve_targets(covariates, cfg.subsets);

  PipelineResult result;
  Json report;
  report["schema_version"] = kReportSchemaVersion;
  report["kind"] = "marginal-pipeline";
  report["generated_at"] = report_timestamp_utc();
  report["data"] = dataset_json(data);
  report["config"] = {{"response", cfg.response},
                      {"covariates", covariates},
                      {"response_fit", dpm_config_json(cfg.response_fit)},
                      {"covariate_fit", dpm_config_json(cfg.covariate_fit)},
                      {"m", cfg.m},
                      {"seed", cfg.seed},
                      {"threads", cfg.threads}};
  report["notices"] = Json::array();

  const MixedDataset response_ds =
      run_stage("select-response", [&] { return data.select_columns(cfg.response); });
  const DpmHyperparams hp = run_stage("derive-dpm", [&] {
    return derive_dpm_hyperparams(response_ds, cfg.response_fit.kmeans_k, split_seed(cfg.seed, 0),
                                  cfg.response_fit.tau_k);
  });
  DpmConfig fit_cfg = cfg.response_fit;
  fit_cfg.seed = split_seed(cfg.seed, 1);
  const DpmDraws draws = run_stage("fit-dpm", [&] { return fit_dpm(response_ds, hp, fit_cfg); });
  report["response_fit_report"] = fit_report_json(draws.report);
  report["response_fit_report"]["hyperparam_ridge_repairs"] = hp.ridge_repairs;
  report["response_fit_report"]["kmeans_reseeds"] = hp.kmeans_reseeds;

  const RepresentativeResult rep = run_stage("summarize-partition", [&] {
    const std::vector<std::vector<int>> allocations = draws.allocations();
    const Eigen::MatrixXd psm = similarity_matrix(allocations);
    return representative_partition(allocations, psm, cfg.threads);
  });
  result.partition = rep.partition;
  result.partition_score = rep.score;
  result.source_draw = rep.source_draw;
  report["partition"] = partition_json(rep.partition, rep.score, rep.source_draw);

  covariate_unl_stages(data, covariates, targets, cfg.covariate_fit, cfg.m, cfg.seed, cfg.threads,
                       &result, &report);
  result.report = std::move(report);
  return result;
}

PipelineResult run_conditional_pipeline(const MixedDataset& data,
                                        const ConditionalPipelineConfig& cfg) {
  if (cfg.response.empty()) throw ArgumentError("conditional pipeline: no response column");
  if (cfg.m < 1) throw ArgumentError("conditional pipeline: m must be at least 1");
  if (cfg.threads < 1) throw ArgumentError("conditional pipeline: threads must be at least 1");
  const int response_col = data.column(cfg.response);
  if (data.kinds[static_cast<std::size_t>(response_col)] != ColumnKind::continuous) {
    throw ArgumentError("conditional pipeline: response '" + cfg.response +
                        "' must be continuous");
  }
  const std::vector<std::string> regressors =
      cfg.regressors.empty() ? non_response_columns(data, {cfg.response}) : cfg.regressors;
  if (regressors.empty()) throw ArgumentError("conditional pipeline: no regressors");
  for (const auto& r : regressors) {
    data.column(r);
    if (r == cfg.response) {
      throw ArgumentError("conditional pipeline: response cannot be a regressor");
    }
  }
  const std::vector<std::string> covariates =
      cfg.covariates.empty() ? regressors : cfg.covariates;
  for (const auto& c : covariates) {
    data.column(c);
    if (c == cfg.response) {
      throw ArgumentError("conditional pipeline: response cannot be a covariate");
    }
  }
  const std::vector<UnlTargetSpec> targets = resolve_targets(covariates, cfg.subsets);
  PpcConfig ppc_cfg = cfg.ppc;
  if (ppc_cfg.enabled) {
    validate_ppc_config(ppc_cfg);
    if (ppc_cfg.condition_on.empty()) ppc_cfg.condition_on = regressors.front();
    data.column(ppc_cfg.condition_on);
  }

  PipelineResult result;
  Json report;
  report["schema_version"] = kReportSchemaVersion;
  report["kind"] = "conditional-pipeline";
  report["generated_at"] = report_timestamp_utc();
  report["data"] = dataset_json(data);
  report["config"] = {{"response", cfg.response},
                      {"regressors", regressors},
                      {"covariates", covariates},
                      {"response_fit", lddp_config_json(cfg.response_fit)},
                      {"covariate_fit", dpm_config_json(cfg.covariate_fit)},
                      {"m", cfg.m},
                      {"seed", cfg.seed},
                      {"threads", cfg.threads}};
  report["notices"] = Json::array();

  const int b = data.block_pos[static_cast<std::size_t>(response_col)];
  const Eigen::VectorXd y = data.cont.col(b);
  const Eigen::MatrixXd x =
      run_stage("build-design", [&] { return build_design_matrix(data, regressors); });
  const LddpHyperparams hp =
      run_stage("derive-lddp", [&] { return derive_lddp_hyperparams(y, x); });
  LddpConfig fit_cfg = cfg.response_fit;
  fit_cfg.seed = split_seed(cfg.seed, 1);
  const LddpDraws draws = run_stage("fit-lddp", [&] { return fit_lddp(y, x, hp, fit_cfg); });
  report["response_fit_report"] = fit_report_json(draws.report);
  report["response_fit_report"]["ridge_repairs"] = hp.ridge_repairs;
  report["response_fit_report"]["b_floored"] = hp.b_floored;

  const RepresentativeResult rep = run_stage("summarize-partition", [&] {
    const std::vector<std::vector<int>> allocations = draws.allocations();
    const Eigen::MatrixXd psm = similarity_matrix(allocations);
    return representative_partition(allocations, psm, cfg.threads);
  });
  result.partition = rep.partition;
  result.partition_score = rep.score;
  result.source_draw = rep.source_draw;
  report["partition"] = partition_json(rep.partition, rep.score, rep.source_draw);

  covariate_unl_stages(data, covariates, targets, cfg.covariate_fit, cfg.m, cfg.seed, cfg.threads,
                       &result, &report);

  if (ppc_cfg.enabled) {
    report["ppc"] = run_stage(
        "ppc", [&] { return run_ppc(data, y, x, draws, ppc_cfg, split_seed(cfg.seed, 3)); });
  }
  result.report = std::move(report);
  return result;
}

std::string report_timestamp_utc() {
  const std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

Json posterior_predictive_check(const MixedDataset& data, const std::string& response,
                                const std::vector<std::string>& regressors,
                                const LddpDraws& draws, const PpcConfig& cfg,
                                std::uint64_t seed) {
  const int response_col = data.column(response);
  if (data.kinds[static_cast<std::size_t>(response_col)] != ColumnKind::continuous) {
    throw ArgumentError("ppc: response '" + response + "' must be continuous");
  }
  const std::vector<std::string> regs =
      regressors.empty() ? non_response_columns(data, {response}) : regressors;
  if (regs.empty()) throw ArgumentError("ppc: no regressors");
  for (const auto& r : regs) {
    data.column(r);
    if (r == response) throw ArgumentError("ppc: response cannot be a regressor");
  }
  PpcConfig ppc_cfg = cfg;
  validate_ppc_config(ppc_cfg);
  if (ppc_cfg.condition_on.empty()) ppc_cfg.condition_on = regs.front();
  data.column(ppc_cfg.condition_on);

  const int b = data.block_pos[static_cast<std::size_t>(response_col)];
  const Eigen::VectorXd y = data.cont.col(b);
  const Eigen::MatrixXd x = build_design_matrix(data, regs);
  return run_ppc(data, y, x, draws, ppc_cfg, seed);
}

void write_report_json(const Json& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("write_report_json: cannot open '" + path + "'");
  out << report.dump(2) << '\n';
  if (!out) throw ArgumentError("write_report_json: write to '" + path + "' failed");
}

void write_partition_csv(const Partition& partition, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("write_partition_csv: cannot open '" + path + "'");
  out << "row,label\n";
  for (std::size_t i = 0; i < partition.labels.size(); ++i) {
    out << (i + 1) << ',' << (partition.labels[i] + 1) << '\n';
  }
  if (!out) throw ArgumentError("write_partition_csv: write to '" + path + "' failed");
}

void write_unl_draws_csv(const UnlPosterior& posterior, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("write_unl_draws_csv: cannot open '" + path + "'");
  out << "s,value,ess,weight_max\n";
  char buf[96];
  for (std::size_t s = 0; s < posterior.draws.size(); ++s) {
    const UnlEstimate& d = posterior.draws[s];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", s + 1, d.value, d.ess,
                  d.weight_max);
    out << buf;
  }
  if (!out) throw ArgumentError("write_unl_draws_csv: write to '" + path + "' failed");
}

void write_similarity_csv(const Eigen::MatrixXd& psm, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("write_similarity_csv: cannot open '" + path + "'");
  char buf[32];
  for (int i = 0; i < psm.rows(); ++i) {
    for (int j = 0; j < psm.cols(); ++j) {
      if (j > 0) out << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", psm(i, j));
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw ArgumentError("write_similarity_csv: write to '" + path + "' failed");
}

}  // namespace underlap
