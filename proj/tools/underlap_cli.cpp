// Command line front end: simulation, model fits, partition summaries and the
// two diagnostic pipelines, each reading one optional JSON config whose keys
// individual flags override. The only environment variable consulted is
// UNDERLAP_THREADS, which sets the default thread count.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "underlap/dataset.hpp"
#include "underlap/errors.hpp"
#include "underlap/mi.hpp"
#include "underlap/mixtures.hpp"
#include "underlap/partitions.hpp"
#include "underlap/pipeline.hpp"
#include "underlap/rng.hpp"
#include "underlap/simulate.hpp"
#include "underlap/unl.hpp"

namespace {

using Json = nlohmann::json;
using namespace underlap;

int env_threads() {
  const char* raw = std::getenv("UNDERLAP_THREADS");
  if (raw == nullptr) return 1;
  try {
    const int value = std::stoi(raw);
    if (value >= 1) return value;
  } catch (const std::exception&) {
  }
  std::cerr << "warning: ignoring UNDERLAP_THREADS='" << raw << "' (want a positive integer)\n";
  return 1;
}

Json load_config(const std::string& path) {
  if (path.empty()) return Json::object();
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open config file '" + path + "'");
  Json cfg;
  try {
    in >> cfg;
  } catch (const Json::parse_error& e) {
    throw ArgumentError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!cfg.is_object()) throw ArgumentError("config file '" + path + "' must hold a JSON object");
  return cfg;
}

// Sets *var from the config key when the flag was not passed on the command
// line; flags always win over the file.
template <typename T>
void from_config(const CLI::App& cmd, const std::string& flag, const Json& cfg,
                 const std::string& key, T* var) {
  if (cmd.count(flag) == 0 && cfg.contains(key)) {
    try {
      *var = cfg.at(key).get<T>();
    } catch (const Json::exception& e) {
      throw ArgumentError("config key '" + key + "': " + e.what());
    }
  }
}

// Swaps in the desk-scale default when neither the flag nor the config file
// pinned the value explicitly.
template <typename T>
void desk_default(const CLI::App& cmd, const std::string& flag, const Json& cfg,
                  const std::string& key, bool desk, T desk_value, T* var) {
  if (desk && cmd.count(flag) == 0 && !cfg.contains(key)) *var = desk_value;
}

// Inputs may arrive by flag or by config key, so requiredness is checked
// after both are merged.
void require_set(const std::string& value, const std::string& what) {
  if (value.empty()) throw ArgumentError(what + " is required (flag or config key)");
}

DpmConfig dpm_config_from(const Json& block, DpmConfig base) {
  if (block.is_null()) return base;
  if (!block.is_object()) throw ArgumentError("fit config block must be a JSON object");
  if (block.contains("truncation")) base.truncation = block.at("truncation").get<int>();
  if (block.contains("a_alpha")) base.a_alpha = block.at("a_alpha").get<double>();
  if (block.contains("b_alpha")) base.b_alpha = block.at("b_alpha").get<double>();
  if (block.contains("tau_k")) base.tau_k = block.at("tau_k").get<double>();
  if (block.contains("kmeans_k")) base.kmeans_k = block.at("kmeans_k").get<int>();
  if (block.contains("n_iter")) base.n_iter = block.at("n_iter").get<int>();
  if (block.contains("n_burn")) base.n_burn = block.at("n_burn").get<int>();
  return base;
}

LddpConfig lddp_config_from(const Json& block, LddpConfig base) {
  if (block.is_null()) return base;
  if (!block.is_object()) throw ArgumentError("fit config block must be a JSON object");
  if (block.contains("truncation")) base.truncation = block.at("truncation").get<int>();
  if (block.contains("a_alpha")) base.a_alpha = block.at("a_alpha").get<double>();
  if (block.contains("b_alpha")) base.b_alpha = block.at("b_alpha").get<double>();
  if (block.contains("n_iter")) base.n_iter = block.at("n_iter").get<int>();
  if (block.contains("n_burn")) base.n_burn = block.at("n_burn").get<int>();
  return base;
}

std::vector<UnlTargetSpec> subsets_from(const Json& cfg) {
  std::vector<UnlTargetSpec> subsets;
  if (!cfg.contains("subsets")) return subsets;
  const Json& block = cfg.at("subsets");
  if (!block.is_array()) throw ArgumentError("config key 'subsets' must be an array");
  for (const Json& entry : block) {
    UnlTargetSpec spec;
    if (entry.contains("name")) spec.name = entry.at("name").get<std::string>();
    spec.columns = entry.at("columns").get<std::vector<std::string>>();
    subsets.push_back(std::move(spec));
  }
  return subsets;
}

Json fit_report_block(const FitReport& report) {
  return {{"sweeps", report.sweeps},
          {"repairs", report.repairs},
          {"warnings", report.warnings}};
}

std::string sanitize_component(const std::string& name) {
  std::string out;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '-' || c == '.';
    out += ok ? c : '_';
  }
  return out.empty() ? std::string("target") : out;
}

Partition read_partition_csv(const std::string& path, int expected_n) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open partition file '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "row,label") {
    throw ArgumentError("partition file '" + path + "' must start with a row,label header");
  }
  std::vector<int> labels;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ArgumentError("partition row " + std::to_string(row) + " is not 'row,label'");
    }
    int file_row = 0, label = 0;
    try {
      file_row = std::stoi(line.substr(0, comma));
      label = std::stoi(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw ArgumentError("partition row " + std::to_string(row) + " is not 'row,label'");
    }
    if (file_row != row) throw ArgumentError("partition rows must run 1..n in order");
    if (label < 1) throw ArgumentError("partition labels are 1-based");
    labels.push_back(label - 1);
  }
  if (labels.empty()) throw ArgumentError("partition file '" + path + "' has no rows");
  if (expected_n >= 0 && static_cast<int>(labels.size()) != expected_n) {
    throw ArgumentError("partition has " + std::to_string(labels.size()) + " rows but the data has " +
                        std::to_string(expected_n));
  }
  return canonicalize(labels);
}

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot open '" + path + "'");
  out << "d,unl,unl_stderr_bound,mi_z\n";
  char buf[128];
  for (const CurvePoint& p : curve) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", p.d, p.unl, p.unl_stderr_bound,
                  p.mi_z);
    out << buf;
  }
  if (!out) throw ArgumentError("write to '" + path + "' failed");
}

Json data_block(const MixedDataset& data, const std::string& path) {
  return {{"path", path}, {"n", data.n()}, {"dropped_rows", data.dropped_rows}};
}

void emit_report(const Json& report, const std::string& path) {
  write_report_json(report, path);
  std::cout << "wrote " << path << '\n';
}

// Per-subcommand option bags. Everything carries its paper-scale default;
// desk-scale and config-file resolution happen after the parse.

struct SimulateOpts {
  std::string example;
  int n = 0;  // 0 means the example's own default
  std::uint64_t seed = 0;
  std::string out = "example.csv";
  bool desk = false;
};

struct FitDpmOpts {
  std::string data;
  std::vector<std::string> categorical;
  std::vector<std::string> columns;
  DpmConfig fit;
  std::uint64_t seed = 0;
  std::string draws_out = "dpm_draws.ndjson";
  std::string report_out = "report.json";
  bool desk = false;
};

struct FitLddpOpts {
  std::string data;
  std::vector<std::string> categorical;
  std::string response;
  std::vector<std::string> regressors;
  LddpConfig fit;
  std::uint64_t seed = 0;
  std::string draws_out = "lddp_draws.ndjson";
  std::string report_out = "report.json";
  bool desk = false;
};

struct SummarizeOpts {
  std::string draws;
  std::string partition_out = "partition.csv";
  std::string psm_out;
  std::string report_out = "report.json";
  int threads = 1;
};

struct UnlOpts {
  std::string data;
  std::vector<std::string> categorical;
  std::string partition;
  std::vector<std::string> columns;
  DpmConfig fit;
  int m = 5000;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string draws_out = "draws.csv";
  std::string report_out = "report.json";
  bool desk = false;
};

struct MiCurveOpts {
  std::string family = "symmetric";
  std::vector<double> priors;
  std::vector<double> d_grid;
  int m = 20000;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out = "curve.csv";
};

struct MarginalOpts {
  std::string data;
  std::vector<std::string> categorical;
  std::vector<std::string> response;
  std::vector<std::string> covariates;
  int response_iters = 10000, response_burn = 10000;
  int covariate_iters = 10000, covariate_burn = 10000;
  int m = 5000;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string report_out = "report.json";
  std::string partition_out = "partition.csv";
  std::string draws_out = "draws.csv";
  bool desk = false;
};

struct ConditionalOpts {
  std::string data;
  std::vector<std::string> categorical;
  std::string response;
  std::vector<std::string> regressors;
  std::vector<std::string> covariates;
  int response_iters = 10000, response_burn = 10000;
  int covariate_iters = 10000, covariate_burn = 10000;
  int m = 5000;
  std::uint64_t seed = 0;
  int threads = 1;
  bool ppc = false;
  int ppc_n_rep = 200;
  std::string ppc_condition_on;
  std::vector<double> ppc_cutoffs;
  std::string report_out = "report.json";
  std::string partition_out = "partition.csv";
  std::string draws_out = "draws.csv";
  bool desk = false;
};

struct PpcOpts {
  std::string data;
  std::vector<std::string> categorical;
  std::string response;
  std::vector<std::string> regressors;
  std::string draws;
  int n_rep = 200;
  std::string condition_on;
  std::vector<double> cutoffs = {0.25, 0.5, 0.75};
  std::uint64_t seed = 0;
  std::string report_out = "report.json";
};

void run_simulate(const SimulateOpts& o) {
  const ExampleId id = parse_example_id(o.example);
  int n = o.n;
  if (n == 0) {
    n = example_default_n(id);
    if (o.desk) n /= 2;
  }
  const MixedDataset data = simulate_example(id, n, o.seed);
  write_csv(data, o.out);
  std::cout << "wrote " << o.out << " (" << data.n() << " rows, example " << example_name(id)
            << ", seed " << o.seed << ")\n";
}

void run_fit_dpm(const FitDpmOpts& o) {
  MixedDataset data = ingest_csv(o.data, o.categorical);
  if (!o.columns.empty()) data = data.select_columns(o.columns);
  const DpmHyperparams hp =
      derive_dpm_hyperparams(data, o.fit.kmeans_k, split_seed(o.seed, 0), o.fit.tau_k);
  DpmConfig fit_cfg = o.fit;
  fit_cfg.seed = split_seed(o.seed, 1);
  const DpmDraws draws = fit_dpm(data, hp, fit_cfg);
  std::cerr << "fit-dpm: " << draws.report.sweeps << " sweeps in " << draws.report.seconds
            << " s\n";

  std::ofstream out(o.draws_out);
  if (!out) throw ArgumentError("cannot open '" + o.draws_out + "'");
  dpm_draws_to_ndjson(draws, out);
  std::cout << "wrote " << o.draws_out << " (" << draws.iterations.size() << " iterations)\n";

  Json report = {{"schema_version", kReportSchemaVersion},
                 {"kind", "fit-dpm"},
                 {"generated_at", report_timestamp_utc()},
                 {"data", data_block(data, o.data)},
                 {"seed", o.seed},
                 {"fit_report", fit_report_block(draws.report)}};
  report["fit_report"]["hyperparam_ridge_repairs"] = hp.ridge_repairs;
  report["fit_report"]["kmeans_reseeds"] = hp.kmeans_reseeds;
  emit_report(report, o.report_out);
}

void run_fit_lddp(const FitLddpOpts& o) {
  const MixedDataset data = ingest_csv(o.data, o.categorical);
  const int response_col = data.column(o.response);
  if (data.kinds[static_cast<std::size_t>(response_col)] != ColumnKind::continuous) {
    throw ArgumentError("response '" + o.response + "' must be continuous");
  }
  std::vector<std::string> regressors = o.regressors;
  if (regressors.empty()) {
    for (const auto& name : data.names) {
      if (name != o.response) regressors.push_back(name);
    }
  }
  const Eigen::VectorXd y = data.cont.col(data.block_pos[static_cast<std::size_t>(response_col)]);
  const Eigen::MatrixXd x = build_design_matrix(data, regressors);
  const LddpHyperparams hp = derive_lddp_hyperparams(y, x);
  LddpConfig fit_cfg = o.fit;
  fit_cfg.seed = split_seed(o.seed, 1);
  const LddpDraws draws = fit_lddp(y, x, hp, fit_cfg);
  std::cerr << "fit-lddp: " << draws.report.sweeps << " sweeps in " << draws.report.seconds
            << " s\n";

  std::ofstream out(o.draws_out);
  if (!out) throw ArgumentError("cannot open '" + o.draws_out + "'");
  lddp_draws_to_ndjson(draws, out);
  std::cout << "wrote " << o.draws_out << " (" << draws.iterations.size() << " iterations)\n";

  Json report = {{"schema_version", kReportSchemaVersion},
                 {"kind", "fit-lddp"},
                 {"generated_at", report_timestamp_utc()},
                 {"data", data_block(data, o.data)},
                 {"response", o.response},
                 {"regressors", regressors},
                 {"seed", o.seed},
                 {"fit_report", fit_report_block(draws.report)}};
  report["fit_report"]["ridge_repairs"] = hp.ridge_repairs;
  report["fit_report"]["b_floored"] = hp.b_floored;
  emit_report(report, o.report_out);
}

void run_summarize(const SummarizeOpts& o) {
  std::string kind;
  {
    std::ifstream probe(o.draws);
    if (!probe) throw ArgumentError("cannot open draws file '" + o.draws + "'");
    kind = ndjson_kind(probe);
  }
  std::ifstream in(o.draws);
  std::vector<std::vector<int>> allocations;
  if (kind == "dpm") {
    allocations = dpm_draws_from_ndjson(in).allocations();
  } else if (kind == "lddp") {
    allocations = lddp_draws_from_ndjson(in).allocations();
  } else {
    throw ArgumentError("draws file '" + o.draws + "' has unknown kind '" + kind + "'");
  }

  const Eigen::MatrixXd psm = similarity_matrix(allocations);
  const RepresentativeResult rep = representative_partition(allocations, psm, o.threads);

  write_partition_csv(rep.partition, o.partition_out);
  std::cout << "wrote " << o.partition_out << " (k=" << rep.partition.k << ")\n";
  if (!o.psm_out.empty()) {
    write_similarity_csv(psm, o.psm_out);
    std::cout << "wrote " << o.psm_out << '\n';
  }

  std::vector<int> sizes(static_cast<std::size_t>(rep.partition.k), 0);
  for (int zi : rep.partition.labels) ++sizes[static_cast<std::size_t>(zi)];
  const Json report = {{"schema_version", kReportSchemaVersion},
                       {"kind", "summarize-partition"},
                       {"generated_at", report_timestamp_utc()},
                       {"draws", o.draws},
                       {"draws_kind", kind},
                       {"n_draws", static_cast<int>(allocations.size())},
                       {"k", rep.partition.k},
                       {"sizes", sizes},
                       {"score_bits", rep.score},
                       {"source_draw", rep.source_draw + 1}};
  emit_report(report, o.report_out);
}

void run_unl(const UnlOpts& o) {
  MixedDataset data = ingest_csv(o.data, o.categorical);
  const Partition partition = read_partition_csv(o.partition, data.n());
  const bool subset = !o.columns.empty();
  if (subset) data = data.select_columns(o.columns);

  Json report = {{"schema_version", kReportSchemaVersion},
                 {"kind", "unl"},
                 {"generated_at", report_timestamp_utc()},
                 {"data", data_block(data, o.data)},
                 {"partition_file", o.partition},
                 {"k", partition.k},
                 {"m", o.m},
                 {"seed", o.seed},
                 {"notices", Json::array()}};

  if (partition.k < 2) {
    report["notices"].push_back("K=1, UNL undefined for one group");
    report["unl"] = Json::array();
    write_unl_draws_csv(UnlPosterior{}, o.draws_out);
    std::cout << "wrote " << o.draws_out << " (empty, single-cluster partition)\n";
    emit_report(report, o.report_out);
    return;
  }

  std::vector<FitReport> cluster_reports;
  const std::vector<std::vector<DensityModel>> models = cluster_covariate_densities(
      partition, data, o.fit, split_seed(o.seed, 2), o.threads, &cluster_reports);
  const UnlPosterior posterior =
      estimate_unl_posterior(models, o.m, split_seed(o.seed, 100), o.threads);

  Json cluster_json = Json::array();
  for (std::size_t k = 0; k < cluster_reports.size(); ++k) {
    Json entry = fit_report_block(cluster_reports[k]);
    entry["cluster"] = static_cast<int>(k) + 1;
    cluster_json.push_back(entry);
  }
  report["cluster_fit_reports"] = cluster_json;

  std::string name = "joint";
  if (subset) {
    name.clear();
    for (std::size_t c = 0; c < o.columns.size(); ++c) {
      if (c > 0) name += '+';
      name += o.columns[c];
    }
  }
  Json block = unl_posterior_summary(posterior, partition.k, o.m);
  block["name"] = name;
  block["columns"] = subset ? Json(o.columns) : Json(data.names);
  report["unl"] = Json::array({block});

  write_unl_draws_csv(posterior, o.draws_out);
  std::cout << "wrote " << o.draws_out << " (" << posterior.draws.size() << " draws)\n";
  emit_report(report, o.report_out);
}

void run_mi_curve(const MiCurveOpts& o) {
  CurveFamily family;
  if (o.family == "symmetric") {
    family = CurveFamily::symmetric_pair;
  } else if (o.family == "imbalanced") {
    family = CurveFamily::fixed_first;
  } else {
    throw ArgumentError("unknown curve family '" + o.family + "' (want symmetric or imbalanced)");
  }

  Eigen::VectorXd priors(3);
  if (o.priors.empty()) {
    priors.setConstant(1.0 / 3.0);
  } else {
    if (o.priors.size() != 3) throw ArgumentError("curve families take exactly 3 priors");
    for (int k = 0; k < 3; ++k) priors(k) = o.priors[static_cast<std::size_t>(k)];
  }

  std::vector<double> grid = o.d_grid;
  if (grid.empty()) {
    for (int i = 0; i <= 24; ++i) grid.push_back(0.25 * i);
  }

  const std::vector<CurvePoint> curve = mi_unl_curve(family, priors, grid, o.m, o.seed, o.threads);
  write_curve_csv(curve, o.out);
  std::cout << "wrote " << o.out << " (" << curve.size() << " grid points)\n";
}

void write_pipeline_outputs(const PipelineResult& result, const std::string& report_out,
                            const std::string& partition_out, const std::string& draws_out) {
  emit_report(result.report, report_out);
  write_partition_csv(result.partition, partition_out);
  std::cout << "wrote " << partition_out << " (k=" << result.partition.k << ")\n";

  for (std::size_t t = 0; t < result.targets.size(); ++t) {
    std::string path = draws_out;
    if (t > 0) {
      const std::string stem = sanitize_component(result.targets[t].spec.name);
      const auto dot = draws_out.rfind('.');
      path = dot == std::string::npos ? draws_out + "_" + stem
                                      : draws_out.substr(0, dot) + "_" + stem + draws_out.substr(dot);
    }
    write_unl_draws_csv(result.targets[t].posterior, path);
    std::cout << "wrote " << path << " (target " << result.targets[t].spec.name << ")\n";
  }
}

void run_pipeline_marginal(const MarginalOpts& o, const Json& cfg) {
  const MixedDataset data = ingest_csv(o.data, o.categorical);

  MarginalPipelineConfig pipe;
  pipe.response = o.response;
  pipe.covariates = o.covariates;
  pipe.subsets = subsets_from(cfg);
  pipe.response_fit = dpm_config_from(cfg.value("response_fit", Json()), DpmConfig{});
  pipe.covariate_fit = dpm_config_from(cfg.value("covariate_fit", Json()), DpmConfig{});
  pipe.response_fit.n_iter = o.response_iters;
  pipe.response_fit.n_burn = o.response_burn;
  pipe.covariate_fit.n_iter = o.covariate_iters;
  pipe.covariate_fit.n_burn = o.covariate_burn;
  pipe.m = o.m;
  pipe.seed = o.seed;
  pipe.threads = o.threads;

  const PipelineResult result = run_marginal_pipeline(data, pipe);
  write_pipeline_outputs(result, o.report_out, o.partition_out, o.draws_out);
}

void run_pipeline_conditional(const ConditionalOpts& o, const Json& cfg) {
  const MixedDataset data = ingest_csv(o.data, o.categorical);

  ConditionalPipelineConfig pipe;
  pipe.response = o.response;
  pipe.regressors = o.regressors;
  pipe.covariates = o.covariates;
  pipe.subsets = subsets_from(cfg);
  pipe.response_fit = lddp_config_from(cfg.value("response_fit", Json()), LddpConfig{});
  pipe.covariate_fit = dpm_config_from(cfg.value("covariate_fit", Json()), DpmConfig{});
  pipe.response_fit.n_iter = o.response_iters;
  pipe.response_fit.n_burn = o.response_burn;
  pipe.covariate_fit.n_iter = o.covariate_iters;
  pipe.covariate_fit.n_burn = o.covariate_burn;
  pipe.m = o.m;
  pipe.seed = o.seed;
  pipe.threads = o.threads;

  if (cfg.contains("ppc")) {
    const Json& block = cfg.at("ppc");
    if (block.contains("enabled")) pipe.ppc.enabled = block.at("enabled").get<bool>();
    if (block.contains("n_rep")) pipe.ppc.n_rep = block.at("n_rep").get<int>();
    if (block.contains("condition_on")) {
      pipe.ppc.condition_on = block.at("condition_on").get<std::string>();
    }
    if (block.contains("quantile_cutoffs")) {
      pipe.ppc.quantile_cutoffs = block.at("quantile_cutoffs").get<std::vector<double>>();
    }
  }
  if (o.ppc) pipe.ppc.enabled = true;
  if (o.ppc_n_rep != 200) pipe.ppc.n_rep = o.ppc_n_rep;
  if (!o.ppc_condition_on.empty()) pipe.ppc.condition_on = o.ppc_condition_on;
  if (!o.ppc_cutoffs.empty()) pipe.ppc.quantile_cutoffs = o.ppc_cutoffs;

  const PipelineResult result = run_conditional_pipeline(data, pipe);
  write_pipeline_outputs(result, o.report_out, o.partition_out, o.draws_out);
}

void run_ppc_command(const PpcOpts& o) {
  const MixedDataset data = ingest_csv(o.data, o.categorical);

  std::string kind;
  {
    std::ifstream probe(o.draws);
    if (!probe) throw ArgumentError("cannot open draws file '" + o.draws + "'");
    kind = ndjson_kind(probe);
  }
  if (kind != "lddp") {
    throw ArgumentError("ppc needs lddp draws; '" + o.draws + "' holds kind '" + kind + "'");
  }
  std::ifstream in(o.draws);
  const LddpDraws draws = lddp_draws_from_ndjson(in);

  PpcConfig cfg;
  cfg.enabled = true;
  cfg.n_rep = o.n_rep;
  cfg.condition_on = o.condition_on;
  cfg.quantile_cutoffs = o.cutoffs;

  Json report = {{"schema_version", kReportSchemaVersion},
                 {"kind", "ppc"},
                 {"generated_at", report_timestamp_utc()},
                 {"data", data_block(data, o.data)},
                 {"draws", o.draws},
                 {"seed", o.seed}};
  report["ppc"] =
      posterior_predictive_check(data, o.response, o.regressors, draws, cfg, split_seed(o.seed, 3));
  emit_report(report, o.report_out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"underlap coefficient diagnostics for model-based clustering"};
  app.require_subcommand(1);

  const int default_threads = env_threads();
  std::string config_path;

  // simulate
  SimulateOpts sim;
  CLI::App* simulate = app.add_subcommand("simulate", "generate one of the benchmark datasets");
  simulate->add_option("--config", config_path, "JSON config file");
  simulate->add_option("--example", sim.example, "example id: A, B, C1, C2 or D");
  simulate->add_option("--n", sim.n, "rows to draw (default: the example's own size)");
  simulate->add_option("--seed", sim.seed, "rng seed");
  simulate->add_option("--out", sim.out, "output csv path");
  simulate->add_flag("--desk-scale", sim.desk, "halve the default n");

  // fit-dpm
  FitDpmOpts fdpm;
  CLI::App* fit_dpm_cmd = app.add_subcommand("fit-dpm", "fit the response mixture model");
  fit_dpm_cmd->add_option("--config", config_path, "JSON config file");
  fit_dpm_cmd->add_option("--data", fdpm.data, "input csv");
  fit_dpm_cmd->add_option("--categorical", fdpm.categorical, "categorical column names")
      ->delimiter(',');
  fit_dpm_cmd->add_option("--columns", fdpm.columns, "columns to fit on (default: all)")
      ->delimiter(',');
  fit_dpm_cmd->add_option("--truncation", fdpm.fit.truncation, "stick-breaking truncation L");
  fit_dpm_cmd->add_option("--a-alpha", fdpm.fit.a_alpha, "concentration prior shape");
  fit_dpm_cmd->add_option("--b-alpha", fdpm.fit.b_alpha, "concentration prior rate");
  fit_dpm_cmd->add_option("--tau-k", fdpm.fit.tau_k, "categorical pseudo-count total");
  fit_dpm_cmd->add_option("--kmeans-k", fdpm.fit.kmeans_k, "k for hyperparameter derivation");
  fit_dpm_cmd->add_option("--iters", fdpm.fit.n_iter, "retained sweeps");
  fit_dpm_cmd->add_option("--burn", fdpm.fit.n_burn, "burn-in sweeps");
  fit_dpm_cmd->add_option("--seed", fdpm.seed, "master seed");
  fit_dpm_cmd->add_option("--draws-out", fdpm.draws_out, "ndjson output path");
  fit_dpm_cmd->add_option("--report-out", fdpm.report_out, "report json path");
  fit_dpm_cmd->add_flag("--desk-scale", fdpm.desk, "default to 1000/1000 sweeps");

  // fit-lddp
  FitLddpOpts flddp;
  CLI::App* fit_lddp_cmd = app.add_subcommand("fit-lddp", "fit the conditional regression mixture");
  fit_lddp_cmd->add_option("--config", config_path, "JSON config file");
  fit_lddp_cmd->add_option("--data", flddp.data, "input csv");
  fit_lddp_cmd->add_option("--categorical", flddp.categorical, "categorical column names")
      ->delimiter(',');
  fit_lddp_cmd->add_option("--response", flddp.response, "response column");
  fit_lddp_cmd->add_option("--regressors", flddp.regressors,
                           "design columns (default: all non-response)")
      ->delimiter(',');
  fit_lddp_cmd->add_option("--truncation", flddp.fit.truncation, "stick-breaking truncation L");
  fit_lddp_cmd->add_option("--a-alpha", flddp.fit.a_alpha, "concentration prior shape");
  fit_lddp_cmd->add_option("--b-alpha", flddp.fit.b_alpha, "concentration prior rate");
  fit_lddp_cmd->add_option("--iters", flddp.fit.n_iter, "retained sweeps");
  fit_lddp_cmd->add_option("--burn", flddp.fit.n_burn, "burn-in sweeps");
  fit_lddp_cmd->add_option("--seed", flddp.seed, "master seed");
  fit_lddp_cmd->add_option("--draws-out", flddp.draws_out, "ndjson output path");
  fit_lddp_cmd->add_option("--report-out", flddp.report_out, "report json path");
  fit_lddp_cmd->add_flag("--desk-scale", flddp.desk, "default to 1000/1000 sweeps");

  // summarize-partition
  SummarizeOpts summ;
  summ.threads = default_threads;
  CLI::App* summarize =
      app.add_subcommand("summarize-partition", "representative partition from posterior draws");
  summarize->add_option("--config", config_path, "JSON config file");
  summarize->add_option("--draws", summ.draws, "ndjson draws path");
  summarize->add_option("--partition-out", summ.partition_out, "partition csv path");
  summarize->add_option("--psm-out", summ.psm_out, "similarity matrix csv path (optional)");
  summarize->add_option("--report-out", summ.report_out, "report json path");
  summarize->add_option("--threads", summ.threads, "worker threads");

  // unl
  UnlOpts unl;
  unl.threads = default_threads;
  CLI::App* unl_cmd =
      app.add_subcommand("unl", "underlap posterior for a partition over covariates");
  unl_cmd->add_option("--config", config_path, "JSON config file");
  unl_cmd->add_option("--data", unl.data, "covariate csv");
  unl_cmd->add_option("--categorical", unl.categorical, "categorical column names")
      ->delimiter(',');
  unl_cmd->add_option("--partition", unl.partition, "partition csv (row,label)");
  unl_cmd->add_option("--columns", unl.columns, "covariate subset (default: all)")
      ->delimiter(',');
  unl_cmd->add_option("--truncation", unl.fit.truncation, "per-cluster DPM truncation");
  unl_cmd->add_option("--a-alpha", unl.fit.a_alpha, "concentration prior shape");
  unl_cmd->add_option("--b-alpha", unl.fit.b_alpha, "concentration prior rate");
  unl_cmd->add_option("--tau-k", unl.fit.tau_k, "categorical pseudo-count total");
  unl_cmd->add_option("--kmeans-k", unl.fit.kmeans_k, "k for hyperparameter derivation");
  unl_cmd->add_option("--iters", unl.fit.n_iter, "retained sweeps per cluster fit");
  unl_cmd->add_option("--burn", unl.fit.n_burn, "burn-in sweeps per cluster fit");
  unl_cmd->add_option("--m", unl.m, "importance sampling draws per density draw");
  unl_cmd->add_option("--seed", unl.seed, "master seed");
  unl_cmd->add_option("--threads", unl.threads, "worker threads");
  unl_cmd->add_option("--draws-out", unl.draws_out, "unl draws csv path");
  unl_cmd->add_option("--report-out", unl.report_out, "report json path");
  unl_cmd->add_flag("--desk-scale", unl.desk, "default to 1000/1000 sweeps and m=2000");

  // mi-curve
  MiCurveOpts curve;
  curve.threads = default_threads;
  CLI::App* mi_curve_cmd =
      app.add_subcommand("mi-curve", "underlap versus normalized mutual information curve");
  mi_curve_cmd->add_option("--config", config_path, "JSON config file");
  mi_curve_cmd->add_option("--family", curve.family, "symmetric or imbalanced");
  mi_curve_cmd->add_option("--priors", curve.priors, "three group prevalences")->delimiter(',');
  mi_curve_cmd->add_option("--d-grid", curve.d_grid, "separation grid (default 0..6 by 0.25)")
      ->delimiter(',');
  mi_curve_cmd->add_option("--m", curve.m, "monte carlo draws per grid point");
  mi_curve_cmd->add_option("--seed", curve.seed, "master seed");
  mi_curve_cmd->add_option("--threads", curve.threads, "worker threads");
  mi_curve_cmd->add_option("--out", curve.out, "curve csv path");

  // pipeline-marginal
  MarginalOpts marg;
  marg.threads = default_threads;
  CLI::App* marginal =
      app.add_subcommand("pipeline-marginal", "cluster on the response, screen covariates");
  marginal->add_option("--config", config_path, "JSON config file");
  marginal->add_option("--data", marg.data, "input csv");
  marginal->add_option("--categorical", marg.categorical, "categorical column names")
      ->delimiter(',');
  marginal->add_option("--response", marg.response, "response columns")->delimiter(',');
  marginal->add_option("--covariates", marg.covariates,
                       "diagnostic covariates (default: all non-response)")
      ->delimiter(',');
  marginal->add_option("--response-iters", marg.response_iters, "response fit retained sweeps");
  marginal->add_option("--response-burn", marg.response_burn, "response fit burn-in");
  marginal->add_option("--covariate-iters", marg.covariate_iters,
                       "per-cluster covariate fit retained sweeps");
  marginal->add_option("--covariate-burn", marg.covariate_burn, "per-cluster covariate burn-in");
  marginal->add_option("--m", marg.m, "importance sampling draws");
  marginal->add_option("--seed", marg.seed, "master seed");
  marginal->add_option("--threads", marg.threads, "worker threads");
  marginal->add_option("--report-out", marg.report_out, "report json path");
  marginal->add_option("--partition-out", marg.partition_out, "partition csv path");
  marginal->add_option("--draws-out", marg.draws_out, "unl draws csv path");
  marginal->add_flag("--desk-scale", marg.desk, "default to 1000/1000 sweeps and m=2000");

  // pipeline-conditional
  ConditionalOpts cond;
  cond.threads = default_threads;
  CLI::App* conditional =
      app.add_subcommand("pipeline-conditional", "regression mixture, then covariate screening");
  conditional->add_option("--config", config_path, "JSON config file");
  conditional->add_option("--data", cond.data, "input csv");
  conditional->add_option("--categorical", cond.categorical, "categorical column names")
      ->delimiter(',');
  conditional->add_option("--response", cond.response, "response column");
  conditional->add_option("--regressors", cond.regressors,
                          "design columns (default: all non-response)")
      ->delimiter(',');
  conditional->add_option("--covariates", cond.covariates,
                          "diagnostic covariates (default: the regressors)")
      ->delimiter(',');
  conditional->add_option("--response-iters", cond.response_iters, "response fit retained sweeps");
  conditional->add_option("--response-burn", cond.response_burn, "response fit burn-in");
  conditional->add_option("--covariate-iters", cond.covariate_iters,
                          "per-cluster covariate fit retained sweeps");
  conditional->add_option("--covariate-burn", cond.covariate_burn,
                          "per-cluster covariate burn-in");
  conditional->add_option("--m", cond.m, "importance sampling draws");
  conditional->add_option("--seed", cond.seed, "master seed");
  conditional->add_option("--threads", cond.threads, "worker threads");
  conditional->add_flag("--ppc", cond.ppc, "run the posterior predictive block");
  conditional->add_option("--ppc-n-rep", cond.ppc_n_rep, "posterior predictive replicates");
  conditional->add_option("--ppc-condition-on", cond.ppc_condition_on,
                          "column whose quantiles bin the checks");
  conditional->add_option("--ppc-cutoffs", cond.ppc_cutoffs, "quantile cutoffs in (0,1)")
      ->delimiter(',');
  conditional->add_option("--report-out", cond.report_out, "report json path");
  conditional->add_option("--partition-out", cond.partition_out, "partition csv path");
  conditional->add_option("--draws-out", cond.draws_out, "unl draws csv path");
  conditional->add_flag("--desk-scale", cond.desk, "default to 1000/1000 sweeps and m=2000");

  // ppc
  PpcOpts ppc;
  CLI::App* ppc_cmd =
      app.add_subcommand("ppc", "posterior predictive checks for fitted lddp draws");
  ppc_cmd->add_option("--config", config_path, "JSON config file");
  ppc_cmd->add_option("--data", ppc.data, "input csv");
  ppc_cmd->add_option("--categorical", ppc.categorical, "categorical column names")
      ->delimiter(',');
  ppc_cmd->add_option("--response", ppc.response, "response column");
  ppc_cmd->add_option("--regressors", ppc.regressors,
                      "design columns (default: all non-response)")
      ->delimiter(',');
  ppc_cmd->add_option("--draws", ppc.draws, "lddp ndjson draws path");
  ppc_cmd->add_option("--n-rep", ppc.n_rep, "replicate datasets");
  ppc_cmd->add_option("--condition-on", ppc.condition_on,
                      "column whose quantiles bin the checks");
  ppc_cmd->add_option("--cutoffs", ppc.cutoffs, "quantile cutoffs in (0,1)")->delimiter(',');
  ppc_cmd->add_option("--seed", ppc.seed, "master seed");
  ppc_cmd->add_option("--report-out", ppc.report_out, "report json path");

  CLI11_PARSE(app, argc, argv);

  try {
    const Json cfg = load_config(config_path);

    if (*simulate) {
      from_config(*simulate, "--example", cfg, "example", &sim.example);
      from_config(*simulate, "--n", cfg, "n", &sim.n);
      from_config(*simulate, "--seed", cfg, "seed", &sim.seed);
      from_config(*simulate, "--out", cfg, "out", &sim.out);
      require_set(sim.example, "--example");
      run_simulate(sim);
    } else if (*fit_dpm_cmd) {
      from_config(*fit_dpm_cmd, "--data", cfg, "data", &fdpm.data);
      from_config(*fit_dpm_cmd, "--draws-out", cfg, "draws_out", &fdpm.draws_out);
      from_config(*fit_dpm_cmd, "--report-out", cfg, "report_out", &fdpm.report_out);
      from_config(*fit_dpm_cmd, "--categorical", cfg, "categorical", &fdpm.categorical);
      from_config(*fit_dpm_cmd, "--columns", cfg, "columns", &fdpm.columns);
      from_config(*fit_dpm_cmd, "--truncation", cfg, "truncation", &fdpm.fit.truncation);
      from_config(*fit_dpm_cmd, "--a-alpha", cfg, "a_alpha", &fdpm.fit.a_alpha);
      from_config(*fit_dpm_cmd, "--b-alpha", cfg, "b_alpha", &fdpm.fit.b_alpha);
      from_config(*fit_dpm_cmd, "--tau-k", cfg, "tau_k", &fdpm.fit.tau_k);
      from_config(*fit_dpm_cmd, "--kmeans-k", cfg, "kmeans_k", &fdpm.fit.kmeans_k);
      from_config(*fit_dpm_cmd, "--iters", cfg, "n_iter", &fdpm.fit.n_iter);
      from_config(*fit_dpm_cmd, "--burn", cfg, "n_burn", &fdpm.fit.n_burn);
      from_config(*fit_dpm_cmd, "--seed", cfg, "seed", &fdpm.seed);
      desk_default(*fit_dpm_cmd, "--iters", cfg, "n_iter", fdpm.desk, 1000, &fdpm.fit.n_iter);
      desk_default(*fit_dpm_cmd, "--burn", cfg, "n_burn", fdpm.desk, 1000, &fdpm.fit.n_burn);
      require_set(fdpm.data, "--data");
      run_fit_dpm(fdpm);
    } else if (*fit_lddp_cmd) {
      from_config(*fit_lddp_cmd, "--data", cfg, "data", &flddp.data);
      from_config(*fit_lddp_cmd, "--response", cfg, "response", &flddp.response);
      from_config(*fit_lddp_cmd, "--draws-out", cfg, "draws_out", &flddp.draws_out);
      from_config(*fit_lddp_cmd, "--report-out", cfg, "report_out", &flddp.report_out);
      from_config(*fit_lddp_cmd, "--categorical", cfg, "categorical", &flddp.categorical);
      from_config(*fit_lddp_cmd, "--regressors", cfg, "regressors", &flddp.regressors);
      from_config(*fit_lddp_cmd, "--truncation", cfg, "truncation", &flddp.fit.truncation);
      from_config(*fit_lddp_cmd, "--a-alpha", cfg, "a_alpha", &flddp.fit.a_alpha);
      from_config(*fit_lddp_cmd, "--b-alpha", cfg, "b_alpha", &flddp.fit.b_alpha);
      from_config(*fit_lddp_cmd, "--iters", cfg, "n_iter", &flddp.fit.n_iter);
      from_config(*fit_lddp_cmd, "--burn", cfg, "n_burn", &flddp.fit.n_burn);
      from_config(*fit_lddp_cmd, "--seed", cfg, "seed", &flddp.seed);
      desk_default(*fit_lddp_cmd, "--iters", cfg, "n_iter", flddp.desk, 1000, &flddp.fit.n_iter);
      desk_default(*fit_lddp_cmd, "--burn", cfg, "n_burn", flddp.desk, 1000, &flddp.fit.n_burn);
      require_set(flddp.data, "--data");
      require_set(flddp.response, "--response");
      run_fit_lddp(flddp);
    } else if (*summarize) {
      from_config(*summarize, "--draws", cfg, "draws", &summ.draws);
      from_config(*summarize, "--partition-out", cfg, "partition_out", &summ.partition_out);
      from_config(*summarize, "--psm-out", cfg, "psm_out", &summ.psm_out);
      from_config(*summarize, "--report-out", cfg, "report_out", &summ.report_out);
      from_config(*summarize, "--threads", cfg, "threads", &summ.threads);
      require_set(summ.draws, "--draws");
      run_summarize(summ);
    } else if (*unl_cmd) {
      from_config(*unl_cmd, "--data", cfg, "data", &unl.data);
      from_config(*unl_cmd, "--partition", cfg, "partition", &unl.partition);
      from_config(*unl_cmd, "--draws-out", cfg, "draws_out", &unl.draws_out);
      from_config(*unl_cmd, "--report-out", cfg, "report_out", &unl.report_out);
      from_config(*unl_cmd, "--categorical", cfg, "categorical", &unl.categorical);
      from_config(*unl_cmd, "--columns", cfg, "columns", &unl.columns);
      from_config(*unl_cmd, "--truncation", cfg, "truncation", &unl.fit.truncation);
      from_config(*unl_cmd, "--a-alpha", cfg, "a_alpha", &unl.fit.a_alpha);
      from_config(*unl_cmd, "--b-alpha", cfg, "b_alpha", &unl.fit.b_alpha);
      from_config(*unl_cmd, "--tau-k", cfg, "tau_k", &unl.fit.tau_k);
      from_config(*unl_cmd, "--kmeans-k", cfg, "kmeans_k", &unl.fit.kmeans_k);
      from_config(*unl_cmd, "--iters", cfg, "n_iter", &unl.fit.n_iter);
      from_config(*unl_cmd, "--burn", cfg, "n_burn", &unl.fit.n_burn);
      from_config(*unl_cmd, "--m", cfg, "m", &unl.m);
      from_config(*unl_cmd, "--seed", cfg, "seed", &unl.seed);
      from_config(*unl_cmd, "--threads", cfg, "threads", &unl.threads);
      desk_default(*unl_cmd, "--iters", cfg, "n_iter", unl.desk, 1000, &unl.fit.n_iter);
      desk_default(*unl_cmd, "--burn", cfg, "n_burn", unl.desk, 1000, &unl.fit.n_burn);
      desk_default(*unl_cmd, "--m", cfg, "m", unl.desk, 2000, &unl.m);
      require_set(unl.data, "--data");
      require_set(unl.partition, "--partition");
      run_unl(unl);
    } else if (*mi_curve_cmd) {
      from_config(*mi_curve_cmd, "--family", cfg, "family", &curve.family);
      from_config(*mi_curve_cmd, "--priors", cfg, "priors", &curve.priors);
      from_config(*mi_curve_cmd, "--d-grid", cfg, "d_grid", &curve.d_grid);
      from_config(*mi_curve_cmd, "--m", cfg, "m", &curve.m);
      from_config(*mi_curve_cmd, "--seed", cfg, "seed", &curve.seed);
      from_config(*mi_curve_cmd, "--threads", cfg, "threads", &curve.threads);
      from_config(*mi_curve_cmd, "--out", cfg, "out", &curve.out);
      run_mi_curve(curve);
    } else if (*marginal) {
      from_config(*marginal, "--data", cfg, "data", &marg.data);
      from_config(*marginal, "--report-out", cfg, "report_out", &marg.report_out);
      from_config(*marginal, "--partition-out", cfg, "partition_out", &marg.partition_out);
      from_config(*marginal, "--draws-out", cfg, "draws_out", &marg.draws_out);
      from_config(*marginal, "--categorical", cfg, "categorical", &marg.categorical);
      from_config(*marginal, "--response", cfg, "response", &marg.response);
      from_config(*marginal, "--covariates", cfg, "covariates", &marg.covariates);
      from_config(*marginal, "--response-iters", cfg, "response_iters", &marg.response_iters);
      from_config(*marginal, "--response-burn", cfg, "response_burn", &marg.response_burn);
      from_config(*marginal, "--covariate-iters", cfg, "covariate_iters", &marg.covariate_iters);
      from_config(*marginal, "--covariate-burn", cfg, "covariate_burn", &marg.covariate_burn);
      from_config(*marginal, "--m", cfg, "m", &marg.m);
      from_config(*marginal, "--seed", cfg, "seed", &marg.seed);
      from_config(*marginal, "--threads", cfg, "threads", &marg.threads);
      desk_default(*marginal, "--response-iters", cfg, "response_iters", marg.desk, 1000,
                   &marg.response_iters);
      desk_default(*marginal, "--response-burn", cfg, "response_burn", marg.desk, 1000,
                   &marg.response_burn);
      desk_default(*marginal, "--covariate-iters", cfg, "covariate_iters", marg.desk, 1000,
                   &marg.covariate_iters);
      desk_default(*marginal, "--covariate-burn", cfg, "covariate_burn", marg.desk, 1000,
                   &marg.covariate_burn);
      desk_default(*marginal, "--m", cfg, "m", marg.desk, 2000, &marg.m);
      require_set(marg.data, "--data");
      run_pipeline_marginal(marg, cfg);
    } else if (*conditional) {
      from_config(*conditional, "--data", cfg, "data", &cond.data);
      from_config(*conditional, "--report-out", cfg, "report_out", &cond.report_out);
      from_config(*conditional, "--partition-out", cfg, "partition_out", &cond.partition_out);
      from_config(*conditional, "--draws-out", cfg, "draws_out", &cond.draws_out);
      from_config(*conditional, "--categorical", cfg, "categorical", &cond.categorical);
      from_config(*conditional, "--response", cfg, "response", &cond.response);
      from_config(*conditional, "--regressors", cfg, "regressors", &cond.regressors);
      from_config(*conditional, "--covariates", cfg, "covariates", &cond.covariates);
      from_config(*conditional, "--response-iters", cfg, "response_iters", &cond.response_iters);
      from_config(*conditional, "--response-burn", cfg, "response_burn", &cond.response_burn);
      from_config(*conditional, "--covariate-iters", cfg, "covariate_iters",
                  &cond.covariate_iters);
      from_config(*conditional, "--covariate-burn", cfg, "covariate_burn", &cond.covariate_burn);
      from_config(*conditional, "--m", cfg, "m", &cond.m);
      from_config(*conditional, "--seed", cfg, "seed", &cond.seed);
      from_config(*conditional, "--threads", cfg, "threads", &cond.threads);
      desk_default(*conditional, "--response-iters", cfg, "response_iters", cond.desk, 1000,
                   &cond.response_iters);
      desk_default(*conditional, "--response-burn", cfg, "response_burn", cond.desk, 1000,
                   &cond.response_burn);
      desk_default(*conditional, "--covariate-iters", cfg, "covariate_iters", cond.desk, 1000,
                   &cond.covariate_iters);
      desk_default(*conditional, "--covariate-burn", cfg, "covariate_burn", cond.desk, 1000,
                   &cond.covariate_burn);
      desk_default(*conditional, "--m", cfg, "m", cond.desk, 2000, &cond.m);
      require_set(cond.data, "--data");
      run_pipeline_conditional(cond, cfg);
    } else if (*ppc_cmd) {
      from_config(*ppc_cmd, "--data", cfg, "data", &ppc.data);
      from_config(*ppc_cmd, "--response", cfg, "response", &ppc.response);
      from_config(*ppc_cmd, "--draws", cfg, "draws", &ppc.draws);
      from_config(*ppc_cmd, "--report-out", cfg, "report_out", &ppc.report_out);
      from_config(*ppc_cmd, "--categorical", cfg, "categorical", &ppc.categorical);
      from_config(*ppc_cmd, "--regressors", cfg, "regressors", &ppc.regressors);
      from_config(*ppc_cmd, "--n-rep", cfg, "n_rep", &ppc.n_rep);
      from_config(*ppc_cmd, "--condition-on", cfg, "condition_on", &ppc.condition_on);
      from_config(*ppc_cmd, "--cutoffs", cfg, "quantile_cutoffs", &ppc.cutoffs);
      from_config(*ppc_cmd, "--seed", cfg, "seed", &ppc.seed);
      require_set(ppc.data, "--data");
      require_set(ppc.response, "--response");
      require_set(ppc.draws, "--draws");
      run_ppc_command(ppc);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
