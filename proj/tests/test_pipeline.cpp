#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "underlap/errors.hpp"
#include "underlap/pipeline.hpp"
#include "underlap/simulate.hpp"

using namespace underlap;
using Json = nlohmann::json;

namespace {

DpmConfig small_dpm(int iters, std::uint64_t seed = 0) {
  DpmConfig cfg;
  cfg.n_iter = iters;
  cfg.n_burn = iters;
  cfg.seed = seed;
  return cfg;
}

LddpConfig small_lddp(int iters) {
  LddpConfig cfg;
  cfg.truncation = 10;
  cfg.n_iter = iters;
  cfg.n_burn = iters;
  return cfg;
}

// Two continuous columns with a unimodal response, so the representative
// partition collapses to one cluster and the pipeline takes the K=1 path.
MixedDataset unimodal_frame(int n, std::uint64_t seed) {
  Rng rng(seed);
  MixedDataset d;
  d.names = {"y", "x"};
  d.kinds = {ColumnKind::continuous, ColumnKind::continuous};
  d.block_pos = {0, 1};
  d.cont.resize(n, 2);
  d.cat.resize(n, 0);
  for (int i = 0; i < n; ++i) {
    d.cont(i, 0) = 0.01 * rng.normal();
    d.cont(i, 1) = rng.normal();
  }
  return d;
}

std::string dump_without_timestamp(Json report) {
  report.erase("generated_at");
  return report.dump(2);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::filesystem::path scratch_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "underlap_pipeline_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("marginal pipeline separates the banded example") {
  const MixedDataset data = simulate_example(ExampleId::A, 150, 5);

  MarginalPipelineConfig cfg;
  cfg.response = {"y"};
  cfg.response_fit = small_dpm(400);
  cfg.covariate_fit = small_dpm(200);
  cfg.m = 500;
  cfg.seed = 11;

  const PipelineResult result = run_marginal_pipeline(data, cfg);

  // Three response bands separated by dozens of noise sds.
  CHECK(result.partition.k == 3);
  CHECK(static_cast<int>(result.partition.labels.size()) == 150);
  CHECK(result.partition_score >= 0.0);
  CHECK(result.source_draw >= 0);
  CHECK(result.source_draw < 400);

  const Json& report = result.report;
  CHECK(report.at("schema_version").get<std::string>() == kReportSchemaVersion);
  CHECK(report.at("kind").get<std::string>() == "marginal-pipeline");
  CHECK(report.at("generated_at").get<std::string>().size() == 20);
  CHECK(report.at("data").at("n").get<int>() == 150);
  CHECK(report.at("config").at("m").get<int>() == 500);

  const Json& part = report.at("partition");
  CHECK(part.at("k").get<int>() == result.partition.k);
  int total = 0;
  for (const auto& s : part.at("sizes")) total += s.get<int>();
  CHECK(total == 150);
  CHECK(part.at("labels").size() == 150);
  for (const auto& l : part.at("labels")) {
    CHECK(l.get<int>() >= 1);
    CHECK(l.get<int>() <= result.partition.k);
  }
  CHECK(part.at("source_draw").get<int>() == result.source_draw + 1);

  // One covariate, so the default target list is just the joint set.
  REQUIRE(result.targets.size() == 1);
  CHECK(result.targets[0].spec.name == "joint");
  CHECK(result.targets[0].spec.columns == std::vector<std::string>{"x"});
  CHECK(result.targets[0].k_groups == 3);
  REQUIRE(result.targets[0].posterior.draws.size() == 200);

  REQUIRE(report.at("unl").size() == 1);
  const Json& block = report.at("unl")[0];
  CHECK(block.at("name").get<std::string>() == "joint");
  CHECK(block.at("n_draws").get<int>() == 200);
  CHECK(block.at("k_groups").get<int>() == 3);
  REQUIRE(block.at("draws").size() == 200);
  REQUIRE(block.at("variance_bound").size() == 200);
  for (std::size_t s = 0; s < 200; ++s) {
    const double value = block.at("draws")[s].get<double>();
    CHECK(value >= 1.0);
    CHECK(value <= 3.0 + 1e-9);
    const double bound = block.at("variance_bound")[s].get<double>();
    CHECK(bound == doctest::Approx(variance_bound(3, value, 500)).epsilon(1e-12));
  }
  const double mean = block.at("mean").get<double>();
  CHECK(mean > 2.3);
  CHECK(block.at("stderr_bound_at_mean").get<double>() ==
        doctest::Approx(std::sqrt(variance_bound(3, mean, 500))).epsilon(1e-12));
  CHECK(block.at("q025").get<double>() <= block.at("q500").get<double>());
  CHECK(block.at("q500").get<double>() <= block.at("q975").get<double>());

  const Json& fits = report.at("cluster_fit_reports");
  REQUIRE(fits.size() == 3);
  for (const auto& f : fits) {
    CHECK(f.at("sweeps").get<int>() == 400);
    CHECK(f.at("cluster").get<int>() >= 1);
  }
}

TEST_CASE("pipeline reports are byte identical across reruns and threads") {
  const MixedDataset data = simulate_example(ExampleId::A, 80, 7);

  MarginalPipelineConfig cfg;
  cfg.response = {"y"};
  cfg.response_fit = small_dpm(150);
  cfg.covariate_fit = small_dpm(120);
  cfg.m = 200;
  cfg.seed = 3;

  const PipelineResult first = run_marginal_pipeline(data, cfg);
  const PipelineResult second = run_marginal_pipeline(data, cfg);
  CHECK(dump_without_timestamp(first.report) == dump_without_timestamp(second.report));

  MarginalPipelineConfig threaded = cfg;
  threaded.threads = 3;
  const PipelineResult third = run_marginal_pipeline(data, threaded);
  Json left = first.report, right = third.report;
  left.erase("generated_at");
  right.erase("generated_at");
  // The thread count is echoed in the config block; everything computed must
  // still agree bitwise with the serial run.
  left["config"].erase("threads");
  right["config"].erase("threads");
  CHECK(left.dump(2) == right.dump(2));
}

TEST_CASE("marginal pipeline resolves named and defaulted subsets") {
  const MixedDataset data = simulate_example(ExampleId::B, 100, 13);

  MarginalPipelineConfig cfg;
  cfg.response = {"y"};
  cfg.subsets = {{"", {"x1", "x2"}}, {"second", {"x2"}}};
  cfg.response_fit = small_dpm(150);
  cfg.covariate_fit = small_dpm(120);
  cfg.m = 200;
  cfg.seed = 17;

  const PipelineResult result = run_marginal_pipeline(data, cfg);
  REQUIRE(result.targets.size() == 2);
  CHECK(result.targets[0].spec.name == "x1+x2");
  CHECK(result.targets[1].spec.name == "second");
  CHECK(result.report.at("unl")[0].at("columns") == Json({"x1", "x2"}));
  CHECK(result.report.at("unl")[1].at("columns") == Json({"x2"}));
}

TEST_CASE("conditional pipeline runs the ppc block") {
  const MixedDataset data = simulate_example(ExampleId::C2, 150, 9);

  ConditionalPipelineConfig cfg;
  cfg.response = "y";
  cfg.response_fit = small_lddp(400);
  cfg.covariate_fit = small_dpm(150);
  cfg.m = 300;
  cfg.seed = 21;
  cfg.ppc.enabled = true;
  cfg.ppc.n_rep = 15;

  const PipelineResult result = run_conditional_pipeline(data, cfg);
  CHECK(result.partition.k >= 2);

  const Json& report = result.report;
  CHECK(report.at("kind").get<std::string>() == "conditional-pipeline");
  CHECK(report.at("config").at("regressors") == Json({"x_c", "x_d"}));
  CHECK(report.at("response_fit_report").contains("ridge_repairs"));
  CHECK(report.at("response_fit_report").contains("b_floored"));

  // Default diagnostic pool is the regressors: joint plus each single.
  REQUIRE(result.targets.size() == 3);
  CHECK(result.targets[0].spec.name == "joint");
  CHECK(result.targets[1].spec.name == "x_c");
  CHECK(result.targets[2].spec.name == "x_d");
  for (const auto& t : result.targets) {
    REQUIRE(t.posterior.draws.size() == 150);
    for (const auto& d : t.posterior.draws) {
      CHECK(d.value >= 1.0);
      CHECK(d.value <= static_cast<double>(result.partition.k) + 1e-9);
    }
  }

  const Json& ppc = report.at("ppc");
  CHECK(ppc.at("n_rep").get<int>() == 15);
  CHECK(ppc.at("condition_on").get<std::string>() == "x_c");
  REQUIRE(ppc.at("cutoff_values").size() == 3);
  CHECK(ppc.at("cutoff_values")[0].get<double>() < ppc.at("cutoff_values")[1].get<double>());
  CHECK(ppc.at("cutoff_values")[1].get<double>() < ppc.at("cutoff_values")[2].get<double>());
  CHECK(ppc.at("replicates").at("sd").size() == 15);
  CHECK(ppc.at("replicates").at("skewness").size() == 15);
  CHECK(ppc.at("replicates").at("kurtosis").size() == 15);
  CHECK(ppc.at("replicates").at("max").size() == 15);
  CHECK(std::isfinite(ppc.at("observed").at("sd").get<double>()));

  const Json& intervals = ppc.at("intervals");
  REQUIRE(intervals.size() == 4);
  int covered = 0;
  for (const auto& interval : intervals) {
    const int n_bin = interval.at("n_obs").get<int>();
    covered += n_bin;
    CHECK(interval.at("observed_y").size() == static_cast<std::size_t>(n_bin));
    CHECK(interval.at("replicate_y").size() == static_cast<std::size_t>(n_bin) * 15);
  }
  CHECK(covered == 150);
  CHECK_FALSE(intervals[0].contains("lo"));
  CHECK_FALSE(intervals[3].contains("hi"));
}

TEST_CASE("single cluster partitions skip the unl stages with a notice") {
  const MixedDataset data = unimodal_frame(80, 29);

  MarginalPipelineConfig cfg;
  cfg.response = {"y"};
  cfg.response_fit = small_dpm(200);
  cfg.covariate_fit = small_dpm(100);
  cfg.m = 100;
  cfg.seed = 31;

  const PipelineResult result = run_marginal_pipeline(data, cfg);
  CHECK(result.partition.k == 1);
  CHECK(result.targets.empty());
  CHECK(result.report.at("unl").empty());
  CHECK_FALSE(result.report.contains("cluster_fit_reports"));

  bool found = false;
  for (const auto& notice : result.report.at("notices")) {
    if (notice.get<std::string>() == "K=1, UNL undefined for one group") found = true;
  }
  CHECK(found);
}

TEST_CASE("pipeline errors carry their stage tags") {
  SUBCASE("hyperparameter derivation") {
    MixedDataset tiny = unimodal_frame(8, 41);
    MarginalPipelineConfig cfg;
    cfg.response = {"y"};
    cfg.response_fit = small_dpm(50);
    try {
      run_marginal_pipeline(tiny, cfg);
      FAIL("expected an argument error");
    } catch (const ArgumentError& e) {
      CHECK(std::string(e.what()).rfind("stage derive-dpm: ", 0) == 0);
    }
  }

  SUBCASE("covariate density fits reject a tiny cluster") {
    // 40 points at 0 and 4 points at 100: two certain clusters, the second
    // below the five-member floor for its own covariate fit.
    Rng rng(43);
    MixedDataset d;
    d.names = {"y", "x"};
    d.kinds = {ColumnKind::continuous, ColumnKind::continuous};
    d.block_pos = {0, 1};
    d.cont.resize(44, 2);
    d.cat.resize(44, 0);
    for (int i = 0; i < 44; ++i) {
      d.cont(i, 0) = (i < 40 ? 0.0 : 100.0) + 0.1 * rng.normal();
      d.cont(i, 1) = rng.normal();
    }
    MarginalPipelineConfig cfg;
    cfg.response = {"y"};
    cfg.response_fit = small_dpm(200);
    cfg.covariate_fit = small_dpm(100);
    cfg.seed = 47;
    try {
      run_marginal_pipeline(d, cfg);
      FAIL("expected an argument error");
    } catch (const ArgumentError& e) {
      const std::string what = e.what();
      CHECK(what.rfind("stage covariate-densities: ", 0) == 0);
      CHECK(what.find("cluster 2") != std::string::npos);
    }
  }

  SUBCASE("ppc config rejections precede any fitting") {
    const MixedDataset data = unimodal_frame(60, 53);
    ConditionalPipelineConfig cfg;
    cfg.response = "y";
    cfg.ppc.enabled = true;

    cfg.ppc.n_rep = 0;
    try {
      run_conditional_pipeline(data, cfg);
      FAIL("expected an argument error");
    } catch (const ArgumentError& e) {
      CHECK(std::string(e.what()).find("n_rep") != std::string::npos);
    }

    cfg.ppc.n_rep = 5;
    cfg.ppc.quantile_cutoffs = {0.5, 0.5};
    CHECK_THROWS_AS(run_conditional_pipeline(data, cfg), ArgumentError);

    cfg.ppc.quantile_cutoffs = {0.0, 0.5};
    CHECK_THROWS_AS(run_conditional_pipeline(data, cfg), ArgumentError);
  }
}

TEST_CASE("pipeline configs are validated before any fitting") {
  const MixedDataset data = simulate_example(ExampleId::C1, 30, 57);

  SUBCASE("marginal") {
    MarginalPipelineConfig cfg;
    CHECK_THROWS_AS(run_marginal_pipeline(data, cfg), ArgumentError);

    cfg.response = {"y"};
    cfg.m = 0;
    CHECK_THROWS_AS(run_marginal_pipeline(data, cfg), ArgumentError);
    cfg.m = 100;
    cfg.threads = 0;
    CHECK_THROWS_AS(run_marginal_pipeline(data, cfg), ArgumentError);
    cfg.threads = 1;

    cfg.covariates = {"y"};
    CHECK_THROWS_AS(run_marginal_pipeline(data, cfg), ArgumentError);
    cfg.covariates = {"nope"};
    CHECK_THROWS_AS(run_marginal_pipeline(data, cfg), ArgumentError);
    cfg.covariates.clear();

    cfg.subsets = {{"bad", {}}};
    CHECK_THROWS_AS(run_marginal_pipeline(data, cfg), ArgumentError);
    cfg.subsets = {{"bad", {"nope"}}};
    CHECK_THROWS_AS(run_marginal_pipeline(data, cfg), ArgumentError);
    cfg.subsets = {{"bad", {"x_c", "x_c"}}};
    CHECK_THROWS_AS(run_marginal_pipeline(data, cfg), ArgumentError);
    cfg.subsets.clear();

    cfg.response = {"y", "x_c", "x_d"};
    CHECK_THROWS_AS(run_marginal_pipeline(data, cfg), ArgumentError);
  }

  SUBCASE("conditional") {
    ConditionalPipelineConfig cfg;
    CHECK_THROWS_AS(run_conditional_pipeline(data, cfg), ArgumentError);

    cfg.response = "x_d";
    CHECK_THROWS_AS(run_conditional_pipeline(data, cfg), ArgumentError);

    cfg.response = "y";
    cfg.regressors = {"y"};
    CHECK_THROWS_AS(run_conditional_pipeline(data, cfg), ArgumentError);
    cfg.regressors = {"missing"};
    CHECK_THROWS_AS(run_conditional_pipeline(data, cfg), ArgumentError);
    cfg.regressors.clear();

    cfg.covariates = {"y"};
    CHECK_THROWS_AS(run_conditional_pipeline(data, cfg), ArgumentError);
    cfg.covariates.clear();

    cfg.ppc.enabled = true;
    cfg.ppc.condition_on = "missing";
    CHECK_THROWS_AS(run_conditional_pipeline(data, cfg), ArgumentError);
  }
}

TEST_CASE("design matrices take an intercept plus named columns") {
  MixedDataset d;
  d.names = {"a", "g", "b"};
  d.kinds = {ColumnKind::continuous, ColumnKind::categorical, ColumnKind::continuous};
  d.block_pos = {0, 0, 1};
  d.levels = {{"red", "blue"}};
  d.cont.resize(3, 2);
  d.cont << 1.5, 10.0, -2.0, 20.0, 0.25, 30.0;
  d.cat.resize(3, 1);
  d.cat << 0, 1, 0;

  const Eigen::MatrixXd x = build_design_matrix(d, {"b", "g"});
  REQUIRE(x.rows() == 3);
  REQUIRE(x.cols() == 3);
  CHECK(x.col(0).isConstant(1.0));
  CHECK(x(0, 1) == 10.0);
  CHECK(x(2, 1) == 30.0);
  CHECK(x(0, 2) == 0.0);
  CHECK(x(1, 2) == 1.0);
  CHECK(x(2, 2) == 0.0);

  CHECK_THROWS_AS(build_design_matrix(d, {}), ArgumentError);
  CHECK_THROWS_AS(build_design_matrix(d, {"nope"}), ArgumentError);
}

TEST_CASE("unl posterior summaries echo the draw diagnostics") {
  UnlPosterior posterior;
  const double values[] = {1.0, 2.5, 1.5, 2.0};
  for (int s = 0; s < 4; ++s) {
    UnlEstimate d;
    d.value = values[s];
    d.m = 100;
    d.ess = 10.0 * (s + 1);
    d.weight_max = 1.0 + s;
    posterior.draws.push_back(d);
  }

  const Json block = unl_posterior_summary(posterior, 3, 100);
  CHECK(block.at("k_groups").get<int>() == 3);
  CHECK(block.at("m").get<int>() == 100);
  CHECK(block.at("n_draws").get<int>() == 4);
  CHECK(block.at("mean").get<double>() == doctest::Approx(1.75).epsilon(1e-15));
  CHECK(block.at("sd").get<double>() == doctest::Approx(std::sqrt(1.25 / 3.0)).epsilon(1e-12));

  // Type-7 quantiles of {1.0, 1.5, 2.0, 2.5}.
  CHECK(block.at("q025").get<double>() == doctest::Approx(1.0375).epsilon(1e-12));
  CHECK(block.at("q500").get<double>() == doctest::Approx(1.75).epsilon(1e-12));
  CHECK(block.at("q975").get<double>() == doctest::Approx(2.4625).epsilon(1e-12));
  CHECK(block.at("stderr_bound_at_mean").get<double>() ==
        doctest::Approx(std::sqrt(variance_bound(3, 1.75, 100))).epsilon(1e-12));

  CHECK(block.at("draws") == Json({1.0, 2.5, 1.5, 2.0}));
  CHECK(block.at("ess") == Json({10.0, 20.0, 30.0, 40.0}));
  CHECK(block.at("weight_max") == Json({1.0, 2.0, 3.0, 4.0}));
  for (int s = 0; s < 4; ++s) {
    CHECK(block.at("variance_bound")[s].get<double>() ==
          doctest::Approx(variance_bound(3, values[s], 100)).epsilon(1e-12));
  }
}

TEST_CASE("emitters write the documented formats") {
  SUBCASE("report json is pretty printed with a trailing newline") {
    const auto path = scratch_file("report.json");
    write_report_json(Json{{"b", 1}, {"a", Json::array({1, 2})}}, path.string());
    CHECK(read_file(path) == "{\n  \"a\": [\n    1,\n    2\n  ],\n  \"b\": 1\n}\n");
  }

  SUBCASE("partition csv is one based") {
    const auto path = scratch_file("partition.csv");
    Partition partition;
    partition.labels = {0, 1, 0};
    partition.k = 2;
    write_partition_csv(partition, path.string());
    CHECK(read_file(path) == "row,label\n1,1\n2,2\n3,1\n");
  }

  SUBCASE("draws csv carries the per draw diagnostics") {
    const auto path = scratch_file("draws.csv");
    UnlPosterior posterior;
    UnlEstimate d;
    d.value = 1.5;
    d.ess = 2.25;
    d.weight_max = 3.0;
    posterior.draws.push_back(d);
    write_unl_draws_csv(posterior, path.string());
    CHECK(read_file(path) == "s,value,ess,weight_max\n1,1.5,2.25,3\n");
  }

  SUBCASE("similarity csv is a headerless dense matrix") {
    const auto path = scratch_file("psm.csv");
    Eigen::MatrixXd psm(2, 2);
    psm << 1.0, 0.5, 0.25, 1.0;
    write_similarity_csv(psm, path.string());
    CHECK(read_file(path) == "1,0.5\n0.25,1\n");
  }

  SUBCASE("unwritable paths fail loudly") {
    const std::string bad = "/nonexistent_dir_for_sure/out.json";
    CHECK_THROWS_AS(write_report_json(Json::object(), bad), ArgumentError);
    CHECK_THROWS_AS(write_partition_csv(Partition{}, bad), ArgumentError);
    CHECK_THROWS_AS(write_unl_draws_csv(UnlPosterior{}, bad), ArgumentError);
    CHECK_THROWS_AS(write_similarity_csv(Eigen::MatrixXd(), bad), ArgumentError);
  }
}
