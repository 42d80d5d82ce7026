// Benchmark for the underlap importance sampling kernel: the serial reference
// path against the OpenMP path over the posterior model matrix. Before timing
// anything the main() asserts the two paths agree bitwise, which is the
// contract the threads parameter promises.

#include <cstdio>
#include <cstdlib>
#include <vector>

#include <benchmark/benchmark.h>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <Eigen/Dense>

#include "underlap/density.hpp"
#include "underlap/unl.hpp"

namespace {

using namespace underlap;

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

// S x K matrix of small bivariate mixtures, varied enough per row that the
// per-row seeds matter.
std::vector<std::vector<DensityModel>> make_models(int s_rows, int k_groups) {
  const Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(2, 2);
  std::vector<std::vector<DensityModel>> rows;
  rows.reserve(static_cast<std::size_t>(s_rows));
  for (int s = 0; s < s_rows; ++s) {
    std::vector<DensityModel> groups;
    groups.reserve(static_cast<std::size_t>(k_groups));
    for (int k = 0; k < k_groups; ++k) {
      const double shift = 1.5 * k + 0.01 * s;
      Eigen::VectorXd w(2);
      w << 0.6, 0.4;
      std::vector<DensityModel> comps;
      comps.emplace_back(Gaussian(vec2(shift, -shift), cov));
      comps.emplace_back(Gaussian(vec2(shift + 0.5, shift), 1.3 * cov));
      groups.emplace_back(Mixture(w, std::move(comps)));
    }
    rows.push_back(std::move(groups));
  }
  return rows;
}

bool bitwise_equal(const UnlPosterior& a, const UnlPosterior& b) {
  if (a.draws.size() != b.draws.size()) return false;
  for (std::size_t i = 0; i < a.draws.size(); ++i) {
    if (a.draws[i].value != b.draws[i].value) return false;
    if (a.draws[i].ess != b.draws[i].ess) return false;
    if (a.draws[i].weight_max != b.draws[i].weight_max) return false;
  }
  return true;
}

// range(0) selects the thread count, with 0 standing for "all available".
void bench_posterior(benchmark::State& state) {
  const int requested = static_cast<int>(state.range(0));
  const int threads = requested == 0 ? max_threads() : requested;
  const auto models = make_models(64, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_unl_posterior(models, 2000, 7, threads));
  }
  state.counters["threads"] = threads;
}

}  // namespace

BENCHMARK(bench_posterior)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  // Parity gate first: the threaded path must reproduce the serial reference
  // exactly, not approximately.
  const auto models = make_models(64, 3);
  const UnlPosterior serial = estimate_unl_posterior(models, 2000, 7, 1);
  const UnlPosterior threaded = estimate_unl_posterior(models, 2000, 7, max_threads());
  if (!bitwise_equal(serial, threaded)) {
    std::fprintf(stderr, "FAIL: serial and threaded posteriors differ\n");
    return 1;
  }
  std::printf("parity: serial and %d-thread posteriors are bitwise identical (%zu draws)\n",
              max_threads(), serial.draws.size());

  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
