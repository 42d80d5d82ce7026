#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "oracles.hpp"
#include "underlap/density.hpp"
#include "underlap/errors.hpp"
#include "underlap/rng.hpp"
#include "underlap/unl.hpp"

using namespace underlap;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

DensityModel normal_1d(double mean, double sd = 1.0) {
  Eigen::VectorXd m(1);
  m << mean;
  Eigen::MatrixXd c(1, 1);
  c << sd * sd;
  return Gaussian(std::move(m), std::move(c));
}

// Random 1-d group: a mixture of 1..3 normals with means in (-3, 3) and
// variances in (0.5, 2).
DensityModel random_group_1d(Rng& rng) {
  const int n_comp = 1 + rng.uniform_int(3);
  Eigen::VectorXd w = rng.dirichlet(Eigen::VectorXd::Ones(n_comp));
  std::vector<DensityModel> comps;
  for (int c = 0; c < n_comp; ++c) {
    comps.push_back(normal_1d(-3.0 + 6.0 * rng.uniform(), std::sqrt(0.5 + 1.5 * rng.uniform())));
  }
  return Mixture(std::move(w), std::move(comps));
}

// Random 2-d group: a mixture of 1..3 full-covariance Gaussians.
DensityModel random_group_2d(Rng& rng) {
  const int n_comp = 1 + rng.uniform_int(3);
  Eigen::VectorXd w = rng.dirichlet(Eigen::VectorXd::Ones(n_comp));
  std::vector<DensityModel> comps;
  for (int c = 0; c < n_comp; ++c) {
    Eigen::VectorXd mu = vec({-3.0 + 6.0 * rng.uniform(), -3.0 + 6.0 * rng.uniform()});
    Eigen::MatrixXd a(2, 2);
    a << rng.normal(), rng.normal(), rng.normal(), rng.normal();
    Eigen::MatrixXd sigma = 0.25 * a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(2, 2);
    comps.push_back(Gaussian(std::move(mu), std::move(sigma)));
  }
  return Mixture(std::move(w), std::move(comps));
}

std::vector<GridAxis> grid_1d(double half_width = 25.0, double step = 0.01) {
  return {{-half_width, half_width, step}};
}

std::vector<GridAxis> grid_2d(double half_width = 15.0, double step = 0.1) {
  return {{-half_width, half_width, step}, {-half_width, half_width, step}};
}

// Exact law of a 1x2 projection of a (mixture of) bivariate Gaussian(s).
DensityModel project_1x2(const DensityModel& model, const Eigen::RowVector2d& p) {
  if (const auto* g = std::get_if<Gaussian>(&model.node())) {
    Eigen::VectorXd mu(1);
    mu << p * g->mean();
    Eigen::MatrixXd cov(1, 1);
    cov << p * g->cov() * p.transpose();
    return Gaussian(std::move(mu), std::move(cov));
  }
  const auto& mix = std::get<Mixture>(model.node());
  std::vector<DensityModel> comps;
  for (const auto& c : mix.components()) comps.push_back(project_1x2(c, p));
  return Mixture(mix.weights(), std::move(comps));
}

}  // namespace

TEST_CASE("identical groups give unit weights exactly") {
  const DensityModel g = normal_1d(0.7, 1.4);
  for (int k : {2, 3, 5}) {
    const std::vector<DensityModel> groups(k, g);
    const UnlEstimate est = estimate_unl(groups, 500, 123);
    CHECK(est.value == 1.0);
    CHECK(est.weight_mean == 1.0);
    CHECK(est.weight_max == 1.0);
    CHECK(est.ess == doctest::Approx(500.0).epsilon(1e-15));
    CHECK(est.m == 500);
  }
}

TEST_CASE("disjoint categorical supports give weight K exactly") {
  const DensityModel p1 = CategoricalProduct({vec({1.0, 0.0})});
  const DensityModel p2 = CategoricalProduct({vec({0.0, 1.0})});
  const UnlEstimate est = estimate_unl({p1, p2}, 300, 9);
  CHECK(est.value == 2.0);
  CHECK(est.weight_max == 2.0);
}

TEST_CASE("two unit normals estimate the closed form 2 Phi(d/2)") {
  const double expected[] = {1.0, 1.3829249225480262, 1.6826894921370859, 1.9544997361036416};
  const double ds[] = {0.0, 1.0, 2.0, 4.0};
  for (int i = 0; i < 4; ++i) {
    const std::vector<DensityModel> groups = {normal_1d(0.0), normal_1d(ds[i])};
    const UnlEstimate est = estimate_unl(groups, 200000, 1000 + i);
    CHECK(std::abs(est.value - expected[i]) <= 0.01);
    CHECK(est.value >= 1.0);
    CHECK(est.value <= 2.0);
    CHECK(est.weight_max <= 2.0 + 1e-9);
  }
}

TEST_CASE("estimate_unl is deterministic and validates input") {
  const std::vector<DensityModel> groups = {normal_1d(0.0), normal_1d(1.0)};
  const UnlEstimate a = estimate_unl(groups, 5000, 77);
  const UnlEstimate b = estimate_unl(groups, 5000, 77);
  CHECK(a.value == b.value);
  CHECK(a.ess == b.ess);
  CHECK(a.seed == 77);

  CHECK_THROWS_AS(estimate_unl({normal_1d(0.0)}, 100, 1), ArgumentError);
  CHECK_THROWS_AS(estimate_unl(groups, 0, 1), ArgumentError);
  const DensityModel g2 = Gaussian(vec({0.0, 0.0}), Eigen::MatrixXd::Identity(2, 2));
  CHECK_THROWS_AS(estimate_unl({normal_1d(0.0), g2}, 100, 1), ShapeError);
}

TEST_CASE("posterior loop derives per-row seeds and matches the serial path") {
  Rng rng(2024);
  std::vector<std::vector<DensityModel>> rows;
  for (int s = 0; s < 16; ++s) {
    rows.push_back({random_group_1d(rng), random_group_1d(rng), random_group_1d(rng)});
  }
  const UnlPosterior serial = estimate_unl_posterior(rows, 400, 5150, 1);
  const UnlPosterior parallel = estimate_unl_posterior(rows, 400, 5150, 8);
  REQUIRE(serial.draws.size() == 16);
  REQUIRE(parallel.draws.size() == 16);
  for (int s = 0; s < 16; ++s) {
    CHECK(serial.draws[s].value == parallel.draws[s].value);
    CHECK(serial.draws[s].ess == parallel.draws[s].ess);
    CHECK(serial.draws[s].weight_max == parallel.draws[s].weight_max);
    CHECK(serial.draws[s].seed == split_seed(5150, static_cast<std::uint64_t>(s)));
  }

  // A single row reduces to estimate_unl under the derived seed.
  const UnlPosterior one = estimate_unl_posterior({rows[0]}, 400, 31, 1);
  const UnlEstimate direct = estimate_unl(rows[0], 400, split_seed(31, 0));
  CHECK(one.draws[0].value == direct.value);

  CHECK_THROWS_AS(estimate_unl_posterior({}, 100, 1, 1), ShapeError);
  std::vector<std::vector<DensityModel>> ragged = {rows[0], {rows[1][0], rows[1][1]}};
  CHECK_THROWS_AS(estimate_unl_posterior(ragged, 100, 1, 1), ShapeError);
}

TEST_CASE("variance bound formula and domain") {
  CHECK(variance_bound(5, 1.0, 1000) == doctest::Approx(4.0 / 1000.0).epsilon(1e-15));
  CHECK(variance_bound(3, 1.5, 5000) == doctest::Approx(4.5e-4).epsilon(1e-15));
  CHECK(variance_bound(4, 4.0, 10) == doctest::Approx(0.0));
  CHECK(variance_bound(2, 1.0, 7) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  CHECK_THROWS_AS(variance_bound(3, 0.5, 100), ArgumentError);
  CHECK_THROWS_AS(variance_bound(3, 3.5, 100), ArgumentError);
  CHECK_THROWS_AS(variance_bound(3, 2.0, 0), ArgumentError);
}

TEST_CASE("exact discrete underlap on hand-checkable pmfs") {
  const DensityModel a = CategoricalProduct({vec({0.7, 0.3})});
  const DensityModel b = CategoricalProduct({vec({0.4, 0.6})});
  CHECK(unl_exact_discrete({a, b}) == doctest::Approx(1.3).epsilon(1e-15));

  const DensityModel c = CategoricalProduct({vec({0.2, 0.8})});
  const DensityModel d = CategoricalProduct({vec({0.7, 0.3})});
  CHECK(unl_exact_discrete({c, d}) == doctest::Approx(1.5).epsilon(1e-15));

  const DensityModel e1 = CategoricalProduct({vec({1.0, 0.0})});
  const DensityModel e2 = CategoricalProduct({vec({0.0, 1.0})});
  const DensityModel e3 = CategoricalProduct({vec({0.5, 0.5})});
  CHECK(unl_exact_discrete({e1, e2, e3}) == doctest::Approx(2.0).epsilon(1e-15));

  CHECK(unl_exact_discrete({a, a, a}) == doctest::Approx(1.0).epsilon(1e-15));

  // Product spaces: two independent binary variables.
  const DensityModel f1 = CategoricalProduct({vec({0.9, 0.1}), vec({0.5, 0.5})});
  const DensityModel f2 = CategoricalProduct({vec({0.1, 0.9}), vec({0.5, 0.5})});
  // max over the 4 cells: .45,.45 on the dominant rows of each group,
  // .05,.05 elsewhere -> .45*2 + .05*2 ... both groups give the same mass
  // pattern, so sum max = 2*(0.45 + 0.45)/... spelled out: cells (0,*) have
  // max(0.45, 0.05) and (1,*) max(0.05, 0.45).
  CHECK(unl_exact_discrete({f1, f2}) == doctest::Approx(4 * 0.45).epsilon(1e-14));

  // Mixtures of categorical products are discrete too.
  const Mixture mix(vec({0.5, 0.5}), {a, b});
  CHECK(unl_exact_discrete({a, mix}) ==
        doctest::Approx(std::max(0.7, 0.55) + std::max(0.3, 0.45)).epsilon(1e-14));

  CHECK_THROWS_AS(unl_exact_discrete({normal_1d(0.0), normal_1d(1.0)}), ArgumentError);
}

TEST_CASE("exact discrete underlap refuses oversized state spaces") {
  // 24 binary variables = 2^24 ~ 1.7e7 states, just past the 1e7 cap.
  std::vector<Eigen::VectorXd> probs(24, vec({0.5, 0.5}));
  const DensityModel big = CategoricalProduct(probs);
  CHECK_THROWS_AS(unl_exact_discrete({big, big}), CapacityError);

  // 23 binaries (~8.4e6) are inside the cap and identical groups give 1.
  std::vector<Eigen::VectorXd> probs23(23, vec({0.5, 0.5}));
  const DensityModel ok = CategoricalProduct(probs23);
  CHECK(unl_exact_discrete({ok, ok}) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("quadrature oracle reproduces closed forms") {
  CHECK(unl_quadrature({normal_1d(0.0), normal_1d(0.0)}, grid_1d(8.0, 1e-3)) ==
        doctest::Approx(1.0).epsilon(1e-4));
  CHECK(unl_quadrature({normal_1d(0.0), normal_1d(2.0)}, grid_1d(10.0, 1e-3)) ==
        doctest::Approx(1.6826894921370859).epsilon(1e-4));
  // Three well-separated groups: 4 Phi(3) + 2 Phi(3) - 2 in closed form.
  CHECK(unl_quadrature({normal_1d(-6.0), normal_1d(0.0), normal_1d(6.0)}, grid_1d(14.0, 1e-3)) ==
        doctest::Approx(2.994600407872401).epsilon(1e-6));
}

TEST_CASE("quadrature guards its domain") {
  const DensityModel g3 = Gaussian(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3));
  CHECK_THROWS_AS(unl_quadrature({g3, g3}, {{-5, 5, 0.1}, {-5, 5, 0.1}, {-5, 5, 0.1}}),
                  CapacityError);
  CHECK_THROWS_AS(unl_quadrature({normal_1d(0.0), normal_1d(1.0)}, grid_2d()), ArgumentError);
  CHECK_THROWS_AS(unl_quadrature({normal_1d(0.0), normal_1d(1.0)}, {{5.0, -5.0, 0.1}}),
                  ArgumentError);
  // A grid that misses most of one group's mass is rejected.
  CHECK_THROWS_AS(unl_quadrature({normal_1d(0.0), normal_1d(30.0)}, grid_1d(8.0, 0.01)),
                  PreconditionError);
}

TEST_CASE("partition sup identity on tiny discrete spaces") {
  const CategoricalProduct a({vec({0.7, 0.3})});
  const CategoricalProduct b({vec({0.4, 0.6})});
  CHECK(tv_partition_sup_discrete({a, b}) == doctest::Approx(1.3).epsilon(1e-15));

  const CategoricalProduct u({vec({0.2, 0.3, 0.5})});
  CHECK(tv_partition_sup_discrete({u, u, u}) == doctest::Approx(1.0).epsilon(1e-15));

  const CategoricalProduct p1({vec({0.5, 0.3, 0.2})});
  const CategoricalProduct p2({vec({0.2, 0.3, 0.5})});
  CHECK(tv_partition_sup_discrete({p1, p2}) == doctest::Approx(1.3).epsilon(1e-15));

  // Random instances: sup over partitions equals the exact summation.
  Rng rng(404);
  for (int rep = 0; rep < 25; ++rep) {
    const int n_states = 2 + rng.uniform_int(3);
    const int k = 2 + rng.uniform_int(3);
    std::vector<CategoricalProduct> cps;
    std::vector<DensityModel> models;
    for (int g = 0; g < k; ++g) {
      Eigen::VectorXd p = rng.dirichlet(Eigen::VectorXd::Ones(n_states));
      cps.push_back(CategoricalProduct({p}));
      models.push_back(cps.back());
    }
    const double sup = tv_partition_sup_discrete(cps);
    const double exact = unl_exact_discrete(models);
    CHECK(std::abs(sup - exact) <= 1e-12);
  }

  const CategoricalProduct wide({vec({0.25, 0.25, 0.25, 0.25}), vec({0.5, 0.5})});
  CHECK_THROWS_AS(tv_partition_sup_discrete({wide, wide}), CapacityError);
  CHECK_THROWS_AS(tv_partition_sup_discrete({a, b}, 9), ArgumentError);
}

TEST_CASE("importance sampling agrees with the exact discrete value") {
  Rng rng(31337);
  for (int rep = 0; rep < 20; ++rep) {
    const int k = 2 + rng.uniform_int(3);
    const int n_states = 2 + rng.uniform_int(5);
    std::vector<DensityModel> groups;
    for (int g = 0; g < k; ++g) {
      groups.push_back(CategoricalProduct({rng.dirichlet(Eigen::VectorXd::Ones(n_states))}));
    }
    const double exact = unl_exact_discrete(groups);
    const int m = 100000;
    const UnlEstimate est = estimate_unl(groups, m, split_seed(8888, rep));
    const double tol = 4.0 * std::sqrt(variance_bound(k, exact, m));
    CHECK(std::abs(est.value - exact) <= tol);
    CHECK(est.value >= 1.0 - 1e-12);
    CHECK(est.value <= k + 1e-12);
    CHECK(est.weight_max <= k + 1e-9);
    CHECK(est.ess > 0.0);
    CHECK(est.ess <= m + 1e-6);
  }
}

TEST_CASE("property: oracle agreement for random gaussian mixture groups") {
  Rng rng(555);
  for (int rep = 0; rep < 6; ++rep) {
    const int k = 2 + rng.uniform_int(3);
    std::vector<DensityModel> groups;
    for (int g = 0; g < k; ++g) groups.push_back(random_group_1d(rng));
    const double truth = unl_quadrature(groups, grid_1d(25.0, 0.02));
    const int m = 100000;
    const UnlEstimate est = estimate_unl(groups, m, split_seed(616, rep));
    CHECK(std::abs(est.value - truth) <= 4.0 * std::sqrt(variance_bound(k, truth, m)));
  }
  for (int rep = 0; rep < 4; ++rep) {
    const int k = 2 + rng.uniform_int(3);
    std::vector<DensityModel> groups;
    for (int g = 0; g < k; ++g) groups.push_back(random_group_2d(rng));
    const double truth = unl_quadrature(groups, grid_2d());
    const int m = 100000;
    const UnlEstimate est = estimate_unl(groups, m, split_seed(617, rep));
    CHECK(std::abs(est.value - truth) <= 4.0 * std::sqrt(variance_bound(k, truth, m)));
  }
}

TEST_CASE("property: two-group estimate matches 1 + total variation") {
  Rng rng(777);
  for (int rep = 0; rep < 6; ++rep) {
    const DensityModel f1 = random_group_1d(rng);
    const DensityModel f2 = random_group_1d(rng);
    const double tv = 0.5 * oracle::riemann(
                                [&](double x) {
                                  Eigen::VectorXd p(1);
                                  p << x;
                                  return std::abs(std::exp(log_density(f1, {p, {}})) -
                                                  std::exp(log_density(f2, {p, {}})));
                                },
                                -25.0, 25.0, 5000);
    const int m = 100000;
    const UnlEstimate est = estimate_unl({f1, f2}, m, split_seed(14, rep));
    CHECK(std::abs(est.value - (1.0 + tv)) <= 4.0 * std::sqrt(variance_bound(2, 1.0 + tv, m)));
  }
}

TEST_CASE("property: joint underlap dominates marginal underlap") {
  Rng rng(888);
  for (int rep = 0; rep < 6; ++rep) {
    const int k = 2 + rng.uniform_int(3);
    std::vector<DensityModel> groups;
    for (int g = 0; g < k; ++g) groups.push_back(random_group_2d(rng));
    const double joint = unl_quadrature(groups, grid_2d());
    for (int coord = 0; coord < 2; ++coord) {
      std::vector<DensityModel> margs;
      for (const auto& g : groups) margs.push_back(marginalize(g, {coord}));
      const double marginal = unl_quadrature(margs, grid_1d(15.0, 0.01));
      CHECK(joint >= marginal - 1e-6);
    }
  }
}

TEST_CASE("property: affine transformations leave underlap invariant") {
  Rng rng(999);
  for (int rep = 0; rep < 5; ++rep) {
    const int k = 2 + rng.uniform_int(2);
    std::vector<DensityModel> groups;
    for (int g = 0; g < k; ++g) groups.push_back(random_group_2d(rng));
    const double truth = unl_quadrature(groups, grid_2d());

    Eigen::MatrixXd a(2, 2);
    do {
      a << rng.normal(), rng.normal(), rng.normal(), rng.normal();
    } while (std::abs(a.determinant()) < 0.3);
    const Eigen::VectorXd b = vec({rng.normal(), rng.normal()});
    std::vector<DensityModel> pushed;
    for (const auto& g : groups) pushed.push_back(affine_pushforward(g, a, b));

    const int m = 100000;
    const UnlEstimate est = estimate_unl(pushed, m, split_seed(2718, rep));
    CHECK(std::abs(est.value - truth) <= 4.0 * std::sqrt(variance_bound(k, truth, m)));
  }
}

TEST_CASE("property: linear projections cannot increase underlap") {
  Rng rng(1111);
  for (int rep = 0; rep < 6; ++rep) {
    const int k = 2 + rng.uniform_int(3);
    std::vector<DensityModel> groups;
    for (int g = 0; g < k; ++g) groups.push_back(random_group_2d(rng));
    const double joint = unl_quadrature(groups, grid_2d());

    Eigen::RowVector2d p;
    do {
      p << rng.normal(), rng.normal();
    } while (p.norm() < 0.3);
    std::vector<DensityModel> projected;
    for (const auto& g : groups) projected.push_back(project_1x2(g, p));
    // Projected means can sit anywhere in p * [-3,3]^2, so widen the axis
    // with the projection norm.
    const double reach = 25.0 * p.cwiseAbs().sum() + 25.0;
    const double proj = unl_quadrature(projected, grid_1d(reach, reach / 2500.0));
    CHECK(proj <= joint + 1e-6);
  }
}

TEST_CASE("property: adding the pooled mixture as a new group changes nothing") {
  Rng rng(1234);
  for (int rep = 0; rep < 5; ++rep) {
    const int k = 2 + rng.uniform_int(2);
    std::vector<DensityModel> groups;
    for (int g = 0; g < k; ++g) groups.push_back(random_group_1d(rng));
    const double base = unl_quadrature(groups, grid_1d(25.0, 0.02));

    const Eigen::VectorXd w = rng.dirichlet(Eigen::VectorXd::Ones(k));
    std::vector<DensityModel> extended = groups;
    extended.push_back(Mixture(w, groups));
    const double extended_truth = unl_quadrature(extended, grid_1d(25.0, 0.02));
    CHECK(std::abs(extended_truth - base) <= 1e-6);

    const int m = 100000;
    const UnlEstimate est = estimate_unl(extended, m, split_seed(3141, rep));
    CHECK(std::abs(est.value - base) <= 4.0 * std::sqrt(variance_bound(k + 1, base, m)));
  }
}

TEST_CASE("property: empirical variance respects the bound") {
  const std::vector<DensityModel> groups = {normal_1d(0.0), normal_1d(1.0)};
  const double truth = 1.3829249225480262;
  const int m = 2000;
  std::vector<double> values;
  for (int rep = 0; rep < 200; ++rep) {
    values.push_back(estimate_unl(groups, m, split_seed(60601, rep)).value);
  }
  CHECK(oracle::variance_of(values) <= 1.5 * variance_bound(2, truth, m));
  CHECK(oracle::mean_of(values) == doctest::Approx(truth).epsilon(0.01));

  // Identical groups: every replication returns exactly 1.
  const std::vector<DensityModel> same = {groups[0], groups[0], groups[0]};
  std::vector<double> ones;
  for (int rep = 0; rep < 50; ++rep) {
    ones.push_back(estimate_unl(same, 200, split_seed(70701, rep)).value);
  }
  CHECK(oracle::variance_of(ones) == 0.0);
  CHECK(ones[0] == 1.0);
}
