#include "underlap/mixtures.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "underlap/errors.hpp"
#include "underlap/kmeans.hpp"
#include "underlap/rng.hpp"

namespace underlap {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

using Json = nlohmann::json;

// Symmetrizes m and factors it, adding an escalating diagonal ridge when the
// factorization fails. Each successful repair bumps *repairs once.
Eigen::LLT<Eigen::MatrixXd> pd_chol(Eigen::MatrixXd* m, int* repairs, const char* what) {
  *m = 0.5 * (*m + m->transpose()).eval();
  Eigen::LLT<Eigen::MatrixXd> llt(*m);
  if (llt.info() == Eigen::Success) return llt;
  const int p = static_cast<int>(m->rows());
  double base = m->trace() / p;
  if (!(base > 0.0)) base = 1.0;
  double eps = 1e-6 * base;
  for (int tries = 0; tries < 30; ++tries) {
    Eigen::MatrixXd repaired = *m + eps * Eigen::MatrixXd::Identity(p, p);
    llt.compute(repaired);
    if (llt.info() == Eigen::Success) {
      *m = repaired;
      if (repairs != nullptr) ++*repairs;
      return llt;
    }
    eps *= 10.0;
  }
  throw NumericError(std::string(what) + ": matrix could not be repaired to positive definite");
}

// Bartlett draw of W ~ Wishart(dof, V) given the lower Cholesky factor of V.
Eigen::MatrixXd wishart_from_chol(Rng& rng, double dof, const Eigen::MatrixXd& chol_l) {
  const int p = static_cast<int>(chol_l.rows());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < p; ++i) {
    a(i, i) = std::sqrt(rng.chi_square(dof - i));
    for (int j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  const Eigen::MatrixXd l = chol_l * a;
  return l * l.transpose();
}

// Draws Sigma ~ IW(dof, scale), i.e. Sigma^{-1} ~ Wishart(dof, scale^{-1}).
Eigen::MatrixXd inverse_wishart(Rng& rng, double dof, Eigen::MatrixXd scale, int* repairs) {
  const int p = static_cast<int>(scale.rows());
  if (dof <= p - 1) {
    throw ArgumentError("inverse_wishart: dof must exceed dimension - 1");
  }
  const auto scale_llt = pd_chol(&scale, repairs, "inverse_wishart scale");
  Eigen::MatrixXd v = scale_llt.solve(Eigen::MatrixXd::Identity(p, p));
  const auto v_llt = pd_chol(&v, repairs, "inverse_wishart inverse scale");
  Eigen::MatrixXd w = wishart_from_chol(rng, dof, v_llt.matrixL());
  const auto w_llt = pd_chol(&w, repairs, "inverse_wishart precision draw");
  Eigen::MatrixXd sigma = w_llt.solve(Eigen::MatrixXd::Identity(p, p));
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  return sigma;
}

// Draws from N(prec^{-1} rhs, prec^{-1}).
Eigen::VectorXd sample_mvn_prec(Rng& rng, Eigen::MatrixXd prec, const Eigen::VectorXd& rhs,
                                int* repairs) {
  const auto llt = pd_chol(&prec, repairs, "posterior precision");
  const Eigen::VectorXd mean = llt.solve(rhs);
  Eigen::VectorXd noise = rng.normal_vector(static_cast<int>(prec.rows()));
  llt.matrixU().solveInPlace(noise);
  return mean + noise;
}

Eigen::VectorXd sample_mvn_chol(Rng& rng, const Eigen::VectorXd& mean,
                                const Eigen::LLT<Eigen::MatrixXd>& cov_llt) {
  return mean + cov_llt.matrixL() * rng.normal_vector(static_cast<int>(mean.size()));
}

// Sample covariance with the n-1 divisor; fewer than two rows give zero.
Eigen::MatrixXd sample_cov(const Eigen::MatrixXd& rows) {
  const long n = rows.rows();
  const long p = rows.cols();
  if (n < 2) return Eigen::MatrixXd::Zero(p, p);
  const Eigen::RowVectorXd mean = rows.colwise().mean();
  const Eigen::MatrixXd centered = rows.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(n - 1);
}

// Stick-breaking weights from v with v[L-1] = 1.
Eigen::VectorXd stick_weights(const Eigen::VectorXd& v) {
  const int l = static_cast<int>(v.size());
  Eigen::VectorXd w(l);
  double remaining = 1.0;
  for (int i = 0; i < l; ++i) {
    w(i) = v(i) * remaining;
    remaining *= 1.0 - v(i);
  }
  return w;
}

void check_common_config(int truncation, double a_alpha, double b_alpha, int n_iter, int n_burn,
                         const char* what) {
  if (truncation < 1) throw ArgumentError(std::string(what) + ": truncation must be at least 1");
  if (n_iter < 1) throw ArgumentError(std::string(what) + ": n_iter must be at least 1");
  if (n_burn < 0) throw ArgumentError(std::string(what) + ": n_burn must be nonnegative");
  if (!(a_alpha > 0.0) || !(b_alpha > 0.0)) {
    throw ArgumentError(std::string(what) + ": alpha hyperprior parameters must be positive");
  }
}

Json vec_to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json mat_to_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}

Eigen::VectorXd json_to_vec(const Json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<int>(i)) = j[i].get<double>();
  return v;
}

Eigen::MatrixXd json_to_mat(const Json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows > 0 ? static_cast<int>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j[static_cast<std::size_t>(i)].size()) != cols) {
      throw ArgumentError("ndjson: ragged matrix");
    }
    for (int k = 0; k < cols; ++k) {
      m(i, k) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
    }
  }
  return m;
}

// Allocation vectors serialize 1-based; this shifts them back.
std::vector<int> json_to_labels(const Json& j) {
  std::vector<int> z(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) z[i] = j[i].get<int>() - 1;
  return z;
}

Json labels_to_json(const std::vector<int>& z) {
  Json out = Json::array();
  for (int zi : z) out.push_back(zi + 1);
  return out;
}

Json parse_ndjson_line(const std::string& line, const char* what) {
  try {
    return Json::parse(line);
  } catch (const Json::exception& e) {
    throw ArgumentError(std::string(what) + ": malformed line: " + e.what());
  }
}

}  // namespace

std::vector<std::vector<int>> DpmDraws::allocations() const {
  std::vector<std::vector<int>> out;
  out.reserve(iterations.size());
  for (const auto& it : iterations) out.push_back(it.z);
  return out;
}

std::vector<std::vector<int>> LddpDraws::allocations() const {
  std::vector<std::vector<int>> out;
  out.reserve(iterations.size());
  for (const auto& it : iterations) out.push_back(it.z);
  return out;
}

DpmHyperparams derive_dpm_hyperparams(const MixedDataset& data, int kmeans_k, std::uint64_t seed,
                                      double tau_k) {
  if (kmeans_k < 3 || kmeans_k > 10) {
    throw ArgumentError("derive_dpm_hyperparams: kmeans_k must be in [3, 10]");
  }
  if (!(tau_k > 0.0)) throw ArgumentError("derive_dpm_hyperparams: tau_k must be positive");
  const int n = data.n();
  const int p = data.p_cont();
  const int q = data.p_cat();
  if (p + q == 0) throw ArgumentError("derive_dpm_hyperparams: dataset has no columns");
  if (n < 2 * kmeans_k) {
    throw ArgumentError("derive_dpm_hyperparams: need at least 2*kmeans_k = " +
                        std::to_string(2 * kmeans_k) + " rows, got " + std::to_string(n));
  }

  DpmHyperparams hp;
  if (p > 0) {
    const Eigen::MatrixXd& y = data.cont;
    hp.m0 = y.colwise().mean().transpose();

    const KmeansResult km = kmeans(y, kmeans_k, seed);
    hp.kmeans_reseeds = km.reseeds;
    hp.L0 = sample_cov(km.centroids);

    // Average within-cluster covariance; clusters too small to have a
    // covariance contribute zero spread.
    Eigen::MatrixXd sw = Eigen::MatrixXd::Zero(p, p);
    for (int k = 0; k < kmeans_k; ++k) {
      std::vector<int> members;
      for (int i = 0; i < n; ++i) {
        if (km.labels[static_cast<std::size_t>(i)] == k) members.push_back(i);
      }
      if (members.size() < 2) continue;
      Eigen::MatrixXd rows(static_cast<int>(members.size()), p);
      for (std::size_t i = 0; i < members.size(); ++i) {
        rows.row(static_cast<int>(i)) = y.row(members[i]);
      }
      sw += sample_cov(rows);
    }
    sw /= static_cast<double>(kmeans_k);

    hp.nu0 = p + 2;
    hp.S0 = (hp.nu0 + p + 1) * sw;
    pd_chol(&hp.L0, &hp.ridge_repairs, "derive_dpm_hyperparams L0");
    pd_chol(&hp.S0, &hp.ridge_repairs, "derive_dpm_hyperparams S0");
  }

  hp.eta.reserve(static_cast<std::size_t>(q));
  for (int k = 0; k < q; ++k) {
    const int card = static_cast<int>(data.levels[static_cast<std::size_t>(k)].size());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(card);
    for (int i = 0; i < n; ++i) counts(data.cat(i, k)) += 1.0;
    // Levels absent from these rows keep a vanishing pseudo-count so the
    // Dirichlet prior stays proper on subset fits.
    Eigen::VectorXd eta = (tau_k / n) * counts;
    for (int j = 0; j < card; ++j) eta(j) = std::max(eta(j), tau_k * 1e-3);
    hp.eta.push_back(eta);
  }
  return hp;
}

DpmDraws fit_dpm(const MixedDataset& data, const DpmHyperparams& hp, const DpmConfig& cfg) {
  check_common_config(cfg.truncation, cfg.a_alpha, cfg.b_alpha, cfg.n_iter, cfg.n_burn, "fit_dpm");
  const int l_max = cfg.truncation;
  const int n = data.n();
  const int p = data.p_cont();
  const int q = data.p_cat();
  if (p + q == 0) throw ArgumentError("fit_dpm: dataset has no columns");

  if (p > 0) {
    if (hp.m0.size() != p || hp.L0.rows() != p || hp.L0.cols() != p || hp.S0.rows() != p ||
        hp.S0.cols() != p) {
      throw ShapeError("fit_dpm: hyperparameter dimensions do not match the continuous block");
    }
    if (!(hp.nu0 > p + 1)) throw ArgumentError("fit_dpm: nu0 must exceed p + 1");
  }
  if (static_cast<int>(hp.eta.size()) != q) {
    throw ShapeError("fit_dpm: need one eta vector per categorical column");
  }
  std::vector<int> cards(static_cast<std::size_t>(q));
  for (int k = 0; k < q; ++k) {
    cards[static_cast<std::size_t>(k)] =
        static_cast<int>(data.levels[static_cast<std::size_t>(k)].size());
    if (hp.eta[static_cast<std::size_t>(k)].size() != cards[static_cast<std::size_t>(k)]) {
      throw ShapeError("fit_dpm: eta vector length does not match column cardinality");
    }
    if (hp.eta[static_cast<std::size_t>(k)].minCoeff() <= 0.0) {
      throw ArgumentError("fit_dpm: eta entries must be positive");
    }
  }

  DpmDraws out;
  out.sig = data.signature();
  out.cfg = cfg;
  out.hp = hp;
  out.iterations.reserve(static_cast<std::size_t>(cfg.n_iter));
  if (n < l_max) {
    out.report.warnings.push_back("n = " + std::to_string(n) +
                                  " is below the truncation level L = " + std::to_string(l_max));
  }

  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(cfg.seed);
  int repairs = 0;

  Eigen::LLT<Eigen::MatrixXd> l0_llt;
  Eigen::MatrixXd l0_inv;
  Eigen::VectorXd l0_inv_m0;
  if (p > 0) {
    Eigen::MatrixXd l0 = hp.L0;
    l0_llt = pd_chol(&l0, &repairs, "fit_dpm L0");
    l0_inv = l0_llt.solve(Eigen::MatrixXd::Identity(p, p));
    l0_inv_m0 = l0_inv * hp.m0;
  }

  // Chain state; component parameter caches refresh whenever sigma changes.
  double alpha = cfg.a_alpha / cfg.b_alpha;
  std::vector<Eigen::VectorXd> mu(static_cast<std::size_t>(l_max));
  std::vector<Eigen::MatrixXd> sigma(static_cast<std::size_t>(l_max));
  std::vector<Eigen::LLT<Eigen::MatrixXd>> sigma_llt(static_cast<std::size_t>(l_max));
  std::vector<double> sigma_logdet_half(static_cast<std::size_t>(l_max), 0.0);
  std::vector<std::vector<Eigen::VectorXd>> catp(static_cast<std::size_t>(l_max));
  Eigen::VectorXd v(l_max);

  const auto refresh_sigma = [&](int l) {
    auto& llt = sigma_llt[static_cast<std::size_t>(l)];
    llt = pd_chol(&sigma[static_cast<std::size_t>(l)], &repairs, "fit_dpm sigma");
    double logdet = 0.0;
    for (int i = 0; i < p; ++i) logdet += std::log(llt.matrixLLT()(i, i));
    sigma_logdet_half[static_cast<std::size_t>(l)] = logdet;
  };

  for (int l = 0; l < l_max; ++l) {
    if (p > 0) {
      mu[static_cast<std::size_t>(l)] = sample_mvn_chol(rng, hp.m0, l0_llt);
      sigma[static_cast<std::size_t>(l)] = inverse_wishart(rng, hp.nu0, hp.S0, &repairs);
      refresh_sigma(l);
    }
    auto& pl = catp[static_cast<std::size_t>(l)];
    pl.resize(static_cast<std::size_t>(q));
    for (int k = 0; k < q; ++k) {
      pl[static_cast<std::size_t>(k)] = rng.dirichlet(hp.eta[static_cast<std::size_t>(k)]);
    }
  }
  for (int l = 0; l < l_max - 1; ++l) v(l) = std::min(rng.beta(1.0, alpha), 1.0 - 1e-12);
  v(l_max - 1) = 1.0;
  Eigen::VectorXd w = stick_weights(v);

  std::vector<int> z(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd logp(l_max);
  Eigen::VectorXd yi;
  const int sweeps = cfg.n_burn + cfg.n_iter;

  for (int sweep = 0; sweep < sweeps; ++sweep) {
    // (i) allocations
    const Eigen::VectorXd logw = w.array().log().matrix();
    for (int i = 0; i < n; ++i) {
      for (int l = 0; l < l_max; ++l) {
        double acc = logw(l);
        if (p > 0) {
          yi = data.cont.row(i).transpose() - mu[static_cast<std::size_t>(l)];
          sigma_llt[static_cast<std::size_t>(l)].matrixL().solveInPlace(yi);
          acc += -0.5 * p * kLog2Pi - sigma_logdet_half[static_cast<std::size_t>(l)] -
                 0.5 * yi.squaredNorm();
        }
        for (int k = 0; k < q; ++k) {
          acc += std::log(
              catp[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)](data.cat(i, k)));
        }
        logp(l) = acc;
      }
      z[static_cast<std::size_t>(i)] = rng.categorical_log(logp);
    }

    std::vector<std::vector<int>> members(static_cast<std::size_t>(l_max));
    for (int i = 0; i < n; ++i) {
      members[static_cast<std::size_t>(z[static_cast<std::size_t>(i)])].push_back(i);
    }

    // (ii) sticks
    int tail = n;
    for (int l = 0; l < l_max; ++l) {
      const int nl = static_cast<int>(members[static_cast<std::size_t>(l)].size());
      tail -= nl;
      if (l < l_max - 1) {
        v(l) = std::min(rng.beta(1.0 + nl, alpha + tail), 1.0 - 1e-12);
      }
    }
    v(l_max - 1) = 1.0;
    w = stick_weights(v);

    // (iii) component means and covariances, two-block semi-conjugate
    if (p > 0) {
      for (int l = 0; l < l_max; ++l) {
        const auto& idx = members[static_cast<std::size_t>(l)];
        const int nl = static_cast<int>(idx.size());
        const Eigen::MatrixXd sigma_inv =
            sigma_llt[static_cast<std::size_t>(l)].solve(Eigen::MatrixXd::Identity(p, p));
        Eigen::VectorXd sum_y = Eigen::VectorXd::Zero(p);
        for (int i : idx) sum_y += data.cont.row(i).transpose();
        const Eigen::MatrixXd prec = l0_inv + nl * sigma_inv;
        const Eigen::VectorXd rhs = l0_inv_m0 + sigma_inv * sum_y;
        mu[static_cast<std::size_t>(l)] = sample_mvn_prec(rng, prec, rhs, &repairs);

        Eigen::MatrixXd scale = hp.S0;
        for (int i : idx) {
          const Eigen::VectorXd d = data.cont.row(i).transpose() - mu[static_cast<std::size_t>(l)];
          scale += d * d.transpose();
        }
        sigma[static_cast<std::size_t>(l)] = inverse_wishart(rng, hp.nu0 + nl, scale, &repairs);
        refresh_sigma(l);
      }
    }

    // (iv) categorical probabilities
    for (int l = 0; l < l_max; ++l) {
      for (int k = 0; k < q; ++k) {
        Eigen::VectorXd conc = hp.eta[static_cast<std::size_t>(k)];
        for (int i : members[static_cast<std::size_t>(l)]) conc(data.cat(i, k)) += 1.0;
        catp[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)] = rng.dirichlet(conc);
      }
    }

    // (v) concentration
    double log_sticks = 0.0;
    for (int l = 0; l < l_max - 1; ++l) log_sticks += std::log(1.0 - v(l));
    alpha = rng.gamma(cfg.a_alpha + l_max - 1, cfg.b_alpha - log_sticks);

    if (sweep >= cfg.n_burn) {
      DpmIteration it;
      it.z = z;
      it.w = w;
      if (p > 0) {
        it.mu = mu;
        it.sigma = sigma;
      }
      if (q > 0) it.catp = catp;
      it.alpha = alpha;
      out.iterations.push_back(std::move(it));
    }
  }

  out.report.sweeps = sweeps;
  out.report.repairs = repairs;
  out.report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

DensityModel dpm_iteration_mixture(const DpmIteration& it, const SupportSignature& sig) {
  const int l_max = static_cast<int>(it.w.size());
  if (l_max == 0) throw ArgumentError("dpm_iteration_mixture: empty iteration");
  const int p = sig.p_continuous;
  const int q = sig.p_categorical();
  std::vector<DensityModel> components;
  components.reserve(static_cast<std::size_t>(l_max));
  for (int l = 0; l < l_max; ++l) {
    if (p > 0 && q > 0) {
      components.emplace_back(
          MixedProduct(Gaussian(it.mu[static_cast<std::size_t>(l)],
                                it.sigma[static_cast<std::size_t>(l)]),
                       CategoricalProduct(it.catp[static_cast<std::size_t>(l)])));
    } else if (p > 0) {
      components.emplace_back(
          Gaussian(it.mu[static_cast<std::size_t>(l)], it.sigma[static_cast<std::size_t>(l)]));
    } else {
      components.emplace_back(CategoricalProduct(it.catp[static_cast<std::size_t>(l)]));
    }
  }
  return Mixture(it.w, std::move(components));
}

std::vector<std::vector<MixedPoint>> dpm_posterior_predictive(const DpmDraws& draws, int n_rows,
                                                              int n_rep, std::uint64_t seed) {
  if (n_rep < 0 || n_rows < 0) {
    throw ArgumentError("dpm_posterior_predictive: counts must be nonnegative");
  }
  if (draws.iterations.empty()) throw ArgumentError("dpm_posterior_predictive: no iterations");
  Rng rng(seed);
  std::vector<std::vector<MixedPoint>> out;
  out.reserve(static_cast<std::size_t>(n_rep));
  const int s_max = static_cast<int>(draws.iterations.size());
  for (int r = 0; r < n_rep; ++r) {
    const int s = rng.uniform_int(s_max);
    const DensityModel model =
        dpm_iteration_mixture(draws.iterations[static_cast<std::size_t>(s)], draws.sig);
    std::vector<MixedPoint> rows;
    rows.reserve(static_cast<std::size_t>(n_rows));
    for (int i = 0; i < n_rows; ++i) rows.push_back(sample_point(model, rng));
    out.push_back(std::move(rows));
  }
  return out;
}

LddpHyperparams derive_lddp_hyperparams(const Eigen::VectorXd& y, const Eigen::MatrixXd& x) {
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  if (y.size() != n) throw ShapeError("derive_lddp_hyperparams: rows(x) must equal len(y)");
  if (p < 1) throw ArgumentError("derive_lddp_hyperparams: empty design matrix");
  if (n <= p + 2) {
    throw ArgumentError("derive_lddp_hyperparams: need n > p + 2, got n = " + std::to_string(n) +
                        ", p = " + std::to_string(p));
  }

  LddpHyperparams hp;
  Eigen::MatrixXd xtx = x.transpose() * x;
  Eigen::LLT<Eigen::MatrixXd> llt(xtx);
  // LLT is not rank-revealing, so a numerically exact column collinearity can
  // slip through with a microscopic pivot; treat that as deficient too.
  const auto deficient = [&]() {
    if (llt.info() != Eigen::Success) return true;
    const Eigen::VectorXd diag = llt.matrixLLT().diagonal();
    return !(diag.minCoeff() > 1e-7 * diag.maxCoeff());
  };
  if (deficient()) {
    // Rank-deficient design; a small ridge restores identifiability.
    double base = xtx.trace();
    if (!(base > 0.0)) base = 1.0;
    xtx += (1e-8 * base) * Eigen::MatrixXd::Identity(p, p);
    llt.compute(xtx);
    if (deficient()) {
      throw NumericError("derive_lddp_hyperparams: design matrix could not be repaired");
    }
    ++hp.ridge_repairs;
  }

  hp.m0 = llt.solve(x.transpose() * y);
  const Eigen::VectorXd resid = y - x * hp.m0;
  double sigma2 = resid.squaredNorm() / static_cast<double>(n - p);
  if (sigma2 < 1e-12) {
    sigma2 = 1e-12;
    hp.b_floored = true;
  }
  const Eigen::MatrixXd xtx_inv = llt.solve(Eigen::MatrixXd::Identity(p, p));
  hp.S0 = sigma2 * 0.5 * (xtx_inv + xtx_inv.transpose());
  hp.nu = p + 2;
  hp.psi = 30.0 * hp.S0;
  hp.a = 2.0;
  hp.b = sigma2 / 2.0;
  if (hp.b < 1e-12) {
    hp.b = 1e-12;
    hp.b_floored = true;
  }
  return hp;
}

LddpDraws fit_lddp(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const LddpHyperparams& hp,
                   const LddpConfig& cfg) {
  check_common_config(cfg.truncation, cfg.a_alpha, cfg.b_alpha, cfg.n_iter, cfg.n_burn,
                      "fit_lddp");
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  const int l_max = cfg.truncation;
  if (y.size() != n) throw ShapeError("fit_lddp: rows(x) must equal len(y)");
  if (hp.m0.size() != p || hp.S0.rows() != p || hp.S0.cols() != p || hp.psi.rows() != p ||
      hp.psi.cols() != p) {
    throw ShapeError("fit_lddp: hyperparameter dimensions do not match the design matrix");
  }
  if (!(hp.nu > p + 1)) throw ArgumentError("fit_lddp: nu must exceed p + 1");
  if (!(hp.a > 0.0) || !(hp.b > 0.0)) throw ArgumentError("fit_lddp: a and b must be positive");

  LddpDraws out;
  out.p = p;
  out.cfg = cfg;
  out.hp = hp;
  out.iterations.reserve(static_cast<std::size_t>(cfg.n_iter));
  if (n < l_max) {
    out.report.warnings.push_back("n = " + std::to_string(n) +
                                  " is below the truncation level L = " + std::to_string(l_max));
  }

  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(cfg.seed);
  int repairs = 0;

  Eigen::MatrixXd s0 = hp.S0;
  const auto s0_llt = pd_chol(&s0, &repairs, "fit_lddp S0");
  const Eigen::MatrixXd s0_inv = s0_llt.solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::VectorXd s0_inv_m0 = s0_inv * hp.m0;
  const Eigen::MatrixXd nu_psi = hp.nu * hp.psi;

  double alpha = cfg.a_alpha / cfg.b_alpha;
  Eigen::MatrixXd sigma = inverse_wishart(rng, hp.nu, nu_psi, &repairs);
  auto sigma_llt = pd_chol(&sigma, &repairs, "fit_lddp sigma");
  Eigen::MatrixXd sigma_inv = sigma_llt.solve(Eigen::MatrixXd::Identity(p, p));
  Eigen::VectorXd mu = sample_mvn_chol(rng, hp.m0, s0_llt);
  Eigen::MatrixXd beta(l_max, p);
  for (int l = 0; l < l_max; ++l) {
    beta.row(l) = sample_mvn_chol(rng, mu, sigma_llt).transpose();
  }
  Eigen::VectorXd tau(l_max);
  for (int l = 0; l < l_max; ++l) tau(l) = rng.gamma(hp.a, hp.b);
  Eigen::VectorXd v(l_max);
  for (int l = 0; l < l_max - 1; ++l) v(l) = std::min(rng.beta(1.0, alpha), 1.0 - 1e-12);
  v(l_max - 1) = 1.0;
  Eigen::VectorXd w = stick_weights(v);

  std::vector<int> z(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd logp(l_max);
  const int sweeps = cfg.n_burn + cfg.n_iter;

  for (int sweep = 0; sweep < sweeps; ++sweep) {
    // (i) allocations; one dense product gives every component's residual
    const Eigen::VectorXd logw = w.array().log().matrix();
    const Eigen::VectorXd log_tau_half = (0.5 * tau.array().log()).matrix();
    const Eigen::MatrixXd fitted = x * beta.transpose();  // n x L
    for (int i = 0; i < n; ++i) {
      for (int l = 0; l < l_max; ++l) {
        const double r = y(i) - fitted(i, l);
        logp(l) = logw(l) + log_tau_half(l) - 0.5 * kLog2Pi - 0.5 * tau(l) * r * r;
      }
      z[static_cast<std::size_t>(i)] = rng.categorical_log(logp);
    }

    std::vector<std::vector<int>> members(static_cast<std::size_t>(l_max));
    for (int i = 0; i < n; ++i) {
      members[static_cast<std::size_t>(z[static_cast<std::size_t>(i)])].push_back(i);
    }

    // (ii) sticks
    int tail = n;
    for (int l = 0; l < l_max; ++l) {
      const int nl = static_cast<int>(members[static_cast<std::size_t>(l)].size());
      tail -= nl;
      if (l < l_max - 1) {
        v(l) = std::min(rng.beta(1.0 + nl, alpha + tail), 1.0 - 1e-12);
      }
    }
    v(l_max - 1) = 1.0;
    w = stick_weights(v);

    // (iii) component coefficients and precisions
    for (int l = 0; l < l_max; ++l) {
      const auto& idx = members[static_cast<std::size_t>(l)];
      Eigen::MatrixXd xtx_l = Eigen::MatrixXd::Zero(p, p);
      Eigen::VectorXd xty_l = Eigen::VectorXd::Zero(p);
      for (int i : idx) {
        xtx_l.noalias() += x.row(i).transpose() * x.row(i);
        xty_l.noalias() += x.row(i).transpose() * y(i);
      }
      const Eigen::MatrixXd prec = sigma_inv + tau(l) * xtx_l;
      const Eigen::VectorXd rhs = sigma_inv * mu + tau(l) * xty_l;
      beta.row(l) = sample_mvn_prec(rng, prec, rhs, &repairs).transpose();

      double rss = 0.0;
      for (int i : idx) {
        const double r = y(i) - x.row(i).dot(beta.row(l));
        rss += r * r;
      }
      tau(l) = rng.gamma(hp.a + 0.5 * idx.size(), hp.b + 0.5 * rss);
    }

    // (iv) base-measure mean and covariance
    Eigen::VectorXd beta_sum = Eigen::VectorXd::Zero(p);
    for (int l = 0; l < l_max; ++l) beta_sum += beta.row(l).transpose();
    const Eigen::MatrixXd mu_prec = s0_inv + l_max * sigma_inv;
    const Eigen::VectorXd mu_rhs = s0_inv_m0 + sigma_inv * beta_sum;
    mu = sample_mvn_prec(rng, mu_prec, mu_rhs, &repairs);

    Eigen::MatrixXd scatter = nu_psi;
    for (int l = 0; l < l_max; ++l) {
      const Eigen::VectorXd d = beta.row(l).transpose() - mu;
      scatter += d * d.transpose();
    }
    sigma = inverse_wishart(rng, hp.nu + l_max, scatter, &repairs);
    sigma_llt = pd_chol(&sigma, &repairs, "fit_lddp sigma");
    sigma_inv = sigma_llt.solve(Eigen::MatrixXd::Identity(p, p));

    // (v) concentration
    double log_sticks = 0.0;
    for (int l = 0; l < l_max - 1; ++l) log_sticks += std::log(1.0 - v(l));
    alpha = rng.gamma(cfg.a_alpha + l_max - 1, cfg.b_alpha - log_sticks);

    if (sweep >= cfg.n_burn) {
      LddpIteration it;
      it.z = z;
      it.w = w;
      it.beta = beta;
      it.tau = tau;
      it.alpha = alpha;
      out.iterations.push_back(std::move(it));
    }
  }

  out.report.sweeps = sweeps;
  out.report.repairs = repairs;
  out.report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

Eigen::MatrixXd lddp_posterior_predictive(const LddpDraws& draws, const Eigen::MatrixXd& x_new,
                                          int n_rep, std::uint64_t seed) {
  if (n_rep < 0) throw ArgumentError("lddp_posterior_predictive: n_rep must be nonnegative");
  if (draws.iterations.empty()) throw ArgumentError("lddp_posterior_predictive: no iterations");
  if (static_cast<int>(x_new.cols()) != draws.p) {
    throw ShapeError("lddp_posterior_predictive: x_new has " + std::to_string(x_new.cols()) +
                     " columns, draws expect " + std::to_string(draws.p));
  }
  Rng rng(seed);
  const int n = static_cast<int>(x_new.rows());
  const int s_max = static_cast<int>(draws.iterations.size());
  Eigen::MatrixXd out(n_rep, n);
  for (int r = 0; r < n_rep; ++r) {
    const int s = rng.uniform_int(s_max);
    const LddpIteration& it = draws.iterations[static_cast<std::size_t>(s)];
    for (int i = 0; i < n; ++i) {
      const int l = rng.categorical(it.w);
      const double mean = x_new.row(i).dot(it.beta.row(l));
      out(r, i) = mean + rng.normal() / std::sqrt(it.tau(l));
    }
  }
  return out;
}

std::vector<std::vector<DensityModel>> cluster_covariate_densities(
    const Partition& partition, const MixedDataset& covariates, const DpmConfig& cfg,
    std::uint64_t master_seed, int threads, std::vector<FitReport>* reports) {
  const int n = covariates.n();
  if (static_cast<int>(partition.labels.size()) != n) {
    throw ShapeError("cluster_covariate_densities: partition labels do not align with rows");
  }
  const int k_clusters = partition.k;
  if (k_clusters < 1) throw ArgumentError("cluster_covariate_densities: empty partition");

  std::vector<std::vector<int>> members(static_cast<std::size_t>(k_clusters));
  for (int i = 0; i < n; ++i) {
    const int zi = partition.labels[static_cast<std::size_t>(i)];
    if (zi < 0 || zi >= k_clusters) {
      throw ArgumentError("cluster_covariate_densities: label out of range at row " +
                          std::to_string(i));
    }
    members[static_cast<std::size_t>(zi)].push_back(i);
  }
  for (int k = 0; k < k_clusters; ++k) {
    if (members[static_cast<std::size_t>(k)].size() < 5) {
      throw ArgumentError("cluster_covariate_densities: cluster " + std::to_string(k + 1) +
                          " has " + std::to_string(members[static_cast<std::size_t>(k)].size()) +
                          " members; at least 5 are required for a density fit");
    }
  }

  std::vector<DpmDraws> fits(static_cast<std::size_t>(k_clusters));
  std::vector<std::string> failures(static_cast<std::size_t>(k_clusters));
  const auto fit_one = [&](int k) {
    try {
      const MixedDataset rows = covariates.select_rows(members[static_cast<std::size_t>(k)]);
      // Small clusters cannot seed the configured number of K-means
      // centroids; shrink toward the floor of 3 so the derivation stays
      // well posed.
      const int k_eff = std::min(cfg.kmeans_k, std::max(3, rows.n() / 2));
      const DpmHyperparams hp = derive_dpm_hyperparams(
          rows, k_eff, split_seed(master_seed, static_cast<std::uint64_t>(2 * k)), cfg.tau_k);
      DpmConfig cluster_cfg = cfg;
      cluster_cfg.seed = split_seed(master_seed, static_cast<std::uint64_t>(2 * k + 1));
      fits[static_cast<std::size_t>(k)] = fit_dpm(rows, hp, cluster_cfg);
    } catch (const std::exception& e) {
      failures[static_cast<std::size_t>(k)] =
          "cluster " + std::to_string(k + 1) + ": " + e.what();
    }
  };

  if (threads > 1) {
#ifdef UNDERLAP_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
    for (int k = 0; k < k_clusters; ++k) fit_one(k);
  } else {
    for (int k = 0; k < k_clusters; ++k) fit_one(k);
  }
  for (int k = 0; k < k_clusters; ++k) {
    if (!failures[static_cast<std::size_t>(k)].empty()) {
      throw ArgumentError("cluster_covariate_densities: " + failures[static_cast<std::size_t>(k)]);
    }
  }

  const int s_max = cfg.n_iter;
  std::vector<std::vector<DensityModel>> out;
  out.reserve(static_cast<std::size_t>(s_max));
  for (int s = 0; s < s_max; ++s) {
    std::vector<DensityModel> row;
    row.reserve(static_cast<std::size_t>(k_clusters));
    for (int k = 0; k < k_clusters; ++k) {
      const DpmDraws& fit = fits[static_cast<std::size_t>(k)];
      row.push_back(
          dpm_iteration_mixture(fit.iterations[static_cast<std::size_t>(s)], fit.sig));
    }
    out.push_back(std::move(row));
  }
  if (reports != nullptr) {
    reports->clear();
    for (int k = 0; k < k_clusters; ++k) {
      reports->push_back(fits[static_cast<std::size_t>(k)].report);
    }
  }
  return out;
}

void dpm_draws_to_ndjson(const DpmDraws& draws, std::ostream& out) {
  const int n = draws.iterations.empty()
                    ? 0
                    : static_cast<int>(draws.iterations.front().z.size());
  Json header = {{"kind", "dpm"},
                 {"n", n},
                 {"p_continuous", draws.sig.p_continuous},
                 {"cardinalities", draws.sig.cardinalities},
                 {"truncation", draws.cfg.truncation},
                 {"a_alpha", draws.cfg.a_alpha},
                 {"b_alpha", draws.cfg.b_alpha},
                 {"tau_k", draws.cfg.tau_k},
                 {"kmeans_k", draws.cfg.kmeans_k},
                 {"n_iter", draws.cfg.n_iter},
                 {"n_burn", draws.cfg.n_burn},
                 {"seed", draws.cfg.seed},
                 {"sweeps", draws.report.sweeps},
                 {"seconds", draws.report.seconds},
                 {"repairs", draws.report.repairs},
                 {"warnings", draws.report.warnings}};
  Json hp = Json::object();
  if (draws.sig.p_continuous > 0) {
    hp["m0"] = vec_to_json(draws.hp.m0);
    hp["L0"] = mat_to_json(draws.hp.L0);
    hp["nu0"] = draws.hp.nu0;
    hp["S0"] = mat_to_json(draws.hp.S0);
  }
  Json eta = Json::array();
  for (const auto& e : draws.hp.eta) eta.push_back(vec_to_json(e));
  hp["eta"] = eta;
  header["hyperparams"] = hp;
  out << header.dump() << '\n';

  for (const auto& it : draws.iterations) {
    Json line = {{"z", labels_to_json(it.z)}, {"w", vec_to_json(it.w)}, {"alpha", it.alpha}};
    if (!it.mu.empty()) {
      Json mu = Json::array(), sigma = Json::array();
      for (const auto& m : it.mu) mu.push_back(vec_to_json(m));
      for (const auto& s : it.sigma) sigma.push_back(mat_to_json(s));
      line["mu"] = mu;
      line["sigma"] = sigma;
    }
    if (!it.catp.empty()) {
      Json catp = Json::array();
      for (const auto& comp : it.catp) {
        Json per_var = Json::array();
        for (const auto& pv : comp) per_var.push_back(vec_to_json(pv));
        catp.push_back(per_var);
      }
      line["catp"] = catp;
    }
    out << line.dump() << '\n';
  }
  if (!out) throw ArgumentError("dpm_draws_to_ndjson: write failed");
}

DpmDraws dpm_draws_from_ndjson(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ArgumentError("dpm_draws_from_ndjson: empty stream");
  const Json header = parse_ndjson_line(line, "dpm_draws_from_ndjson");
  try {
    if (header.at("kind") != "dpm") {
      throw ArgumentError("dpm_draws_from_ndjson: stream was written by '" +
                          header.at("kind").get<std::string>() + "', not 'dpm'");
    }
    DpmDraws draws;
    draws.sig.p_continuous = header.at("p_continuous").get<int>();
    draws.sig.cardinalities = header.at("cardinalities").get<std::vector<int>>();
    draws.cfg.truncation = header.at("truncation").get<int>();
    draws.cfg.a_alpha = header.at("a_alpha").get<double>();
    draws.cfg.b_alpha = header.at("b_alpha").get<double>();
    draws.cfg.tau_k = header.at("tau_k").get<double>();
    draws.cfg.kmeans_k = header.at("kmeans_k").get<int>();
    draws.cfg.n_iter = header.at("n_iter").get<int>();
    draws.cfg.n_burn = header.at("n_burn").get<int>();
    draws.cfg.seed = header.at("seed").get<std::uint64_t>();
    draws.report.sweeps = header.at("sweeps").get<int>();
    draws.report.seconds = header.at("seconds").get<double>();
    draws.report.repairs = header.at("repairs").get<int>();
    draws.report.warnings = header.at("warnings").get<std::vector<std::string>>();
    const Json& hp = header.at("hyperparams");
    if (draws.sig.p_continuous > 0) {
      draws.hp.m0 = json_to_vec(hp.at("m0"));
      draws.hp.L0 = json_to_mat(hp.at("L0"));
      draws.hp.nu0 = hp.at("nu0").get<double>();
      draws.hp.S0 = json_to_mat(hp.at("S0"));
    }
    for (const auto& e : hp.at("eta")) draws.hp.eta.push_back(json_to_vec(e));

    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const Json j = parse_ndjson_line(line, "dpm_draws_from_ndjson");
      DpmIteration it;
      it.z = json_to_labels(j.at("z"));
      it.w = json_to_vec(j.at("w"));
      it.alpha = j.at("alpha").get<double>();
      if (j.contains("mu")) {
        for (const auto& m : j.at("mu")) it.mu.push_back(json_to_vec(m));
        for (const auto& s : j.at("sigma")) it.sigma.push_back(json_to_mat(s));
      }
      if (j.contains("catp")) {
        for (const auto& comp : j.at("catp")) {
          std::vector<Eigen::VectorXd> per_var;
          for (const auto& pv : comp) per_var.push_back(json_to_vec(pv));
          it.catp.push_back(std::move(per_var));
        }
      }
      draws.iterations.push_back(std::move(it));
    }
    return draws;
  } catch (const Json::exception& e) {
    throw ArgumentError(std::string("dpm_draws_from_ndjson: malformed stream: ") + e.what());
  }
}

void lddp_draws_to_ndjson(const LddpDraws& draws, std::ostream& out) {
  const int n = draws.iterations.empty()
                    ? 0
                    : static_cast<int>(draws.iterations.front().z.size());
  Json header = {{"kind", "lddp"},
                 {"n", n},
                 {"p", draws.p},
                 {"truncation", draws.cfg.truncation},
                 {"a_alpha", draws.cfg.a_alpha},
                 {"b_alpha", draws.cfg.b_alpha},
                 {"n_iter", draws.cfg.n_iter},
                 {"n_burn", draws.cfg.n_burn},
                 {"seed", draws.cfg.seed},
                 {"sweeps", draws.report.sweeps},
                 {"seconds", draws.report.seconds},
                 {"repairs", draws.report.repairs},
                 {"warnings", draws.report.warnings},
                 {"hyperparams",
                  {{"m0", vec_to_json(draws.hp.m0)},
                   {"S0", mat_to_json(draws.hp.S0)},
                   {"nu", draws.hp.nu},
                   {"psi", mat_to_json(draws.hp.psi)},
                   {"a", draws.hp.a},
                   {"b", draws.hp.b},
                   {"b_floored", draws.hp.b_floored}}}};
  out << header.dump() << '\n';
  for (const auto& it : draws.iterations) {
    const Json line = {{"z", labels_to_json(it.z)},
                       {"w", vec_to_json(it.w)},
                       {"beta", mat_to_json(it.beta)},
                       {"tau", vec_to_json(it.tau)},
                       {"alpha", it.alpha}};
    out << line.dump() << '\n';
  }
  if (!out) throw ArgumentError("lddp_draws_to_ndjson: write failed");
}

LddpDraws lddp_draws_from_ndjson(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ArgumentError("lddp_draws_from_ndjson: empty stream");
  const Json header = parse_ndjson_line(line, "lddp_draws_from_ndjson");
  try {
    if (header.at("kind") != "lddp") {
      throw ArgumentError("lddp_draws_from_ndjson: stream was written by '" +
                          header.at("kind").get<std::string>() + "', not 'lddp'");
    }
    LddpDraws draws;
    draws.p = header.at("p").get<int>();
    draws.cfg.truncation = header.at("truncation").get<int>();
    draws.cfg.a_alpha = header.at("a_alpha").get<double>();
    draws.cfg.b_alpha = header.at("b_alpha").get<double>();
    draws.cfg.n_iter = header.at("n_iter").get<int>();
    draws.cfg.n_burn = header.at("n_burn").get<int>();
    draws.cfg.seed = header.at("seed").get<std::uint64_t>();
    draws.report.sweeps = header.at("sweeps").get<int>();
    draws.report.seconds = header.at("seconds").get<double>();
    draws.report.repairs = header.at("repairs").get<int>();
    draws.report.warnings = header.at("warnings").get<std::vector<std::string>>();
    const Json& hp = header.at("hyperparams");
    draws.hp.m0 = json_to_vec(hp.at("m0"));
    draws.hp.S0 = json_to_mat(hp.at("S0"));
    draws.hp.nu = hp.at("nu").get<double>();
    draws.hp.psi = json_to_mat(hp.at("psi"));
    draws.hp.a = hp.at("a").get<double>();
    draws.hp.b = hp.at("b").get<double>();
    draws.hp.b_floored = hp.at("b_floored").get<bool>();

    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const Json j = parse_ndjson_line(line, "lddp_draws_from_ndjson");
      LddpIteration it;
      it.z = json_to_labels(j.at("z"));
      it.w = json_to_vec(j.at("w"));
      it.beta = json_to_mat(j.at("beta"));
      it.tau = json_to_vec(j.at("tau"));
      it.alpha = j.at("alpha").get<double>();
      draws.iterations.push_back(std::move(it));
    }
    return draws;
  } catch (const Json::exception& e) {
    throw ArgumentError(std::string("lddp_draws_from_ndjson: malformed stream: ") + e.what());
  }
}

std::string ndjson_kind(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ArgumentError("ndjson_kind: empty stream");
  const Json header = parse_ndjson_line(line, "ndjson_kind");
  if (!header.contains("kind")) throw ArgumentError("ndjson_kind: header has no kind field");
  return header.at("kind").get<std::string>();
}

}  // namespace underlap
