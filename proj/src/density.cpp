#include "underlap/density.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "underlap/errors.hpp"

namespace underlap {

namespace {

constexpr double kProbSumTol = 1e-12;
constexpr double kLog2Pi = 1.8378770664093453;

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf stays -inf
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

}  // namespace

// ---------------------------------------------------------------------------
// Gaussian

Gaussian::Gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov)
    : mean_(std::move(mean)), cov_(std::move(cov)) {
  const int p = static_cast<int>(mean_.size());
  if (p < 1) throw ArgumentError("Gaussian: mean must have at least one coordinate");
  if (cov_.rows() != p || cov_.cols() != p)
    throw ArgumentError("Gaussian: covariance must be p x p with p = len(mean)");
  const double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
  if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw ArgumentError("Gaussian: covariance is not symmetric");

  Eigen::LLT<Eigen::MatrixXd> llt(cov_.selfadjointView<Eigen::Lower>());
  if (llt.info() != Eigen::Success)
    throw NumericError("Gaussian: covariance is not positive definite");
  chol_ = llt.matrixL();

  double log_det_half = 0.0;
  for (int i = 0; i < p; ++i) log_det_half += std::log(chol_(i, i));
  log_norm_ = -0.5 * p * kLog2Pi - log_det_half;
}

double Gaussian::log_density(const Eigen::VectorXd& x) const {
  if (x.size() != mean_.size())
    throw ShapeError("Gaussian: point dimension does not match the model");
  Eigen::VectorXd y = x - mean_;
  chol_.triangularView<Eigen::Lower>().solveInPlace(y);
  return log_norm_ - 0.5 * y.squaredNorm();
}

Eigen::VectorXd Gaussian::sample(Rng& rng) const {
  return mean_ + chol_ * rng.normal_vector(dim());
}

// ---------------------------------------------------------------------------
// CategoricalProduct

CategoricalProduct::CategoricalProduct(std::vector<Eigen::VectorXd> probs)
    : probs_(std::move(probs)) {
  if (probs_.empty())
    throw ArgumentError("CategoricalProduct: at least one variable required");
  for (auto& p : probs_) {
    if (p.size() < 2)
      throw ArgumentError("CategoricalProduct: every variable needs >= 2 categories");
    if ((p.array() < 0.0).any())
      throw ArgumentError("CategoricalProduct: negative probability");
    const double s = p.sum();
    if (std::abs(s - 1.0) > kProbSumTol)
      throw ArgumentError("CategoricalProduct: probabilities must sum to 1");
    p /= s;
  }
}

std::vector<int> CategoricalProduct::cardinalities() const {
  std::vector<int> c;
  c.reserve(probs_.size());
  for (const auto& p : probs_) c.push_back(static_cast<int>(p.size()));
  return c;
}

double CategoricalProduct::log_prob(const std::vector<int>& codes) const {
  if (codes.size() != probs_.size())
    throw ShapeError("CategoricalProduct: wrong number of categorical codes");
  double lp = 0.0;
  for (std::size_t k = 0; k < codes.size(); ++k) {
    const int c = codes[k];
    if (c < 0 || c >= static_cast<int>(probs_[k].size()))
      throw ShapeError("CategoricalProduct: category code out of range");
    lp += std::log(probs_[k][c]);  // log(0) = -inf is a legitimate value
  }
  return lp;
}

std::vector<int> CategoricalProduct::sample(Rng& rng) const {
  std::vector<int> codes(probs_.size());
  for (std::size_t k = 0; k < probs_.size(); ++k) codes[k] = rng.categorical(probs_[k]);
  return codes;
}

// ---------------------------------------------------------------------------
// Mixture

Mixture::Mixture(Eigen::VectorXd weights, std::vector<DensityModel> components)
    : weights_(std::move(weights)), components_(std::move(components)) {
  if (components_.empty()) throw ArgumentError("Mixture: no components");
  if (weights_.size() != static_cast<Eigen::Index>(components_.size()))
    throw ArgumentError("Mixture: weights/components length mismatch");
  if ((weights_.array() < 0.0).any())
    throw ArgumentError("Mixture: negative weight");
  const double s = weights_.sum();
  if (std::abs(s - 1.0) > kProbSumTol)
    throw ArgumentError("Mixture: weights must sum to 1");
  weights_ /= s;
  const SupportSignature sig = components_.front().signature();
  for (const auto& c : components_)
    if (!(c.signature() == sig))
      throw ArgumentError("Mixture: components disagree on support signature");
}

// ---------------------------------------------------------------------------
// DensityModel

SupportSignature DensityModel::signature() const {
  return std::visit(
      [](const auto& m) -> SupportSignature {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Gaussian>) {
          return SupportSignature{m.dim(), {}};
        } else if constexpr (std::is_same_v<T, CategoricalProduct>) {
          return SupportSignature{0, m.cardinalities()};
        } else if constexpr (std::is_same_v<T, MixedProduct>) {
          return SupportSignature{m.continuous.dim(), m.discrete.cardinalities()};
        } else {
          return m.components().front().signature();
        }
      },
      node_);
}

double log_density(const DensityModel& model, const MixedPoint& point) {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Gaussian>) {
          if (!point.cat.empty())
            throw ShapeError("log_density: categorical codes passed to a Gaussian");
          return m.log_density(point.cont);
        } else if constexpr (std::is_same_v<T, CategoricalProduct>) {
          if (point.cont.size() != 0)
            throw ShapeError("log_density: continuous coords passed to a CategoricalProduct");
          return m.log_prob(point.cat);
        } else if constexpr (std::is_same_v<T, MixedProduct>) {
          return m.continuous.log_density(point.cont) + m.discrete.log_prob(point.cat);
        } else {
          const auto& comps = m.components();
          Eigen::VectorXd terms(m.size());
          for (int l = 0; l < m.size(); ++l)
            terms[l] = std::log(m.weights()[l]) + log_density(comps[l], point);
          return log_sum_exp(terms);
        }
      },
      model.node());
}

MixedPoint sample_point(const DensityModel& model, Rng& rng) {
  return std::visit(
      [&](const auto& m) -> MixedPoint {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Gaussian>) {
          return MixedPoint{m.sample(rng), {}};
        } else if constexpr (std::is_same_v<T, CategoricalProduct>) {
          return MixedPoint{Eigen::VectorXd(0), m.sample(rng)};
        } else if constexpr (std::is_same_v<T, MixedProduct>) {
          Eigen::VectorXd c = m.continuous.sample(rng);
          return MixedPoint{std::move(c), m.discrete.sample(rng)};
        } else {
          const int l = rng.categorical(m.weights());
          return sample_point(m.components()[l], rng);
        }
      },
      model.node());
}

std::vector<MixedPoint> sample(const DensityModel& model, Rng& rng, int n) {
  if (n < 1) throw ArgumentError("sample: n must be >= 1");
  std::vector<MixedPoint> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(sample_point(model, rng));
  return out;
}

// ---------------------------------------------------------------------------
// marginalize

namespace {

void check_keep(const std::vector<int>& keep, int n_vars) {
  if (keep.empty()) throw ArgumentError("marginalize: empty keep set");
  int prev = -1;
  for (int k : keep) {
    if (k <= prev) throw ArgumentError("marginalize: keep must be strictly increasing");
    if (k < 0 || k >= n_vars) throw ArgumentError("marginalize: keep index out of range");
    prev = k;
  }
}

Gaussian marginal_gaussian(const Gaussian& g, const std::vector<int>& idx) {
  const int q = static_cast<int>(idx.size());
  Eigen::VectorXd mu(q);
  Eigen::MatrixXd cov(q, q);
  for (int i = 0; i < q; ++i) {
    mu[i] = g.mean()[idx[i]];
    for (int j = 0; j < q; ++j) cov(i, j) = g.cov()(idx[i], idx[j]);
  }
  return Gaussian(std::move(mu), std::move(cov));
}

CategoricalProduct marginal_catprod(const CategoricalProduct& c, const std::vector<int>& idx) {
  std::vector<Eigen::VectorXd> probs;
  probs.reserve(idx.size());
  for (int k : idx) probs.push_back(c.probs()[k]);
  return CategoricalProduct(std::move(probs));
}

}  // namespace

DensityModel marginalize(const DensityModel& model, const std::vector<int>& keep) {
  const SupportSignature sig = model.signature();
  check_keep(keep, sig.n_variables());
  std::vector<int> cont_keep, cat_keep;
  for (int k : keep) {
    if (k < sig.p_continuous)
      cont_keep.push_back(k);
    else
      cat_keep.push_back(k - sig.p_continuous);
  }

  return std::visit(
      [&](const auto& m) -> DensityModel {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Gaussian>) {
          return marginal_gaussian(m, cont_keep);
        } else if constexpr (std::is_same_v<T, CategoricalProduct>) {
          return marginal_catprod(m, cat_keep);
        } else if constexpr (std::is_same_v<T, MixedProduct>) {
          if (cat_keep.empty()) return marginal_gaussian(m.continuous, cont_keep);
          if (cont_keep.empty()) return marginal_catprod(m.discrete, cat_keep);
          return MixedProduct(marginal_gaussian(m.continuous, cont_keep),
                              marginal_catprod(m.discrete, cat_keep));
        } else {
          std::vector<DensityModel> comps;
          comps.reserve(m.components().size());
          for (const auto& c : m.components()) comps.push_back(marginalize(c, keep));
          return Mixture(m.weights(), std::move(comps));
        }
      },
      model.node());
}

// ---------------------------------------------------------------------------
// affine_pushforward

DensityModel affine_pushforward(const DensityModel& model, const Eigen::MatrixXd& A,
                                const Eigen::VectorXd& b) {
  const SupportSignature sig = model.signature();
  if (sig.p_categorical() != 0)
    throw ArgumentError("affine_pushforward: model must be continuous-only");
  const int p = sig.p_continuous;
  if (A.rows() != p || A.cols() != p)
    throw ArgumentError("affine_pushforward: A must be p x p");
  if (b.size() != p) throw ArgumentError("affine_pushforward: b must have length p");

  // Invertibility relative to the Hadamard bound |det A| <= prod ||row_i||.
  double hadamard = 1.0;
  for (int i = 0; i < p; ++i) hadamard *= A.row(i).norm();
  const double det = Eigen::PartialPivLU<Eigen::MatrixXd>(A).determinant();
  if (hadamard == 0.0 || std::abs(det) <= 1e-12 * hadamard)
    throw ArgumentError("affine_pushforward: A is numerically singular");

  return std::visit(
      [&](const auto& m) -> DensityModel {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Gaussian>) {
          Eigen::MatrixXd cov = A * m.cov() * A.transpose();
          cov = 0.5 * (cov + cov.transpose()).eval();  // kill fp asymmetry
          return Gaussian(A * m.mean() + b, std::move(cov));
        } else if constexpr (std::is_same_v<T, Mixture>) {
          std::vector<DensityModel> comps;
          comps.reserve(m.components().size());
          for (const auto& c : m.components()) comps.push_back(affine_pushforward(c, A, b));
          return Mixture(m.weights(), std::move(comps));
        } else {
          throw ArgumentError("affine_pushforward: Gaussian or Mixture-of-Gaussians only");
        }
      },
      model.node());
}

// ---------------------------------------------------------------------------
// JSON (schema in docs/model_schema.md)

namespace {

nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

nlohmann::json mat_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::VectorXd vec_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ArgumentError("model_from_json: expected an array of numbers");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Eigen::MatrixXd mat_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty())
    throw ArgumentError("model_from_json: expected a non-empty array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw ArgumentError("model_from_json: ragged covariance rows");
    for (std::size_t k = 0; k < cols; ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
  }
  return m;
}

}  // namespace

nlohmann::json model_to_json(const DensityModel& model) {
  return std::visit(
      [](const auto& m) -> nlohmann::json {
        using T = std::decay_t<decltype(m)>;
        nlohmann::json j;
        if constexpr (std::is_same_v<T, Gaussian>) {
          j["kind"] = "gaussian";
          j["mean"] = vec_to_json(m.mean());
          j["cov"] = mat_to_json(m.cov());
        } else if constexpr (std::is_same_v<T, CategoricalProduct>) {
          j["kind"] = "catprod";
          nlohmann::json probs = nlohmann::json::array();
          for (const auto& p : m.probs()) probs.push_back(vec_to_json(p));
          j["probs"] = std::move(probs);
        } else if constexpr (std::is_same_v<T, MixedProduct>) {
          j["kind"] = "mixed";
          j["continuous"] = model_to_json(DensityModel(m.continuous));
          j["discrete"] = model_to_json(DensityModel(m.discrete));
        } else {
          j["kind"] = "mixture";
          j["weights"] = vec_to_json(m.weights());
          nlohmann::json comps = nlohmann::json::array();
          for (const auto& c : m.components()) comps.push_back(model_to_json(c));
          j["components"] = std::move(comps);
        }
        return j;
      },
      model.node());
}

DensityModel model_from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "gaussian") {
      return Gaussian(vec_from_json(j.at("mean")), mat_from_json(j.at("cov")));
    }
    if (kind == "catprod") {
      const auto& pj = j.at("probs");
      if (!pj.is_array()) throw ArgumentError("model_from_json: probs must be an array");
      std::vector<Eigen::VectorXd> probs;
      probs.reserve(pj.size());
      for (const auto& p : pj) probs.push_back(vec_from_json(p));
      return CategoricalProduct(std::move(probs));
    }
    if (kind == "mixed") {
      DensityModel cont = model_from_json(j.at("continuous"));
      DensityModel disc = model_from_json(j.at("discrete"));
      const auto* g = std::get_if<Gaussian>(&cont.node());
      const auto* c = std::get_if<CategoricalProduct>(&disc.node());
      if (g == nullptr || c == nullptr)
        throw ArgumentError("model_from_json: mixed blocks must be gaussian + catprod");
      return MixedProduct(*g, *c);
    }
    if (kind == "mixture") {
      const auto& cj = j.at("components");
      if (!cj.is_array()) throw ArgumentError("model_from_json: components must be an array");
      std::vector<DensityModel> comps;
      comps.reserve(cj.size());
      for (const auto& c : cj) comps.push_back(model_from_json(c));
      return Mixture(vec_from_json(j.at("weights")), std::move(comps));
    }
    throw ArgumentError("model_from_json: unknown kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("model_from_json: malformed document: ") + e.what());
  }
}

}  // namespace underlap
