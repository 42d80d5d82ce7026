#pragma once

#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "underlap/rng.hpp"
#include "underlap/support.hpp"

namespace underlap {

class DensityModel;

// Full-rank Gaussian. The lower-triangular Cholesky factor is computed once
// at construction and construction rejects non-symmetric or non-PD
// covariance, so every live instance evaluates and samples without further
// checks (O(p^2) per evaluation).
class Gaussian {
 public:
  Gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov);

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& cov() const { return cov_; }
  const Eigen::MatrixXd& chol() const { return chol_; }  // cov = L L'
  int dim() const { return static_cast<int>(mean_.size()); }

  double log_density(const Eigen::VectorXd& x) const;
  Eigen::VectorXd sample(Rng& rng) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd chol_;
  double log_norm_;  // -p/2 log(2 pi) - sum log L_ii
};

// Product of independent categorical variables with 0-based codes.
class CategoricalProduct {
 public:
  explicit CategoricalProduct(std::vector<Eigen::VectorXd> probs);

  const std::vector<Eigen::VectorXd>& probs() const { return probs_; }
  int n_variables() const { return static_cast<int>(probs_.size()); }
  std::vector<int> cardinalities() const;

  double log_prob(const std::vector<int>& codes) const;
  std::vector<int> sample(Rng& rng) const;

 private:
  std::vector<Eigen::VectorXd> probs_;
};

// Gaussian block x categorical block; the blocks are independent within one
// component (dependence between them is expressed at the mixture level).
struct MixedProduct {
  MixedProduct(Gaussian g, CategoricalProduct c)
      : continuous(std::move(g)), discrete(std::move(c)) {}
  Gaussian continuous;
  CategoricalProduct discrete;
};

// Finite mixture over components of identical support signature. Weights are
// nonnegative, sum to 1 (checked to 1e-12, then normalized exactly); zero
// weights are allowed.
class Mixture {
 public:
  Mixture(Eigen::VectorXd weights, std::vector<DensityModel> components);

  const Eigen::VectorXd& weights() const { return weights_; }
  const std::vector<DensityModel>& components() const { return components_; }
  int size() const { return static_cast<int>(components_.size()); }

 private:
  Eigen::VectorXd weights_;
  std::vector<DensityModel> components_;
};

// Tagged union over the four density kinds. Immutable after construction and
// safe to evaluate from any number of concurrent workers; sampling takes an
// explicitly passed generator.
class DensityModel {
 public:
  using Node = std::variant<Gaussian, CategoricalProduct, MixedProduct, Mixture>;

  DensityModel(Gaussian g) : node_(std::move(g)) {}                      // NOLINT implicit
  DensityModel(CategoricalProduct c) : node_(std::move(c)) {}            // NOLINT implicit
  DensityModel(MixedProduct m) : node_(std::move(m)) {}                  // NOLINT implicit
  DensityModel(Mixture m) : node_(std::move(m)) {}                       // NOLINT implicit

  const Node& node() const { return node_; }
  SupportSignature signature() const;

 private:
  Node node_;
};

// log f(x) with respect to Lebesgue x counting measure. Mixtures are
// evaluated by log-sum-exp over components, no pruning.
double log_density(const DensityModel& model, const MixedPoint& point);

// One draw / n i.i.d. draws. Mixtures sample ancestrally (component index,
// then component draw). Deterministic given the generator state.
MixedPoint sample_point(const DensityModel& model, Rng& rng);
std::vector<MixedPoint> sample(const DensityModel& model, Rng& rng, int n);

// Restriction to a subset of variables. Indices run over the signature's
// variable order: continuous coordinates first, then categorical variables.
// `keep` must be nonempty, strictly increasing and in range.
DensityModel marginalize(const DensityModel& model, const std::vector<int>& keep);

// Exact law of A X + b for a Gaussian or (possibly nested) mixture of
// Gaussians. A must be square and invertible relative to its Hadamard bound.
DensityModel affine_pushforward(const DensityModel& model, const Eigen::MatrixXd& A,
                                const Eigen::VectorXd& b);

// JSON round-trip; field names are fixed by docs/model_schema.md.
nlohmann::json model_to_json(const DensityModel& model);
DensityModel model_from_json(const nlohmann::json& j);

}  // namespace underlap
