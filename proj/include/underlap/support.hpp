#pragma once

#include <vector>

#include <Eigen/Dense>

namespace underlap {

// One observation on a mixed continuous/categorical space: continuous
// coordinates first, then one 0-based code per categorical variable.
struct MixedPoint {
  Eigen::VectorXd cont;
  std::vector<int> cat;
};

// Dimensions of the space a density lives on. Cardinalities are per
// categorical variable, in variable order.
struct SupportSignature {
  int p_continuous = 0;
  std::vector<int> cardinalities;

  int p_categorical() const { return static_cast<int>(cardinalities.size()); }
  int n_variables() const { return p_continuous + p_categorical(); }

  bool operator==(const SupportSignature&) const = default;
};

}  // namespace underlap
