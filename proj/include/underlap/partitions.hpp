#pragma once

#include <vector>

#include <Eigen/Dense>

namespace underlap {

// Hard clustering of n items. Labels are 0-based internally; canonicalize()
// relabels by first appearance so equal partitions compare equal. Serialized
// artifacts (partition.csv) print labels 1-based.
struct Partition {
  std::vector<int> labels;
  int k = 0;
};

Partition canonicalize(const std::vector<int>& labels);

// Posterior similarity matrix: entry (i, j) is the fraction of draws that
// put i and j in one cluster. Symmetric, unit diagonal.
Eigen::MatrixXd similarity_matrix(const std::vector<std::vector<int>>& draws);

// Jensen lower bound (in bits) on the posterior expected Variation of
// Information between the candidate and the partition distribution behind
// psm:
//   (1/n) sum_i [ log2 sum_j 1(c_i=c_j) + log2 sum_j psm_ij
//                 - 2 log2 sum_j 1(c_i=c_j) psm_ij ].
double vi_lower_bound(const std::vector<int>& labels, const Eigen::MatrixXd& psm);

// The retained partition minimizing vi_lower_bound against the draws' own
// similarity matrix; ties go to the earliest draw. Scoring runs per unique
// partition and parallelizes over candidates (threads > 1); the result does
// not depend on the thread count.
struct RepresentativeResult {
  Partition partition;
  double score = 0.0;      // the winning lower bound, in bits
  int source_draw = 0;     // index into draws
};
RepresentativeResult representative_partition(const std::vector<std::vector<int>>& draws,
                                              const Eigen::MatrixXd& psm, int threads = 1);
RepresentativeResult representative_partition(const std::vector<std::vector<int>>& draws,
                                              int threads = 1);

}  // namespace underlap
