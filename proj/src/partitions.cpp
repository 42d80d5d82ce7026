#include "underlap/partitions.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "underlap/errors.hpp"

#ifdef UNDERLAP_HAVE_OPENMP
#include <omp.h>
#endif

namespace underlap {

Partition canonicalize(const std::vector<int>& labels) {
  if (labels.empty()) throw ArgumentError("canonicalize: empty label vector");
  std::map<int, int> remap;
  Partition out;
  out.labels.reserve(labels.size());
  for (int l : labels) {
    auto [it, inserted] = remap.emplace(l, static_cast<int>(remap.size()));
    out.labels.push_back(it->second);
  }
  out.k = static_cast<int>(remap.size());
  return out;
}

Eigen::MatrixXd similarity_matrix(const std::vector<std::vector<int>>& draws) {
  if (draws.empty()) throw ArgumentError("similarity_matrix: no draws");
  const std::size_t n = draws.front().size();
  if (n == 0) throw ArgumentError("similarity_matrix: empty partitions");
  for (const auto& d : draws)
    if (d.size() != n) throw ShapeError("similarity_matrix: ragged draws");

  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(n, n);
  for (const auto& d : draws) {
    for (std::size_t i = 0; i < n; ++i) {
      counts(i, i) += 1.0;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (d[i] == d[j]) {
          counts(i, j) += 1.0;
          counts(j, i) += 1.0;
        }
      }
    }
  }
  counts /= static_cast<double>(draws.size());
  return counts;
}

double vi_lower_bound(const std::vector<int>& labels, const Eigen::MatrixXd& psm) {
  const Eigen::Index n = psm.rows();
  if (psm.cols() != n) throw ShapeError("vi_lower_bound: psm must be square");
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw ShapeError("vi_lower_bound: candidate length does not match psm");

  const double inv_log2 = 1.0 / std::log(2.0);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double size_i = 0.0;    // sum_j 1(c_i = c_j), includes j = i
    double psm_i = 0.0;     // sum_j psm_ij, includes the unit diagonal
    double overlap_i = 0.0; // sum_j 1(c_i = c_j) psm_ij
    for (Eigen::Index j = 0; j < n; ++j) {
      const double p = psm(i, j);
      psm_i += p;
      if (labels[i] == labels[j]) {
        size_i += 1.0;
        overlap_i += p;
      }
    }
    total += std::log(size_i) * inv_log2 + std::log(psm_i) * inv_log2 -
             2.0 * std::log(overlap_i) * inv_log2;
  }
  return total / static_cast<double>(n);
}

RepresentativeResult representative_partition(const std::vector<std::vector<int>>& draws,
                                              const Eigen::MatrixXd& psm, int threads) {
  if (draws.empty()) throw ArgumentError("representative_partition: no draws");

  // Identical partitions score identically, so score each distinct canonical
  // form once and remember its earliest draw.
  std::map<std::vector<int>, int> first_seen;
  for (std::size_t s = 0; s < draws.size(); ++s)
    first_seen.emplace(canonicalize(draws[s]).labels, static_cast<int>(s));

  std::vector<const std::vector<int>*> unique_labels;
  std::vector<int> unique_source;
  unique_labels.reserve(first_seen.size());
  for (const auto& [labels, source] : first_seen) {
    unique_labels.push_back(&labels);
    unique_source.push_back(source);
  }

  const int u = static_cast<int>(unique_labels.size());
  std::vector<double> scores(u);
  if (threads <= 1) {
    for (int i = 0; i < u; ++i) scores[i] = vi_lower_bound(*unique_labels[i], psm);
  } else {
#ifdef UNDERLAP_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int i = 0; i < u; ++i) scores[i] = vi_lower_bound(*unique_labels[i], psm);
#else
    for (int i = 0; i < u; ++i) scores[i] = vi_lower_bound(*unique_labels[i], psm);
#endif
  }

  int best = 0;
  for (int i = 1; i < u; ++i) {
    // Strict improvement, or an equal score reached by an earlier draw.
    if (scores[i] < scores[best] ||
        (scores[i] == scores[best] && unique_source[i] < unique_source[best]))
      best = i;
  }

  RepresentativeResult res;
  res.partition = canonicalize(*unique_labels[best]);
  res.score = scores[best];
  res.source_draw = unique_source[best];
  return res;
}

RepresentativeResult representative_partition(const std::vector<std::vector<int>>& draws,
                                              int threads) {
  return representative_partition(draws, similarity_matrix(draws), threads);
}

}  // namespace underlap
