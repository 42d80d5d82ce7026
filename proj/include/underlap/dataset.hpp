#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "underlap/support.hpp"

namespace underlap {

enum class ColumnKind { continuous, categorical };

// Rectangular mixed-type dataset. Continuous columns live in `cont`,
// categorical columns in `cat` as 0-based codes with per-column level
// dictionaries; `block_pos[c]` is column c's index inside its block. Row
// order is meaningful (partitions align with it).
struct MixedDataset {
  std::vector<std::string> names;
  std::vector<ColumnKind> kinds;
  std::vector<int> block_pos;
  Eigen::MatrixXd cont;  // n x p_cont
  Eigen::MatrixXi cat;   // n x p_cat
  std::vector<std::vector<std::string>> levels;
  long dropped_rows = 0;  // rows removed for missing cells at ingest

  int n() const {
    return static_cast<int>(p_cont() > 0 ? cont.rows() : cat.rows());
  }
  int n_cols() const { return static_cast<int>(names.size()); }
  int p_cont() const { return static_cast<int>(cont.cols()); }
  int p_cat() const { return static_cast<int>(cat.cols()); }

  // Index of a named column; throws ArgumentError when absent.
  int column(const std::string& name) const;

  // New dataset holding the named columns, in the order given.
  MixedDataset select_columns(const std::vector<std::string>& cols) const;

  // New dataset holding the given rows (indices may repeat), same columns.
  MixedDataset select_rows(const std::vector<int>& rows) const;

  // Signature of the space the rows live on: continuous block first, then
  // categorical cardinalities in column order.
  SupportSignature signature() const;

  // Row i as a point in that space.
  MixedPoint row_point(int i) const;
};

// CSV ingest. `categorical` names the columns to read as categorical; all
// others are continuous. Rows with missing cells (empty or "NA") are dropped
// and counted in dropped_rows; an unparseable cell under a continuous column
// is a hard error naming the row and column. Level dictionaries are built in
// first-appearance order.
MixedDataset ingest_csv(const std::string& path, const std::vector<std::string>& categorical);

// Writes the dataset back out; categorical cells print their level strings.
void write_csv(const MixedDataset& data, const std::string& path);

}  // namespace underlap
