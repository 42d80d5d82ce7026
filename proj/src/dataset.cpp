#include "underlap/dataset.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "underlap/errors.hpp"

namespace underlap {

namespace {

// Splits one CSV record. Fields may be double-quoted, with "" as an escaped
// quote; no multi-line fields.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA"; }

double parse_double(const std::string& cell, long row, const std::string& col) {
  errno = 0;
  char* end = nullptr;
  const double value = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0' || errno == ERANGE) {
    throw ArgumentError("ingest_csv: cannot parse '" + cell + "' as a number at row " +
                        std::to_string(row) + ", column '" + col + "'");
  }
  return value;
}

}  // namespace

int MixedDataset::column(const std::string& name) const {
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (names[c] == name) return static_cast<int>(c);
  }
  throw ArgumentError("no column named '" + name + "'");
}

MixedDataset MixedDataset::select_columns(const std::vector<std::string>& cols) const {
  if (cols.empty()) throw ArgumentError("select_columns: empty column list");
  MixedDataset out;
  out.dropped_rows = dropped_rows;
  const int rows = n();
  std::vector<int> cont_src, cat_src;
  for (const auto& name : cols) {
    const int c = column(name);
    out.names.push_back(names[c]);
    out.kinds.push_back(kinds[c]);
    if (kinds[c] == ColumnKind::continuous) {
      out.block_pos.push_back(static_cast<int>(cont_src.size()));
      cont_src.push_back(block_pos[c]);
    } else {
      out.block_pos.push_back(static_cast<int>(cat_src.size()));
      cat_src.push_back(block_pos[c]);
      out.levels.push_back(levels[block_pos[c]]);
    }
  }
  out.cont.resize(rows, static_cast<int>(cont_src.size()));
  for (std::size_t j = 0; j < cont_src.size(); ++j) {
    out.cont.col(static_cast<int>(j)) = cont.col(cont_src[j]);
  }
  out.cat.resize(rows, static_cast<int>(cat_src.size()));
  for (std::size_t j = 0; j < cat_src.size(); ++j) {
    out.cat.col(static_cast<int>(j)) = cat.col(cat_src[j]);
  }
  return out;
}

MixedDataset MixedDataset::select_rows(const std::vector<int>& rows) const {
  if (rows.empty()) throw ArgumentError("select_rows: empty row selection");
  const int total = n();
  for (int r : rows) {
    if (r < 0 || r >= total) {
      throw ArgumentError("select_rows: row index " + std::to_string(r) + " out of range");
    }
  }
  MixedDataset out;
  out.names = names;
  out.kinds = kinds;
  out.block_pos = block_pos;
  out.levels = levels;
  out.dropped_rows = dropped_rows;
  out.cont.resize(static_cast<int>(rows.size()), cont.cols());
  out.cat.resize(static_cast<int>(rows.size()), cat.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.cont.row(static_cast<int>(i)) = cont.row(rows[i]);
    out.cat.row(static_cast<int>(i)) = cat.row(rows[i]);
  }
  return out;
}

SupportSignature MixedDataset::signature() const {
  SupportSignature sig;
  sig.p_continuous = p_cont();
  sig.cardinalities.reserve(levels.size());
  for (const auto& dict : levels) {
    sig.cardinalities.push_back(static_cast<int>(dict.size()));
  }
  return sig;
}

MixedPoint MixedDataset::row_point(int i) const {
  if (i < 0 || i >= n()) {
    throw ArgumentError("row_point: row index " + std::to_string(i) + " out of range");
  }
  MixedPoint point;
  point.cont = cont.row(i).transpose();
  point.cat.resize(static_cast<std::size_t>(p_cat()));
  for (int j = 0; j < p_cat(); ++j) point.cat[static_cast<std::size_t>(j)] = cat(i, j);
  return point;
}

MixedDataset ingest_csv(const std::string& path, const std::vector<std::string>& categorical) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("ingest_csv: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw ArgumentError("ingest_csv: '" + path + "' is empty");
  const std::vector<std::string> header = split_csv_line(line);
  if (header.empty() || (header.size() == 1 && header[0].empty())) {
    throw ArgumentError("ingest_csv: '" + path + "' has an empty header");
  }

  MixedDataset out;
  out.names = header;
  out.kinds.resize(header.size(), ColumnKind::continuous);
  out.block_pos.resize(header.size(), -1);
  int p_cont = 0, p_cat = 0;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const bool is_cat =
        std::find(categorical.begin(), categorical.end(), header[c]) != categorical.end();
    if (is_cat) {
      out.kinds[c] = ColumnKind::categorical;
      out.block_pos[c] = p_cat++;
    } else {
      out.block_pos[c] = p_cont++;
    }
  }
  for (const auto& name : categorical) {
    if (std::find(header.begin(), header.end(), name) == header.end()) {
      throw ArgumentError("ingest_csv: categorical column '" + name + "' not in header");
    }
  }
  out.levels.resize(static_cast<std::size_t>(p_cat));
  std::vector<std::map<std::string, int>> level_index(static_cast<std::size_t>(p_cat));

  std::vector<double> cont_cells;
  std::vector<int> cat_cells;
  long data_row = 0;
  long kept = 0;
  while (std::getline(in, line)) {
    ++data_row;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ArgumentError("ingest_csv: row " + std::to_string(data_row) + " has " +
                          std::to_string(cells.size()) + " cells, expected " +
                          std::to_string(header.size()));
    }
    bool missing = false;
    for (const auto& cell : cells) {
      if (is_missing(cell)) {
        missing = true;
        break;
      }
    }
    if (missing) {
      ++out.dropped_rows;
      continue;
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (out.kinds[c] == ColumnKind::continuous) {
        cont_cells.push_back(parse_double(cells[c], data_row, header[c]));
      } else {
        auto& index = level_index[static_cast<std::size_t>(out.block_pos[c])];
        auto& dict = out.levels[static_cast<std::size_t>(out.block_pos[c])];
        auto it = index.find(cells[c]);
        if (it == index.end()) {
          it = index.emplace(cells[c], static_cast<int>(dict.size())).first;
          dict.push_back(cells[c]);
        }
        cat_cells.push_back(it->second);
      }
    }
    ++kept;
  }

  out.cont.resize(kept, p_cont);
  out.cat.resize(kept, p_cat);
  std::size_t ci = 0, di = 0;
  for (long i = 0; i < kept; ++i) {
    for (int j = 0; j < p_cont; ++j) out.cont(i, j) = cont_cells[ci++];
    for (int j = 0; j < p_cat; ++j) out.cat(i, j) = cat_cells[di++];
  }
  return out;
}

void write_csv(const MixedDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("write_csv: cannot open '" + path + "' for writing");
  for (std::size_t c = 0; c < data.names.size(); ++c) {
    if (c > 0) out << ',';
    out << data.names[c];
  }
  out << '\n';
  char buf[64];
  for (int i = 0; i < data.n(); ++i) {
    for (int c = 0; c < data.n_cols(); ++c) {
      if (c > 0) out << ',';
      const int b = data.block_pos[static_cast<std::size_t>(c)];
      if (data.kinds[static_cast<std::size_t>(c)] == ColumnKind::continuous) {
        std::snprintf(buf, sizeof(buf), "%.17g", data.cont(i, b));
        out << buf;
      } else {
        out << data.levels[static_cast<std::size_t>(b)][static_cast<std::size_t>(data.cat(i, b))];
      }
    }
    out << '\n';
  }
  if (!out) throw ArgumentError("write_csv: write to '" + path + "' failed");
}

}  // namespace underlap
