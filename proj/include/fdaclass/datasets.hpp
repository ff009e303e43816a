#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fdaclass/basis.hpp"
#include "fdaclass/errors.hpp"
#include "fdaclass/fpca.hpp"
#include "fdaclass/simulate.hpp"

namespace fdaclass {

// Curves observed on one shared, strictly increasing grid.
struct CurveTable {
  std::vector<double> grid;
  Matrix values;            // n x J
  std::vector<int> labels;  // empty when unlabeled
  std::string source;

  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }

  void validate() const {
    for (std::size_t j = 1; j < grid.size(); ++j) {
      if (!(grid[j] > grid[j - 1])) {
        fail(errc::format_error, "grid must be strictly increasing");
      }
    }
    if (static_cast<int>(grid.size()) != cols()) {
      fail(errc::format_error, "grid length does not match value columns");
    }
    if (!labels.empty() && static_cast<int>(labels.size()) != rows()) {
      fail(errc::format_error, "label count does not match curve count");
    }
  }

  int num_classes() const {
    int g = 0;
    for (int label : labels) g = std::max(g, label);
    return g;
  }

  int class_count(int cls) const {
    int count = 0;
    for (int label : labels) {
      if (label == cls) ++count;
    }
    return count;
  }
};

struct CsvSchema {
  // name of the header cell marking the label column; empty loads unlabeled
  std::string label_column = "label";
  char separator = ',';
};

namespace detail {

inline std::optional<double> parse_number(const std::string& token) {
  if (token.empty()) return std::nullopt;
  char* end = nullptr;
  const double value = std::strtod(token.c_str(), &end);
  if (end != token.c_str() + token.size()) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

inline std::vector<std::string> split_line(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string current;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(current);
      current.clear();
    } else if (ch != '\r') {
      current += ch;
    }
  }
  out.push_back(current);
  return out;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::format_error, "cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

// whitespace tokens of every line whose tokens are all numeric; prose
// headers and record markers are skipped
inline std::vector<double> numeric_stream(const std::string& path) {
  std::vector<double> values;
  for (const std::string& line : read_lines(path)) {
    std::istringstream stream(line);
    std::vector<double> row;
    std::string token;
    bool numeric = true;
    while (stream >> token) {
      const auto value = parse_number(token);
      if (!value) {
        numeric = false;
        break;
      }
      row.push_back(*value);
    }
    if (numeric) values.insert(values.end(), row.begin(), row.end());
  }
  return values;
}

}  // namespace detail

// Generic curve CSV: the header row carries the grid values, with one cell
// naming the label column (when present); each following row is one curve.
inline CurveTable load_curves_csv(const std::string& path, const CsvSchema& schema = {}) {
  const auto lines = detail::read_lines(path);
  if (lines.empty()) fail(errc::format_error, path + ": empty file");

  const auto header = detail::split_line(lines.front(), schema.separator);
  CurveTable table;
  table.source = path;
  int label_position = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!schema.label_column.empty() && header[c] == schema.label_column) {
      if (label_position >= 0) fail(errc::format_error, path + ": duplicate label column");
      label_position = static_cast<int>(c);
      continue;
    }
    const auto value = detail::parse_number(header[c]);
    if (!value) {
      fail(errc::parse_error,
           path + ": header cell " + std::to_string(c + 1) + " ('" + header[c] +
               "') is neither numeric nor the label column");
    }
    table.grid.push_back(*value);
  }

  const int J = static_cast<int>(table.grid.size());
  const int n = static_cast<int>(lines.size()) - 1;
  if (n < 1) fail(errc::format_error, path + ": no curve rows");
  table.values.resize(n, J);
  if (label_position >= 0) table.labels.resize(static_cast<std::size_t>(n));

  for (int r = 0; r < n; ++r) {
    const auto cells = detail::split_line(lines[static_cast<std::size_t>(r) + 1], schema.separator);
    if (static_cast<int>(cells.size()) != static_cast<int>(header.size())) {
      fail(errc::format_error, path + ": row " + std::to_string(r + 2) + " has " +
                                   std::to_string(cells.size()) + " cells, expected " +
                                   std::to_string(header.size()));
    }
    int col = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto value = detail::parse_number(cells[c]);
      if (!value) {
        fail(errc::parse_error, path + ": row " + std::to_string(r + 2) + ", column " +
                                    std::to_string(c + 1) + ": '" + cells[c] +
                                    "' is not a number");
      }
      if (static_cast<int>(c) == label_position) {
        table.labels[static_cast<std::size_t>(r)] = static_cast<int>(*value);
      } else {
        table.values(r, col++) = *value;
      }
    }
  }
  table.validate();
  return table;
}

inline void write_curves_csv(const CurveTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(errc::format_error, "cannot write " + path);
  char buffer[64];
  auto emit = [&](double value) {
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    out << buffer;
  };
  for (std::size_t j = 0; j < table.grid.size(); ++j) {
    if (j) out << ',';
    emit(table.grid[j]);
  }
  if (!table.labels.empty()) out << ",label";
  out << '\n';
  for (int i = 0; i < table.rows(); ++i) {
    for (int j = 0; j < table.cols(); ++j) {
      if (j) out << ',';
      emit(table.values(i, j));
    }
    if (!table.labels.empty()) out << ',' << table.labels[static_cast<std::size_t>(i)];
    out << '\n';
  }
}

// Near-infrared meat spectra: 125 numbers per record (100 absorbances over
// 850..1050 nm, then moisture, fat and protein contents, then 22 principal
// components, which are ignored). The first 215 records form the dataset.
// Class 1 is high fat (strictly more than 20 percent), class 2 low fat.
inline CurveTable load_tecator(const std::string& path, int samples = 215) {
  constexpr int record_length = 125;
  constexpr int channels = 100;
  const std::vector<double> values = detail::numeric_stream(path);
  if (static_cast<int>(values.size()) < samples * record_length) {
    fail(errc::format_error,
         path + ": expected at least " + std::to_string(samples * record_length) +
             " numeric values in records of 125 (100 absorbances, moisture, fat, protein, 22 "
             "principal components); strip any non-numeric header if parsing fails");
  }
  CurveTable table;
  table.source = path;
  table.grid.resize(channels);
  for (int j = 0; j < channels; ++j) {
    table.grid[static_cast<std::size_t>(j)] = 850.0 + 200.0 * j / (channels - 1);
  }
  table.values.resize(samples, channels);
  table.labels.resize(samples);
  for (int i = 0; i < samples; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * record_length;
    for (int j = 0; j < channels; ++j) {
      table.values(i, j) = values[base + static_cast<std::size_t>(j)];
    }
    const double fat = values[base + channels + 1];
    table.labels[static_cast<std::size_t>(i)] = fat > 20.0 ? 1 : 2;
  }
  table.validate();
  return table;
}

// Log-periodograms of spoken phonemes: one whitespace row per curve holding
// 150 values plus a class code. Rows whose code matches aa_code or ao_code
// are kept and relabeled 1 and 2.
inline CurveTable load_phoneme(const std::string& path, int aa_code = 4, int ao_code = 5) {
  constexpr int frequencies = 150;
  CurveTable table;
  table.source = path;
  table.grid.resize(frequencies);
  for (int j = 0; j < frequencies; ++j) table.grid[static_cast<std::size_t>(j)] = j + 1;

  std::vector<std::vector<double>> rows;
  for (const std::string& line : detail::read_lines(path)) {
    std::istringstream stream(line);
    std::vector<double> row;
    std::string token;
    bool numeric = true;
    while (stream >> token) {
      const auto value = detail::parse_number(token);
      if (!value) {
        numeric = false;
        break;
      }
      row.push_back(*value);
    }
    if (!numeric || row.empty()) continue;
    if (static_cast<int>(row.size()) != frequencies + 1) {
      fail(errc::format_error, path + ": numeric row with " + std::to_string(row.size()) +
                                   " values, expected " + std::to_string(frequencies + 1) +
                                   " (150 log-periodogram values plus a class code)");
    }
    const int code = static_cast<int>(row.back());
    if (code == aa_code || code == ao_code) rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(errc::format_error, path + ": no rows with the requested phoneme codes");

  table.values.resize(static_cast<int>(rows.size()), frequencies);
  table.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < frequencies; ++j) {
      table.values(static_cast<int>(i), j) = rows[i][static_cast<std::size_t>(j)];
    }
    table.labels[i] = static_cast<int>(rows[i].back()) == aa_code ? 1 : 2;
  }
  table.validate();
  return table;
}

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> test;
};

// Class-stratified draw without replacement; the complement is the test set.
// Deterministic in (seed, replication).
inline SplitIndices resample_split(const CurveTable& table,
                                   std::span<const int> per_class_train_counts, int replication,
                                   std::uint64_t seed) {
  const int num_classes = table.num_classes();
  if (static_cast<int>(per_class_train_counts.size()) != num_classes) {
    fail(errc::invalid_split, "need one training count per class");
  }
  SplitIndices split;
  Rng rng(Rng::derive(seed, 0x5911ULL, static_cast<std::uint64_t>(replication)));
  for (int g = 1; g <= num_classes; ++g) {
    std::vector<int> members;
    for (int i = 0; i < table.rows(); ++i) {
      if (table.labels[static_cast<std::size_t>(i)] == g) members.push_back(i);
    }
    const int take = per_class_train_counts[static_cast<std::size_t>(g - 1)];
    if (take < 0 || take > static_cast<int>(members.size())) {
      fail(errc::invalid_split, "class " + std::to_string(g) + " has " +
                                    std::to_string(members.size()) + " curves, cannot draw " +
                                    std::to_string(take));
    }
    rng.shuffle(members);
    for (std::size_t i = 0; i < members.size(); ++i) {
      (static_cast<int>(i) < take ? split.train : split.test).push_back(members[i]);
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

// The observation grid mapped affinely onto [0, 1], so every dataset shares
// the basis configuration. Distances are invariant to this up to a constant
// Jacobian, which cancels in every classification argmin.
inline std::vector<double> normalized_grid(const CurveTable& table) {
  std::vector<double> grid(table.grid.size());
  const double lo = table.grid.front();
  const double hi = table.grid.back();
  for (std::size_t j = 0; j < grid.size(); ++j) grid[j] = (table.grid[j] - lo) / (hi - lo);
  return grid;
}

inline std::vector<FunctionalDatum> smooth_table(const CurveTable& table,
                                                 const BasisSystem& basis) {
  return smooth_rows(basis, normalized_grid(table), table.values);
}

// Smooth each row, then take the analytic second derivative.
inline std::vector<FunctionalDatum> second_derivative_transform(const CurveTable& table,
                                                                const BasisSystem& basis) {
  if (basis.order() < 3) {
    fail(errc::invalid_configuration, "second derivatives need a basis of order >= 3");
  }
  std::vector<FunctionalDatum> out;
  out.reserve(static_cast<std::size_t>(table.rows()));
  for (FunctionalDatum& f : smooth_rows(basis, normalized_grid(table), table.values)) {
    out.push_back(derivative(f, 2));
  }
  return out;
}

// Resampling study over a fixed labeled table: per replication a stratified
// train/test split is drawn and every method is tuned and scored, exactly as
// in the simulation studies.
inline StudyResult run_resampling(const CurveTable& table, const std::vector<FunctionalDatum>& curves,
                                  std::span<const int> per_class_train_counts,
                                  std::span<const MethodSpec> methods, const TuningGrid& grid,
                                  int replications, std::uint64_t seed, int jobs = 1,
                                  Selection selection = Selection::test_grid_best,
                                  std::string title = {}) {
  if (table.labels.empty()) fail(errc::invalid_split, "resampling needs a labeled table");
  if (static_cast<int>(curves.size()) != table.rows()) {
    fail(errc::invalid_configuration, "need one smoothed curve per table row");
  }
  const int num_classes = table.num_classes();
  int total_drawn = 0;
  for (int count : per_class_train_counts) total_drawn += count;
  if (total_drawn >= table.rows()) {
    fail(errc::invalid_split, "the configured draw leaves no test curves");
  }
  std::vector<int> counts(per_class_train_counts.begin(), per_class_train_counts.end());
  auto make_split = [&table, &curves, counts, num_classes](std::uint64_t rep_seed) {
    const SplitIndices split = resample_split(table, counts, 0, rep_seed);
    std::vector<FunctionalDatum> train_data, test_data;
    std::vector<int> train_labels, test_labels;
    for (int i : split.train) {
      train_data.push_back(curves[static_cast<std::size_t>(i)]);
      train_labels.push_back(table.labels[static_cast<std::size_t>(i)]);
    }
    for (int i : split.test) {
      test_data.push_back(curves[static_cast<std::size_t>(i)]);
      test_labels.push_back(table.labels[static_cast<std::size_t>(i)]);
    }
    return TrainTestSplit{LabeledSample(std::move(train_data), std::move(train_labels), num_classes),
                          std::move(test_data), std::move(test_labels)};
  };
  if (title.empty()) title = table.source;
  return detail::run_study(std::move(title), methods, grid, replications, seed, jobs, selection,
                           make_split);
}

}  // namespace fdaclass
