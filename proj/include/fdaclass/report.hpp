#pragma once

#include <cstdio>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fdaclass/classifiers.hpp"
#include "fdaclass/errors.hpp"
#include "fdaclass/numeric.hpp"

namespace fdaclass {

// Accumulated outcomes of one method over a replicated study. Vectors are in
// replication order; failed replications are excluded from them and counted.
struct ResultCell {
  MethodSpec spec;
  std::vector<double> accuracy;
  std::vector<double> components;  // chosen truncation per replication, when tuned
  std::vector<double> neighbors;   // chosen k per replication, when tuned
  int failures = 0;
};

struct CellSummary {
  MethodSpec spec;
  int failures = 0;
  MeanSd accuracy;
  std::optional<MeanSd> components;
  std::optional<MeanSd> neighbors;
};

struct StudySummary {
  std::string title;
  std::uint64_t seed = 0;
  int replications = 0;
  std::string selection;
  std::vector<CellSummary> cells;

  const CellSummary* find(Method method, DistanceKind kind) const {
    for (const CellSummary& cell : cells) {
      if (cell.spec.method == method &&
          (!method_uses_kind(method) || cell.spec.kind == kind)) {
        return &cell;
      }
    }
    return nullptr;
  }
};

struct StudyResult {
  std::string title;
  std::uint64_t seed = 0;
  int replications = 0;
  std::string selection;
  std::vector<ResultCell> cells;

  StudySummary summary() const {
    StudySummary out;
    out.title = title;
    out.seed = seed;
    out.replications = replications;
    out.selection = selection;
    for (const ResultCell& cell : cells) {
      CellSummary s;
      s.spec = cell.spec;
      s.failures = cell.failures;
      s.accuracy = mean_sd(cell.accuracy);
      if (!cell.components.empty()) s.components = mean_sd(cell.components);
      if (!cell.neighbors.empty()) s.neighbors = mean_sd(cell.neighbors);
      out.cells.push_back(std::move(s));
    }
    return out;
  }

  const ResultCell* find(Method method, DistanceKind kind) const {
    for (const ResultCell& cell : cells) {
      if (cell.spec.method == method &&
          (!method_uses_kind(method) || cell.spec.kind == kind)) {
        return &cell;
      }
    }
    return nullptr;
  }

  std::string to_csv() const { return write_csv(summary()); }
  std::string accuracy_table() const { return render_accuracy(summary()); }
  std::string components_table() const { return render_components(summary()); }

  static std::string write_csv(const StudySummary& summary);
  static StudySummary parse_csv(const std::string& text);
  static std::string render_accuracy(const StudySummary& summary);
  static std::string render_components(const StudySummary& summary);
};

namespace detail {

inline std::string fixed(double value, int digits, bool strip_leading_zero = false) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", digits, value);
  std::string out = buffer;
  if (strip_leading_zero) {
    if (out.rfind("0.", 0) == 0) out.erase(0, 1);
    if (out.rfind("-0.", 0) == 0) out.erase(1, 1);
  }
  return out;
}

// a "mean (sd)" cell like the published tables use
inline std::string stat_cell(const MeanSd& stats, int digits, bool strip_zero) {
  return fixed(stats.mean, digits, strip_zero) + " (" + fixed(stats.sd, digits, strip_zero) + ")";
}

inline std::string render_table(const StudySummary& summary, bool components) {
  const std::vector<DistanceKind> kinds{DistanceKind::l1,    DistanceKind::l2,
                                        DistanceKind::linf,  DistanceKind::fpc_c,
                                        DistanceKind::fpc_d, DistanceKind::fm_c,
                                        DistanceKind::fm_d,  DistanceKind::dh};
  const std::vector<Method> rows{Method::knn,   Method::centroid,  Method::flbcr,
                                 Method::fqbcr, Method::lbcr_coef, Method::qbcr_coef};

  auto render_cell = [&](const CellSummary* cell) -> std::optional<std::string> {
    if (cell == nullptr) return std::nullopt;
    if (components) {
      if (!cell->components) return std::nullopt;
      return stat_cell(*cell->components, 2, false);
    }
    return stat_cell(cell->accuracy, 4, true);
  };

  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{"Method"};
  for (DistanceKind kind : kinds) header.push_back(kind_name(kind));
  header.push_back("-");
  grid.push_back(header);

  for (Method method : rows) {
    std::vector<std::string> line{method_name(method)};
    bool any = false;
    for (DistanceKind kind : kinds) {
      std::optional<std::string> cell;
      if (method_uses_kind(method)) cell = render_cell(summary.find(method, kind));
      any = any || cell.has_value();
      line.push_back(cell.value_or("-"));
    }
    std::optional<std::string> tail;
    if (!method_uses_kind(method)) tail = render_cell(summary.find(method, DistanceKind::l2));
    any = any || tail.has_value();
    line.push_back(tail.value_or("-"));
    if (any) grid.push_back(line);
  }

  std::vector<std::size_t> width(grid.front().size(), 0);
  for (const auto& line : grid) {
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  }
  std::ostringstream out;
  out << (components ? "Optimal number of components" : "Proportion of correct classification")
      << " -- " << summary.title << " (" << summary.replications << " replications, seed "
      << summary.seed << ", selection " << summary.selection << ")\n";
  for (const auto& line : grid) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      out << line[c];
      if (c + 1 < line.size()) out << std::string(width[c] - line[c].size() + 2, ' ');
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace detail

inline std::string StudyResult::write_csv(const StudySummary& summary) {
  std::ostringstream out;
  out << "study,selection,seed,method,kind,replications,failures,mean_accuracy,sd_accuracy,"
         "mean_components,sd_components,mean_neighbors,sd_neighbors\n";
  for (const CellSummary& cell : summary.cells) {
    out << summary.title << ',' << summary.selection << ',' << summary.seed << ','
        << method_name(cell.spec.method) << ','
        << (method_uses_kind(cell.spec.method) ? kind_name(cell.spec.kind) : "") << ','
        << summary.replications << ',' << cell.failures << ','
        << detail::fixed(cell.accuracy.mean, 10) << ',' << detail::fixed(cell.accuracy.sd, 10);
    for (const auto& stats : {cell.components, cell.neighbors}) {
      if (stats) {
        out << ',' << detail::fixed(stats->mean, 6) << ',' << detail::fixed(stats->sd, 6);
      } else {
        out << ",,";
      }
    }
    out << "\n";
  }
  return out.str();
}

inline StudySummary StudyResult::parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(errc::format_error, "results csv is empty");
  StudySummary summary;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream row(line);
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    cells.resize(13);
    if (first) {
      summary.title = cells[0];
      summary.selection = cells[1];
      summary.seed = std::strtoull(cells[2].c_str(), nullptr, 10);
      summary.replications = std::atoi(cells[5].c_str());
      first = false;
    }
    const auto spec = parse_method_spec(cells[4].empty() ? cells[3] : cells[3] + ":" + cells[4]);
    if (!spec) fail(errc::parse_error, "unknown method '" + cells[3] + "' in results csv");
    CellSummary out;
    out.spec = *spec;
    out.failures = std::atoi(cells[6].c_str());
    out.accuracy = {std::atof(cells[7].c_str()), std::atof(cells[8].c_str())};
    if (!cells[9].empty()) out.components = MeanSd{std::atof(cells[9].c_str()), std::atof(cells[10].c_str())};
    if (!cells[11].empty()) out.neighbors = MeanSd{std::atof(cells[11].c_str()), std::atof(cells[12].c_str())};
    summary.cells.push_back(std::move(out));
  }
  return summary;
}

inline std::string StudyResult::render_accuracy(const StudySummary& summary) {
  return detail::render_table(summary, false);
}
inline std::string StudyResult::render_components(const StudySummary& summary) {
  return detail::render_table(summary, true);
}

}  // namespace fdaclass
