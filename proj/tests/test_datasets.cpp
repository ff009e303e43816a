#include <catch2/catch.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>

#include "fdaclass/datasets.hpp"
#include "fdaclass/rng.hpp"
#include "oracles.hpp"

using fdaclass::BasisSystem;
using fdaclass::CurveTable;
using fdaclass::Matrix;
using fdaclass::MethodSpec;
using fdaclass::Rng;
using fdaclass::errc;

namespace {

std::string fixture(const std::string& name) {
  return std::string(FDACLASS_FIXTURE_DIR) + "/" + name;
}

std::string temp_path(const std::string& name) {
  return std::string("fdaclass_test_") + name;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

}  // namespace

TEST_CASE("the generic csv schema parses grids, curves and labels", "[datasets]") {
  const CurveTable table = fdaclass::load_curves_csv(fixture("toy_curves.csv"));
  CHECK(table.rows() == 5);
  CHECK(table.cols() == 9);
  CHECK(table.grid.front() == 0.0);
  CHECK(table.grid.back() == 1.0);
  REQUIRE(table.labels.size() == 5);
  CHECK(table.num_classes() == 2);
  CHECK(table.class_count(1) == 3);
  CHECK(table.class_count(2) == 2);

  const std::string tiny = temp_path("tiny.csv");
  write_file(tiny, "0,0.5,1\n1,2,3\n4,5,6\n");
  const CurveTable unlabeled = fdaclass::load_curves_csv(tiny);
  CHECK(unlabeled.rows() == 2);
  CHECK(unlabeled.cols() == 3);
  CHECK(unlabeled.labels.empty());
  std::remove(tiny.c_str());
}

TEST_CASE("malformed csv rows are reported with their position", "[datasets]") {
  const std::string ragged = temp_path("ragged.csv");
  write_file(ragged, "0,1,label\n1,2,1\n3,4\n");
  try {
    fdaclass::load_curves_csv(ragged);
    FAIL("expected format-error");
  } catch (const fdaclass::error& e) {
    CHECK(e.code() == errc::format_error);
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
  std::remove(ragged.c_str());

  const std::string bad_cell = temp_path("badcell.csv");
  write_file(bad_cell, "0,1,label\n1,oops,1\n");
  try {
    fdaclass::load_curves_csv(bad_cell);
    FAIL("expected parse-error");
  } catch (const fdaclass::error& e) {
    CHECK(e.code() == errc::parse_error);
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    CHECK(std::string(e.what()).find("column 2") != std::string::npos);
  }
  std::remove(bad_cell.c_str());
}

TEST_CASE("curve tables survive a write/read round trip bit for bit", "[datasets]") {
  Rng rng(3);
  CurveTable table;
  table.grid = {0.0, 0.19, 0.52, 0.77, 1.0};
  table.values.resize(4, 5);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 5; ++j) table.values(i, j) = 10.0 * rng.normal();
  }
  table.labels = {1, 2, 1, 2};

  const std::string path = temp_path("roundtrip.csv");
  fdaclass::write_curves_csv(table, path);
  const CurveTable back = fdaclass::load_curves_csv(path);
  std::remove(path.c_str());

  REQUIRE(back.rows() == table.rows());
  REQUIRE(back.cols() == table.cols());
  CHECK(back.values == table.values);
  CHECK(back.grid == table.grid);
  CHECK(back.labels == table.labels);
}

TEST_CASE("the meat spectra layout parses and labels by the fat threshold", "[datasets]") {
  const CurveTable table = fdaclass::load_tecator(fixture("toy_tecator.data"), 5);
  CHECK(table.rows() == 5);
  CHECK(table.cols() == 100);
  CHECK(table.grid.front() == 850.0);
  CHECK(table.grid.back() == 1050.0);
  // fat contents 25.5, 12.0, 31.2, 20.0, 8.4: exactly 20 percent is low fat
  CHECK(table.labels == std::vector<int>{1, 2, 1, 2, 2});
}

TEST_CASE("the phoneme layout keeps only the two requested codes", "[datasets]") {
  const CurveTable table = fdaclass::load_phoneme(fixture("toy_phoneme.data"));
  CHECK(table.rows() == 5);  // the code-1 row is dropped
  CHECK(table.cols() == 150);
  CHECK(table.labels == std::vector<int>{1, 2, 1, 2, 1});
}

TEST_CASE("resampling splits are stratified and reproducible", "[datasets]") {
  const CurveTable table = fdaclass::load_curves_csv(fixture("toy_curves.csv"));

  const std::vector<int> counts{2, 1};
  const auto a = fdaclass::resample_split(table, counts, 0, 42);
  const auto b = fdaclass::resample_split(table, counts, 0, 42);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  const auto c = fdaclass::resample_split(table, counts, 1, 42);
  CHECK(a.train != c.train);

  CHECK(a.train.size() == 3);
  CHECK(a.test.size() == 2);
  std::set<int> all(a.train.begin(), a.train.end());
  all.insert(a.test.begin(), a.test.end());
  CHECK(all.size() == 5);
  int class1 = 0;
  for (int i : a.train) {
    if (table.labels[static_cast<std::size_t>(i)] == 1) ++class1;
  }
  CHECK(class1 == 2);

  // taking whole classes leaves an empty test set
  const auto full = fdaclass::resample_split(table, std::vector<int>{3, 2}, 0, 1);
  CHECK(full.test.empty());

  CHECK_THROWS_MATCHES(fdaclass::resample_split(table, std::vector<int>{4, 1}, 0, 1),
                       fdaclass::error, Catch::Predicate<fdaclass::error>([](const fdaclass::error& e) {
                         return e.code() == errc::invalid_split;
                       }));
}

TEST_CASE("second derivatives of simple functions match closed forms", "[datasets]") {
  const BasisSystem basis = fdaclass::build_bspline_basis(0.0, 1.0, 6, 20);
  const auto ts = oracles::linspace(0.0, 1.0, 100);

  CurveTable table;
  table.grid = ts;
  table.values.resize(3, static_cast<int>(ts.size()));
  for (std::size_t j = 0; j < ts.size(); ++j) {
    table.values(0, static_cast<int>(j)) = 2.0 + 3.0 * ts[j];          // line
    table.values(1, static_cast<int>(j)) = std::pow(ts[j], 3.0);       // cubic
    table.values(2, static_cast<int>(j)) = std::sin(2.0 * M_PI * ts[j]);
  }

  const auto transformed = fdaclass::second_derivative_transform(table, basis);
  REQUIRE(transformed.size() == 3);

  for (double t : oracles::linspace(0.0, 1.0, 101)) {
    CHECK(std::abs(fdaclass::evaluate(transformed[0], t)) < 1e-6);
  }
  for (double t : oracles::linspace(0.1, 0.9, 81)) {
    CHECK(fdaclass::evaluate(transformed[1], t) == Approx(6.0 * t).margin(1e-3));
  }
  double worst_rel = 0.0;
  for (double t : oracles::linspace(0.1, 0.9, 161)) {
    const double truth = -4.0 * M_PI * M_PI * std::sin(2.0 * M_PI * t);
    const double got = fdaclass::evaluate(transformed[2], t);
    worst_rel = std::max(worst_rel, std::abs(got - truth) / (4.0 * M_PI * M_PI));
  }
  CHECK(worst_rel < 0.01);
}

TEST_CASE("grid normalization makes smoothing location invariant", "[datasets]") {
  Rng rng(7);
  const BasisSystem basis = fdaclass::build_bspline_basis(0.0, 1.0, 4, 8);
  const int J = 40;
  Matrix values(2, J);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < J; ++j) values(i, j) = rng.normal();
  }
  CurveTable wide, unit;
  wide.values = values;
  unit.values = values;
  for (int j = 0; j < J; ++j) {
    const double s = static_cast<double>(j) / (J - 1);
    wide.grid.push_back(850.0 + 200.0 * s);
    unit.grid.push_back(s);
  }
  const auto from_wide = fdaclass::smooth_table(wide, basis);
  const auto from_unit = fdaclass::smooth_table(unit, basis);
  for (int i = 0; i < 2; ++i) {
    CHECK((from_wide[static_cast<std::size_t>(i)].coeffs() -
           from_unit[static_cast<std::size_t>(i)].coeffs())
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }
}

TEST_CASE("resampling studies over a fixed table are deterministic", "[datasets]") {
  // inflate the toy table so folds always contain both classes
  const CurveTable toy = fdaclass::load_curves_csv(fixture("toy_curves.csv"));
  CurveTable table;
  table.grid = toy.grid;
  table.values.resize(30, toy.cols());
  Rng rng(11);
  for (int i = 0; i < 30; ++i) {
    const int src = i % toy.rows();
    for (int j = 0; j < toy.cols(); ++j) {
      table.values(i, j) = toy.values(src, j) + 0.01 * rng.normal();
    }
    table.labels.push_back(toy.labels[static_cast<std::size_t>(src)]);
  }

  const BasisSystem basis = fdaclass::build_bspline_basis(0.0, 1.0, 4, 6);
  const auto curves = fdaclass::smooth_table(table, basis);
  const std::vector<MethodSpec> methods{{fdaclass::Method::centroid, fdaclass::DistanceKind::fm_c}};
  fdaclass::TuningGrid grid;
  grid.folds = 3;
  grid.max_components = 3;

  const std::vector<int> counts{12, 8};
  for (auto selection : {fdaclass::Selection::test_grid_best, fdaclass::Selection::cross_validation}) {
    const auto first =
        fdaclass::run_resampling(table, curves, counts, methods, grid, 4, 21, 2, selection, "toy");
    const auto second =
        fdaclass::run_resampling(table, curves, counts, methods, grid, 4, 21, 1, selection, "toy");
    CHECK(first.to_csv() == second.to_csv());
    CHECK(first.cells.front().failures == 0);
    REQUIRE(first.cells.front().accuracy.size() == 4);
  }
}
