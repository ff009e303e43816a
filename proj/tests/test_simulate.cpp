#include <catch2/catch.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "fdaclass/numeric.hpp"
#include "fdaclass/simulate.hpp"
#include "oracles.hpp"

using fdaclass::MethodSpec;
using fdaclass::ScenarioConfig;
using fdaclass::SimulatedDataset;
using fdaclass::TuningGrid;
using fdaclass::Vector;

namespace {

// trapezoid projections of noiseless curves on the true eigenfunctions
std::vector<double> score_sample(const SimulatedDataset& ds, const ScenarioConfig& cfg, int cls,
                                 int k) {
  const int J = static_cast<int>(ds.grid.size());
  std::vector<double> scores;
  for (int i = 0; i < ds.values.rows(); ++i) {
    if (ds.labels[static_cast<std::size_t>(i)] != cls) continue;
    double sum = 0.0;
    for (int j = 0; j < J; ++j) {
      const double t = ds.grid[static_cast<std::size_t>(j)];
      const double centered = ds.values(i, j) - cfg.mean(cls, t);
      const double weight = (j == 0 || j == J - 1) ? 0.5 : 1.0;
      sum += weight * centered * ScenarioConfig::eigenfunction(k, t);
    }
    scores.push_back(sum / (J - 1));
  }
  return scores;
}

}  // namespace

TEST_CASE("pairwise summation matches a long-double reference", "[simulate]") {
  fdaclass::Rng rng(3);
  std::vector<double> xs;
  long double reference = 0.0L;
  for (int i = 0; i < 10001; ++i) {
    const double x = rng.normal() * std::pow(10.0, rng.uniform_int(6));
    xs.push_back(x);
    reference += static_cast<long double>(x);
  }
  const double sum = fdaclass::pairwise_sum(xs);
  CHECK(std::abs(sum - static_cast<double>(reference)) <=
        1e-12 * std::abs(static_cast<double>(reference)));
}

TEST_CASE("without noise or scores the curves are exactly the means", "[simulate]") {
  ScenarioConfig cfg;
  cfg.n1 = cfg.n2 = 3;
  cfg.n10 = cfg.n20 = 2;
  cfg.noise_variance = 0.0;
  cfg.kl_truncation = 0;
  cfg.grid_size = 17;
  const SimulatedDataset ds = fdaclass::generate_dataset(cfg, 5);
  for (int i = 0; i < ds.values.rows(); ++i) {
    const int cls = ds.labels[static_cast<std::size_t>(i)];
    for (int j = 0; j < ds.values.cols(); ++j) {
      CHECK(ds.values(i, j) == cfg.mean(cls, ds.grid[static_cast<std::size_t>(j)]));
    }
  }
}

TEST_CASE("pointwise variance approaches the truncated series plus noise", "[simulate]") {
  ScenarioConfig cfg;
  cfg.n1 = 5000;
  cfg.n2 = 1;
  cfg.n10 = cfg.n20 = 0;
  cfg.grid_size = 51;  // t = 0.5 lies on the grid
  const SimulatedDataset ds = fdaclass::generate_dataset(cfg, 11);

  const int j_half = 25;
  REQUIRE(ds.grid[j_half] == Approx(0.5).margin(1e-15));
  std::vector<double> values;
  for (int i = 0; i < cfg.n1; ++i) values.push_back(ds.values(i, j_half));
  const auto stats = fdaclass::mean_sd(values);

  double expected = cfg.noise_variance;
  for (int k = 1; k <= cfg.kl_truncation; ++k) {
    const double psi = ScenarioConfig::eigenfunction(k, 0.5);
    expected += cfg.eigenvalue(1, k) * psi * psi;
  }
  CHECK(stats.sd * stats.sd == Approx(expected).epsilon(0.10));
}

TEST_CASE("scenario 2 doubles the class-2 score variances", "[simulate]") {
  ScenarioConfig cfg;
  cfg.scenario_id = 2;
  cfg.n1 = cfg.n2 = 5000;
  cfg.n10 = cfg.n20 = 0;
  cfg.grid_size = 201;
  cfg.noise_variance = 0.0;
  cfg.kl_truncation = 3;
  const SimulatedDataset ds = fdaclass::generate_dataset(cfg, 13);
  for (int k = 1; k <= 3; ++k) {
    const auto s1 = score_sample(ds, cfg, 1, k);
    const auto s2 = score_sample(ds, cfg, 2, k);
    const auto v1 = fdaclass::mean_sd(s1);
    const auto v2 = fdaclass::mean_sd(s2);
    CHECK(v2.sd * v2.sd == Approx(2.0 * v1.sd * v1.sd).epsilon(0.15));
    CHECK(v1.sd * v1.sd == Approx(cfg.eigenvalue(1, k)).epsilon(0.15));
  }
}

TEST_CASE("exponential scores are standardized to the target variances", "[simulate]") {
  ScenarioConfig cfg;
  cfg.scenario_id = 3;
  cfg.n1 = 10000;
  cfg.n2 = 1;
  cfg.n10 = cfg.n20 = 0;
  cfg.grid_size = 201;
  cfg.noise_variance = 0.0;
  cfg.kl_truncation = 3;
  const SimulatedDataset ds = fdaclass::generate_dataset(cfg, 17);
  for (int k = 1; k <= 3; ++k) {
    const auto scores = score_sample(ds, cfg, 1, k);
    const auto stats = fdaclass::mean_sd(scores);
    const double lambda = cfg.eigenvalue(1, k);
    CHECK(std::abs(stats.mean) < 3.0 * std::sqrt(lambda / cfg.n1));
    CHECK(stats.sd * stats.sd == Approx(lambda).epsilon(0.10));
    // exponential scores are skewed, unlike the Gaussian scenarios
    double third = 0.0;
    for (double s : scores) third += std::pow(s - stats.mean, 3.0);
    CHECK(third / static_cast<double>(scores.size()) > 0.0);
  }
}

TEST_CASE("datasets are reproducible and split to the configured sizes", "[simulate]") {
  const ScenarioConfig cfg = ScenarioConfig::standard(1, 200, 50);
  const SimulatedDataset a = fdaclass::generate_dataset(cfg, 101);
  const SimulatedDataset b = fdaclass::generate_dataset(cfg, 101);
  CHECK(a.values == b.values);
  CHECK(a.train_indices == b.train_indices);

  const SimulatedDataset c = fdaclass::generate_dataset(cfg, 102);
  CHECK(a.values != c.values);

  CHECK(a.train_indices.size() == 150);
  CHECK(a.test_indices.size() == 50);
  std::set<int> all(a.train_indices.begin(), a.train_indices.end());
  all.insert(a.test_indices.begin(), a.test_indices.end());
  CHECK(all.size() == 200);
  int train_class1 = 0;
  for (int i : a.train_indices) {
    if (a.labels[static_cast<std::size_t>(i)] == 1) ++train_class1;
  }
  CHECK(train_class1 == 75);
}

TEST_CASE("monte carlo runs are deterministic end to end", "[simulate]") {
  ScenarioConfig cfg;
  cfg.n1 = cfg.n2 = 20;
  cfg.n10 = cfg.n20 = 15;
  const std::vector<MethodSpec> methods{{fdaclass::Method::knn, fdaclass::DistanceKind::l2},
                                        {fdaclass::Method::flbcr, fdaclass::DistanceKind::fm_c}};
  TuningGrid grid;
  grid.folds = 5;
  grid.max_components = 4;
  grid.neighbor_values = {1, 3};

  for (auto selection : {fdaclass::Selection::test_grid_best, fdaclass::Selection::cross_validation}) {
    const auto first = fdaclass::run_monte_carlo(cfg, methods, grid, 3, 7, 2, selection);
    const auto second = fdaclass::run_monte_carlo(cfg, methods, grid, 3, 7, 1, selection);
    CHECK(first.to_csv() == second.to_csv());
    CHECK(first.accuracy_table() == second.accuracy_table());

    for (const auto& cell : first.cells) {
      CHECK(cell.failures == 0);
      REQUIRE(cell.accuracy.size() == 3);
      for (double a : cell.accuracy) {
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
      }
    }
    // flbcr tunes a truncation, knn:l2 tunes neighbors
    CHECK(first.cells[1].components.size() == 3);
    CHECK(first.cells[0].neighbors.size() == 3);
  }
}

TEST_CASE("different master seeds give independent replication draws", "[simulate]") {
  ScenarioConfig cfg;
  cfg.n1 = cfg.n2 = 15;
  cfg.n10 = cfg.n20 = 10;
  const std::vector<MethodSpec> methods{{fdaclass::Method::knn, fdaclass::DistanceKind::l2}};
  TuningGrid grid;
  grid.folds = 5;
  grid.neighbor_values = {1, 3};
  const auto a = fdaclass::run_monte_carlo(cfg, methods, grid, 4, 1, 1);
  const auto b = fdaclass::run_monte_carlo(cfg, methods, grid, 4, 2, 1);
  // consecutive seeds once shared almost every replication stream
  CHECK(a.cells.front().accuracy != b.cells.front().accuracy);
}

TEST_CASE("best-on-test selection matches a plain classifier sweep", "[simulate]") {
  ScenarioConfig cfg;
  cfg.n1 = cfg.n2 = 14;
  cfg.n10 = cfg.n20 = 10;
  const auto ds = fdaclass::generate_dataset(cfg, 31);
  const fdaclass::BasisSystem basis = fdaclass::build_bspline_basis(0.0, 1.0, 6, 20);
  const auto curves = fdaclass::smooth_rows(basis, ds.grid, ds.values);
  std::vector<fdaclass::FunctionalDatum> train_data, test_data;
  std::vector<int> train_labels, test_labels;
  for (int i : ds.train_indices) {
    train_data.push_back(curves[static_cast<std::size_t>(i)]);
    train_labels.push_back(ds.labels[static_cast<std::size_t>(i)]);
  }
  for (int i : ds.test_indices) {
    test_data.push_back(curves[static_cast<std::size_t>(i)]);
    test_labels.push_back(ds.labels[static_cast<std::size_t>(i)]);
  }
  const fdaclass::TrainTestSplit split{fdaclass::LabeledSample(train_data, train_labels, 2),
                                       test_data, test_labels};

  TuningGrid grid;
  grid.max_components = 4;
  grid.neighbor_values = {1, 2, 3};
  for (const char* name : {"knn:fm_c", "knn:l2", "centroid:fm_d", "flbcr"}) {
    const auto spec = *fdaclass::parse_method_spec(name);
    const auto outcome = fdaclass::detail::evaluate_split_test_best(split, spec, grid);

    // sweep the grid with independently trained classifiers
    double best = -1.0;
    int best_K = 0, best_k = 0;
    const int K_hi = spec.tunes_truncation() ? grid.max_components : 0;
    for (int K = spec.tunes_truncation() ? 1 : 0; K <= K_hi; ++K) {
      for (int k : spec.tunes_neighbors() ? grid.neighbor_values : std::vector<int>{0}) {
        fdaclass::TrainedClassifier clf = [&] {
          try {
            return fdaclass::TrainedClassifier::train(split.train, spec, K, k);
          } catch (const fdaclass::error&) {
            return fdaclass::TrainedClassifier::train(split.train, spec, K - 1, k);
          }
        }();
        if (clf.truncation() != K) continue;  // K beyond the retained rank
        int correct = 0;
        for (std::size_t i = 0; i < test_data.size(); ++i) {
          if (clf.classify(test_data[i]) == test_labels[i]) ++correct;
        }
        const double acc = static_cast<double>(correct) / test_data.size();
        if (acc > best) {
          best = acc;
          best_K = K;
          best_k = k;
        }
      }
    }
    INFO(name);
    CHECK(outcome.accuracy == best);
    CHECK(outcome.truncation == best_K);
    CHECK(outcome.k_neighbors == best_k);
  }
}

TEST_CASE("splits that leave no test curves are rejected", "[simulate]") {
  ScenarioConfig cfg;
  cfg.n1 = cfg.n2 = 10;
  cfg.n10 = cfg.n20 = 10;
  const std::vector<MethodSpec> methods{{fdaclass::Method::knn, fdaclass::DistanceKind::l2}};
  CHECK_THROWS_MATCHES(fdaclass::run_monte_carlo(cfg, methods, TuningGrid{}, 1, 1),
                       fdaclass::error, Catch::Predicate<fdaclass::error>([](const fdaclass::error& e) {
                         return e.code() == fdaclass::errc::invalid_split;
                       }));
}

TEST_CASE("every scenario and grid configuration generates and runs", "[simulate]") {
  const std::vector<MethodSpec> methods{{fdaclass::Method::centroid, fdaclass::DistanceKind::fm_c}};
  TuningGrid grid;
  grid.max_components = 3;
  for (int scenario : {1, 2, 3, 4}) {
    for (int n : {200, 300}) {
      for (int J : {50, 100}) {
        ScenarioConfig cfg = ScenarioConfig::standard(scenario, n, J);
        // shrink to keep this a smoke test
        cfg.n1 = cfg.n2 = 20;
        cfg.n10 = cfg.n20 = 15;
        const auto result = fdaclass::run_monte_carlo(cfg, methods, grid, 1, 5, 1);
        REQUIRE(result.cells.front().accuracy.size() == 1);
        const double acc = result.cells.front().accuracy.front();
        CHECK(acc >= 0.0);
        CHECK(acc <= 1.0);
      }
    }
  }
}

TEST_CASE("results tables round-trip through their csv form", "[simulate]") {
  ScenarioConfig cfg;
  cfg.n1 = cfg.n2 = 15;
  cfg.n10 = cfg.n20 = 10;
  const std::vector<MethodSpec> methods{{fdaclass::Method::knn, fdaclass::DistanceKind::fm_c},
                                        {fdaclass::Method::centroid, fdaclass::DistanceKind::l2}};
  TuningGrid grid;
  grid.folds = 5;
  grid.max_components = 3;
  grid.neighbor_values = {1, 3};
  const auto result = fdaclass::run_monte_carlo(cfg, methods, grid, 2, 3, 1);
  for (const auto& cell : result.cells) CHECK(cell.failures == 0);

  const auto parsed = fdaclass::StudyResult::parse_csv(result.to_csv());
  CHECK(fdaclass::StudyResult::render_accuracy(parsed) == result.accuracy_table());
  CHECK(fdaclass::StudyResult::render_components(parsed) == result.components_table());
  CHECK(fdaclass::StudyResult::write_csv(parsed) == result.to_csv());
}
