// Command-line front end: scenario simulations, real-data resampling
// studies, cross-validation tables, train/test classification and report
// rendering. Every run writes a manifest that can be replayed with --config.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fdaclass/fdaclass.hpp"

namespace fs = std::filesystem;
using namespace fdaclass;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config_error = 1;
constexpr int exit_data_error = 2;
constexpr int exit_numerical_error = 3;

// raised when a completed study had replications fail beyond the retry policy
int deferred_exit = exit_ok;

int exit_code_for(errc code) {
  switch (code) {
    case errc::format_error:
    case errc::parse_error:
    case errc::empty_sample:
    case errc::out_of_domain:
    case errc::basis_mismatch:
      return exit_data_error;
    case errc::rank_deficient_fit:
    case errc::basis_degenerate:
    case errc::insufficient_data:
    case errc::degenerate_covariance:
    case errc::fold_degenerate:
      return exit_numerical_error;
    default:
      return exit_config_error;
  }
}

// Files created by the current run; removed again if it fails part-way.
class OutputTracker {
 public:
  void write(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(errc::format_error, "cannot write " + path);
    out << content;
    written_.push_back(path);
  }

  void discard_all() {
    for (const std::string& path : written_) {
      std::error_code ignored;
      fs::remove(path, ignored);
    }
  }

 private:
  std::vector<std::string> written_;
};

std::string trim(const std::string& text) {
  const auto begin = text.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = text.find_last_not_of(" \t\r");
  return text.substr(begin, end - begin + 1);
}

// manifest / config format: one "key = value" per line
std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::format_error, "cannot open config " + path);
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      fail(errc::invalid_configuration,
           path + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    entries.emplace_back(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  return entries;
}

// Expands --config files into ordinary arguments placed before the
// explicitly given ones, so command-line flags win.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  if (args.size() < 2) return args;
  std::string config_path;
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    }
  }
  if (config_path.empty()) return args;

  std::vector<std::string> expanded{args[0], args[1]};
  for (const auto& [key, value] : read_config(config_path)) {
    if (key == "command") {
      if (value != args[1]) {
        fail(errc::invalid_configuration, "config was written for command '" + value +
                                              "', invoked as '" + args[1] + "'");
      }
      continue;
    }
    if (key == "version") continue;
    expanded.push_back("--" + key + "=" + value);
  }
  expanded.insert(expanded.end(), args.begin() + 2, args.end());
  return expanded;
}

std::vector<MethodSpec> parse_methods(const std::string& text, bool two_classes) {
  std::vector<MethodSpec> methods;
  if (text == "all") {
    for (DistanceKind kind : {DistanceKind::l1, DistanceKind::l2, DistanceKind::linf,
                              DistanceKind::fpc_c, DistanceKind::fpc_d, DistanceKind::fm_c,
                              DistanceKind::fm_d}) {
      methods.push_back({Method::knn, kind});
    }
    for (DistanceKind kind : {DistanceKind::l1, DistanceKind::l2, DistanceKind::linf,
                              DistanceKind::fpc_c, DistanceKind::fpc_d, DistanceKind::fm_c,
                              DistanceKind::fm_d, DistanceKind::dh}) {
      if (kind == DistanceKind::dh && !two_classes) continue;
      methods.push_back({Method::centroid, kind});
    }
    methods.push_back({Method::flbcr, DistanceKind::fm_c});
    methods.push_back({Method::fqbcr, DistanceKind::fm_d});
    methods.push_back({Method::lbcr_coef, DistanceKind::l2});
    methods.push_back({Method::qbcr_coef, DistanceKind::l2});
    return methods;
  }
  std::istringstream stream(text);
  std::string token;
  while (std::getline(stream, token, ',')) {
    const auto spec = parse_method_spec(trim(token));
    if (!spec) fail(errc::invalid_configuration, "unknown method '" + token + "'");
    methods.push_back(*spec);
  }
  if (methods.empty()) fail(errc::invalid_configuration, "empty method list");
  return methods;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::istringstream stream(text);
  std::string token;
  while (std::getline(stream, token, ',')) out.push_back(std::atoi(trim(token).c_str()));
  return out;
}

std::string data_directory() {
  const char* env = std::getenv("FDACLASS_DATA_DIR");
  return env != nullptr ? env : "data";
}

struct ManifestWriter {
  std::ostringstream out;
  explicit ManifestWriter(const std::string& command) {
    out << "command = " << command << "\n";
    out << "version = " << version << "\n";
  }
  template <typename T>
  void add(const std::string& key, const T& value) {
    out << key << " = " << value << "\n";
  }
  std::string str() const { return out.str(); }
};

struct CommonOptions {
  std::string out_dir = ".";
  std::string config;
  std::uint64_t seed = 1;
  int jobs = 1;

  void attach(CLI::App* cmd, bool with_seed = true) {
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--config", config, "key = value config file; explicit flags win");
    if (with_seed) cmd->add_option("--seed", seed, "master random seed");
    cmd->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  }

  std::string path(const std::string& name) const {
    fs::create_directories(out_dir);
    return (fs::path(out_dir) / name).string();
  }
};

struct GridOptions {
  int max_components = 15;
  int max_neighbors = 9;
  int folds = 10;

  void attach(CLI::App* cmd) {
    cmd->add_option("--max-components", max_components, "largest truncation in the grid");
    cmd->add_option("--max-neighbors", max_neighbors, "largest kNN neighbor count");
    cmd->add_option("--folds", folds, "cross-validation folds");
  }

  TuningGrid grid() const {
    TuningGrid grid;
    grid.max_components = max_components;
    grid.neighbor_values.clear();
    for (int k = 1; k <= max_neighbors; ++k) grid.neighbor_values.push_back(k);
    grid.folds = folds;
    return grid;
  }
};

void emit_study(const StudyResult& result, const CommonOptions& common, OutputTracker& outputs,
                ManifestWriter& manifest) {
  outputs.write(common.path("results.csv"), result.to_csv());
  outputs.write(common.path("accuracy.txt"), result.accuracy_table());
  outputs.write(common.path("components.txt"), result.components_table());
  outputs.write(common.path("manifest.txt"), manifest.str());
  std::cout << result.accuracy_table();
  int failures = 0;
  for (const auto& cell : result.cells) failures += cell.failures;
  if (failures > 0) {
    std::cerr << "error: " << failures
              << " replication failure(s) exhausted the retry policy; counts are in results.csv\n";
    deferred_exit = exit_numerical_error;
  }
}

int run_simulate(CLI::App* cmd, bool* invoked) {
  auto common = std::make_shared<CommonOptions>();
  auto grid_opts = std::make_shared<GridOptions>();
  auto scenario = std::make_shared<int>(0);
  auto dataset = std::make_shared<std::string>();
  auto data_file = std::make_shared<std::string>();
  auto n_total = std::make_shared<int>(200);
  auto grid_size = std::make_shared<int>(50);
  auto reps = std::make_shared<int>(100);
  auto methods_text = std::make_shared<std::string>("all");
  auto selection_text = std::make_shared<std::string>("test-best");
  auto train_counts_text = std::make_shared<std::string>();
  auto aa_code = std::make_shared<int>(4);
  auto ao_code = std::make_shared<int>(5);

  cmd->add_option("--scenario", *scenario, "simulation scenario 1..4")->check(CLI::Range(1, 4));
  cmd->add_option("--dataset", *dataset, "tecator | tecator-d2 | phoneme")
      ->check(CLI::IsMember({"tecator", "tecator-d2", "phoneme"}));
  cmd->add_option("--data", *data_file, "dataset file (default: $FDACLASS_DATA_DIR/<name>.data)");
  cmd->add_option("--n", *n_total, "total sample size per scenario replication")
      ->check(CLI::IsMember({200, 300}));
  cmd->add_option("--grid", *grid_size, "observation points per curve")
      ->check(CLI::IsMember({50, 100}));
  cmd->add_option("--reps", *reps, "replications")->check(CLI::PositiveNumber);
  cmd->add_option("--methods", *methods_text, "comma list of methods, or 'all'");
  cmd->add_option("--selection", *selection_text,
                  "test-best (table convention) or cv (tune on training portion)")
      ->check(CLI::IsMember({"test-best", "cv"}));
  cmd->add_option("--train-counts", *train_counts_text,
                  "per-class training draw for dataset studies, e.g. 58,104");
  cmd->add_option("--aa-code", *aa_code, "phoneme class code kept as class 1");
  cmd->add_option("--ao-code", *ao_code, "phoneme class code kept as class 2");
  grid_opts->attach(cmd);
  common->attach(cmd);

  cmd->callback([=]() {
    *invoked = true;
    if ((*scenario == 0) == dataset->empty()) {
      fail(errc::invalid_configuration, "give exactly one of --scenario and --dataset");
    }
    const Selection selection = *parse_selection(*selection_text);
    const std::vector<MethodSpec> methods = parse_methods(*methods_text, true);

    OutputTracker outputs;
    ManifestWriter manifest("simulate");
    try {
      StudyResult result;
      if (*scenario != 0) {
        const ScenarioConfig cfg = ScenarioConfig::standard(*scenario, *n_total, *grid_size);
        result = run_monte_carlo(cfg, methods, grid_opts->grid(), *reps, common->seed,
                                 common->jobs, selection);
        manifest.add("scenario", *scenario);
        manifest.add("n", *n_total);
        manifest.add("grid", *grid_size);
      } else {
        std::string path = *data_file;
        if (path.empty()) {
          const std::string name = *dataset == "phoneme" ? "phoneme.data" : "tecator.data";
          path = (fs::path(data_directory()) / name).string();
        }
        CurveTable table;
        std::vector<FunctionalDatum> curves;
        std::vector<int> counts;
        if (*dataset == "phoneme") {
          table = load_phoneme(path, *aa_code, *ao_code);
          curves = smooth_table(table, build_bspline_basis(0.0, 1.0, 6, 40));
          counts = {300, 300};
          manifest.add("aa-code", *aa_code);
          manifest.add("ao-code", *ao_code);
        } else {
          table = load_tecator(path);
          if (*dataset == "tecator-d2") {
            curves = second_derivative_transform(table, build_bspline_basis(0.0, 1.0, 6, 40));
          } else {
            curves = smooth_table(table, build_bspline_basis(0.0, 1.0, 6, 20));
          }
          counts = {58, 104};
        }
        if (!train_counts_text->empty()) counts = parse_int_list(*train_counts_text);
        result = run_resampling(table, curves, counts, methods, grid_opts->grid(), *reps,
                                common->seed, common->jobs, selection, *dataset);
        manifest.add("dataset", *dataset);
        manifest.add("data", path);
        std::string joined;
        for (std::size_t i = 0; i < counts.size(); ++i) {
          joined += (i ? "," : "") + std::to_string(counts[static_cast<std::size_t>(i)]);
        }
        manifest.add("train-counts", joined);
      }
      manifest.add("reps", *reps);
      manifest.add("seed", common->seed);
      manifest.add("methods", *methods_text);
      manifest.add("selection", *selection_text);
      manifest.add("max-components", grid_opts->max_components);
      manifest.add("max-neighbors", grid_opts->max_neighbors);
      manifest.add("folds", grid_opts->folds);
      manifest.add("jobs", common->jobs);
      manifest.add("out", common->out_dir);
      emit_study(result, *common, outputs, manifest);
    } catch (...) {
      outputs.discard_all();
      throw;
    }
  });
  return 0;
}

int run_tune(CLI::App* cmd, bool* invoked) {
  auto common = std::make_shared<CommonOptions>();
  auto grid_opts = std::make_shared<GridOptions>();
  auto train_file = std::make_shared<std::string>();
  auto method_text = std::make_shared<std::string>("knn:fm_c");
  auto label_column = std::make_shared<std::string>("label");
  auto order = std::make_shared<int>(6);
  auto num_basis = std::make_shared<int>(20);
  auto loo = std::make_shared<bool>(false);

  cmd->add_option("--train", *train_file, "labeled curve csv")->required();
  cmd->add_option("--method", *method_text, "method to tune, e.g. knn:fm_c");
  cmd->add_option("--label-column", *label_column, "label column name in the csv");
  cmd->add_option("--order", *order, "spline order");
  cmd->add_option("--num-basis", *num_basis, "number of basis functions");
  cmd->add_flag("--loo", *loo, "leave-one-out instead of k folds");
  grid_opts->attach(cmd);
  common->attach(cmd);

  cmd->callback([=]() {
    *invoked = true;
    const auto spec = parse_method_spec(*method_text);
    if (!spec) fail(errc::invalid_configuration, "unknown method '" + *method_text + "'");

    CsvSchema schema;
    schema.label_column = *label_column;
    const CurveTable table = load_curves_csv(*train_file, schema);
    if (table.labels.empty()) fail(errc::invalid_configuration, "training csv has no labels");
    const BasisSystem basis = build_bspline_basis(0.0, 1.0, *order, *num_basis);
    const LabeledSample sample(smooth_table(table, basis), table.labels, table.num_classes());

    TuningGrid grid = grid_opts->grid();
    grid.leave_one_out = *loo;
    const CvResult cv = cross_validate(sample, *spec, grid, common->seed);

    std::ostringstream csv;
    csv << "truncation,k_neighbors,cv_accuracy\n";
    char buffer[32];
    for (const GridPoint& point : cv.table) {
      std::snprintf(buffer, sizeof(buffer), "%.10f", point.cv_accuracy);
      csv << point.truncation << ',' << point.k_neighbors << ',' << buffer << "\n";
    }

    OutputTracker outputs;
    ManifestWriter manifest("tune");
    manifest.add("train", *train_file);
    manifest.add("method", *method_text);
    manifest.add("label-column", *label_column);
    manifest.add("order", *order);
    manifest.add("num-basis", *num_basis);
    manifest.add("max-components", grid_opts->max_components);
    manifest.add("max-neighbors", grid_opts->max_neighbors);
    manifest.add("folds", grid_opts->folds);
    manifest.add("seed", common->seed);
    manifest.add("out", common->out_dir);
    try {
      outputs.write(common->path("cv_grid.csv"), csv.str());
      outputs.write(common->path("manifest.txt"), manifest.str());
    } catch (...) {
      outputs.discard_all();
      throw;
    }
    std::cout << "chosen: truncation=" << cv.truncation << " k_neighbors=" << cv.k_neighbors
              << " cv_accuracy=" << detail::fixed(cv.cv_accuracy, 6) << "\n";
    if (cv.max_truncation_used > 0 && cv.max_truncation_used < grid_opts->max_components) {
      std::cerr << "note: truncation grid clamped to " << cv.max_truncation_used
                << " by the retained ranks of the fold models\n";
    }
  });
  return 0;
}

int run_classify(CLI::App* cmd, bool* invoked) {
  auto common = std::make_shared<CommonOptions>();
  auto grid_opts = std::make_shared<GridOptions>();
  auto train_file = std::make_shared<std::string>();
  auto test_file = std::make_shared<std::string>();
  auto method_text = std::make_shared<std::string>("knn:fm_c");
  auto label_column = std::make_shared<std::string>("label");
  auto order = std::make_shared<int>(6);
  auto num_basis = std::make_shared<int>(20);
  auto components = std::make_shared<int>(0);
  auto neighbors = std::make_shared<int>(0);

  cmd->add_option("--train", *train_file, "labeled training csv")->required();
  cmd->add_option("--test", *test_file, "curve csv to classify")->required();
  cmd->add_option("--method", *method_text, "classifier, e.g. knn:fm_c");
  cmd->add_option("--label-column", *label_column, "label column name");
  cmd->add_option("--order", *order, "spline order");
  cmd->add_option("--num-basis", *num_basis, "number of basis functions");
  cmd->add_option("--components", *components, "truncation; tuned by cv when omitted");
  cmd->add_option("--neighbors", *neighbors, "kNN neighbor count; tuned by cv when omitted");
  grid_opts->attach(cmd);
  common->attach(cmd);

  cmd->callback([=]() {
    *invoked = true;
    const auto spec = parse_method_spec(*method_text);
    if (!spec) fail(errc::invalid_configuration, "unknown method '" + *method_text + "'");

    CsvSchema schema;
    schema.label_column = *label_column;
    const CurveTable train_table = load_curves_csv(*train_file, schema);
    if (train_table.labels.empty()) fail(errc::invalid_configuration, "training csv has no labels");
    const CurveTable test_table = load_curves_csv(*test_file, schema);

    const BasisSystem basis = build_bspline_basis(0.0, 1.0, *order, *num_basis);
    const LabeledSample train(smooth_table(train_table, basis), train_table.labels,
                              train_table.num_classes());
    const std::vector<FunctionalDatum> test = smooth_table(test_table, basis);

    int K = *components, k = *neighbors;
    const bool needs_K = spec->tunes_truncation() && K == 0;
    const bool needs_k = spec->tunes_neighbors() && k == 0;
    if (needs_K || needs_k) {
      const CvResult cv = cross_validate(train, *spec, grid_opts->grid(), common->seed);
      if (needs_K) K = cv.truncation;
      if (needs_k) k = cv.k_neighbors;
      std::cerr << "tuned by cross-validation: truncation=" << K << " k_neighbors=" << k << "\n";
    }
    const TrainedClassifier classifier = TrainedClassifier::train(train, *spec, K, k);
    const std::vector<int> predicted = classifier.classify(test);

    std::ostringstream csv;
    csv << "row,true_label,predicted_label\n";
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      csv << (i + 1) << ',';
      if (!test_table.labels.empty()) csv << test_table.labels[i];
      csv << ',' << predicted[i] << "\n";
    }

    OutputTracker outputs;
    ManifestWriter manifest("classify");
    manifest.add("train", *train_file);
    manifest.add("test", *test_file);
    manifest.add("method", *method_text);
    manifest.add("label-column", *label_column);
    manifest.add("order", *order);
    manifest.add("num-basis", *num_basis);
    manifest.add("components", K);
    manifest.add("neighbors", k);
    manifest.add("seed", common->seed);
    manifest.add("out", common->out_dir);
    try {
      outputs.write(common->path("predictions.csv"), csv.str());
      outputs.write(common->path("manifest.txt"), manifest.str());
    } catch (...) {
      outputs.discard_all();
      throw;
    }
    if (!test_table.labels.empty()) {
      int correct = 0;
      for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] == test_table.labels[i]) ++correct;
      }
      std::cout << "accuracy: " << correct << "/" << predicted.size() << " = "
                << detail::fixed(static_cast<double>(correct) / predicted.size(), 4) << "\n";
    } else {
      std::cout << "classified " << predicted.size() << " curves\n";
    }
  });
  return 0;
}

int run_report(CLI::App* cmd, bool* invoked) {
  auto results_file = std::make_shared<std::string>();
  auto components = std::make_shared<bool>(false);
  auto out_file = std::make_shared<std::string>();

  cmd->add_option("--results", *results_file, "results.csv from a simulate run")->required();
  cmd->add_flag("--components", *components, "render the component-count table instead");
  cmd->add_option("--out", *out_file, "also write the table to this file");

  cmd->callback([=]() {
    *invoked = true;
    std::ifstream in(*results_file);
    if (!in) fail(errc::format_error, "cannot open " + *results_file);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const StudySummary summary = StudyResult::parse_csv(buffer.str());
    const std::string table = *components ? StudyResult::render_components(summary)
                                          : StudyResult::render_accuracy(summary);
    std::cout << table;
    if (!out_file->empty()) {
      OutputTracker outputs;
      outputs.write(*out_file, table);
    }
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"functional-data classification toolkit"};
  // --config injects values as leading arguments; later (explicit) flags win
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  bool invoked = false;
  run_simulate(app.add_subcommand("simulate", "replicated scenario or dataset study"), &invoked);
  run_tune(app.add_subcommand("tune", "cross-validation grid for one method"), &invoked);
  run_classify(app.add_subcommand("classify", "train on one csv, label another"), &invoked);
  run_report(app.add_subcommand("report", "render a results csv as a text table"), &invoked);

  try {
    const std::vector<std::string> args = expand_config(argc, argv);
    std::vector<const char*> argv2;
    argv2.reserve(args.size());
    for (const std::string& arg : args) argv2.push_back(arg.c_str());
    app.parse(static_cast<int>(argv2.size()), argv2.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? exit_ok : exit_config_error;
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_numerical_error;
  }
  return deferred_exit;
}
