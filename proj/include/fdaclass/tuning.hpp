#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fdaclass/classifiers.hpp"
#include "fdaclass/distances.hpp"
#include "fdaclass/errors.hpp"
#include "fdaclass/fpca.hpp"
#include "fdaclass/rng.hpp"

namespace fdaclass {

struct TuningGrid {
  int max_components = 15;
  std::vector<int> neighbor_values = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  int folds = 10;
  bool leave_one_out = false;

  void validate() const {
    if (max_components < 1) fail(errc::invalid_configuration, "max_components must be >= 1");
    if (!leave_one_out && folds < 2) fail(errc::invalid_configuration, "need at least 2 folds");
    for (int k : neighbor_values) {
      if (k < 1) fail(errc::invalid_k, "neighbor counts must be positive");
    }
  }
};

struct GridPoint {
  int truncation = 0;   // 0 when the method has no truncation
  int k_neighbors = 0;  // 0 when the method has no neighbor count
  double cv_accuracy = 0.0;
};

struct CvResult {
  int truncation = 0;
  int k_neighbors = 0;
  double cv_accuracy = 0.0;
  // truncations were evaluated on 1..max_truncation_used; smaller than the
  // requested maximum when a fold's retained rank clamps the grid
  int max_truncation_used = 0;
  std::vector<GridPoint> table;
};

namespace detail {

// Stratified fold assignment: indices of each class are shuffled and dealt
// round-robin, so every fold holds within +/-1 of the class proportion.
inline std::vector<std::vector<int>> stratified_folds(const std::vector<int>& labels,
                                                      int num_classes, int folds,
                                                      std::uint64_t seed) {
  std::vector<std::vector<int>> assignment(static_cast<std::size_t>(folds));
  for (int g = 1; g <= num_classes; ++g) {
    std::vector<int> members;
    for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
      if (labels[static_cast<std::size_t>(i)] == g) members.push_back(i);
    }
    Rng rng(Rng::derive(seed, 0xf01dULL, static_cast<std::uint64_t>(g)));
    rng.shuffle(members);
    for (std::size_t j = 0; j < members.size(); ++j) {
      assignment[j % static_cast<std::size_t>(folds)].push_back(members[j]);
    }
  }
  for (auto& fold : assignment) std::sort(fold.begin(), fold.end());
  return assignment;
}

// Classifies held-out curves for every (truncation, neighbors) grid point of
// one fold without refitting anything per point. Models are fitted once at
// the largest usable truncation; each prediction reproduces the arithmetic
// of TrainedClassifier exactly (same projections, same tie rules).
class FoldEvaluator {
 public:
  FoldEvaluator(const LabeledSample& fold_train, const MethodSpec& spec, int requested_max)
      : spec_(spec), num_classes_(fold_train.num_classes()), labels_(fold_train.labels()) {
    const int n = fold_train.size();
    for (int g = 1; g <= num_classes_; ++g) {
      std::vector<FunctionalDatum> in_class;
      for (int i = 0; i < n; ++i) {
        if (fold_train.label(i) == g) in_class.push_back(fold_train.datum(i));
      }
      class_means_.push_back(sample_mean(in_class));
      priors_.push_back(static_cast<double>(fold_train.class_count(g)) / n);
    }

    const Method method = spec.method;
    if (method == Method::lbcr_coef || method == Method::qbcr_coef) {
      plain_ = TrainedClassifier::train(fold_train, spec);
      return;
    }
    if (method == Method::centroid && kind_is_lp(spec.kind)) {
      plain_ = TrainedClassifier::train(fold_train, spec);
      return;
    }

    const bool needs_truncation = spec.tunes_truncation();
    if (needs_truncation) {
      if (method == Method::fqbcr || kind_uses_class_models(spec.kind)) {
        models_ = fit_fpca_per_class(fold_train);
      } else {
        if (spec.kind == DistanceKind::dh && num_classes_ != 2) {
          fail(errc::two_class_only, "the DH distance needs exactly two classes");
        }
        models_.push_back(fit_fpca(fold_train, CovarianceMode::pooled_within_class));
      }
      k_max_ = requested_max;
      for (const FpcaModel& model : models_) k_max_ = std::min(k_max_, model.retained_count());
      if (k_max_ < 1) {
        fail(errc::k_out_of_range, "no usable truncation: a fitted model retained no components");
      }
    }

    if (method == Method::knn) {
      const int m = fold_train.basis().size();
      Matrix coeffs(n, m);
      for (int i = 0; i < n; ++i) coeffs.row(i) = fold_train.datum(i).coeffs().transpose();
      const BasisSystem& basis = fold_train.basis();
      if (spec.kind == DistanceKind::l2) {
        gram_coeffs_ = basis.gram() * coeffs.transpose();
        sq_norms_.resize(n);
        for (int i = 0; i < n; ++i) sq_norms_[i] = coeffs.row(i).dot(gram_coeffs_.col(i));
        gram_ = basis.gram();
      } else if (spec.kind == DistanceKind::l1 || spec.kind == DistanceKind::linf) {
        std::vector<double> grid(lp_grid_points);
        const double a = basis.domain_begin();
        const double h = (basis.domain_end() - a) / (lp_grid_points - 1);
        for (int j = 0; j < lp_grid_points; ++j) grid[static_cast<std::size_t>(j)] = a + h * j;
        grid_design_ = basis.design_matrix(grid);
        grid_values_ = coeffs * grid_design_.transpose();
        step_ = h;
      } else {
        projected_ = Matrix(n, k_max_);
        for (int i = 0; i < n; ++i) {
          projected_.row(i) = project(coeffs.row(i).transpose(), fold_train.label(i)).transpose();
        }
      }
      coeffs_ = std::move(coeffs);
    } else if (method == Method::centroid && !kind_is_lp(spec.kind)) {
      if (spec.kind == DistanceKind::dh) {
        const FpcaModel& model = models_.front();
        const Vector mean_diff = class_means_[1].coeffs() - class_means_[0].coeffs();
        dh_delta_ = model.score_projection().leftCols(k_max_).transpose() * mean_diff;
        for (int k = 0; k < k_max_; ++k) dh_delta_[k] /= std::sqrt(model.eigenvalue(k));
      }
    }
  }

  // Largest truncation all fitted models support (0 for untuned methods).
  int usable_truncation() const { return k_max_; }

  // Predictions for one held-out curve at each grid point.
  std::vector<int> predict(const FunctionalDatum& f0,
                           std::span<const std::pair<int, int>> points) const {
    std::vector<int> out(points.size());
    if (plain_) {
      const int label = plain_->classify(f0);
      std::fill(out.begin(), out.end(), label);
      return out;
    }
    switch (spec_.method) {
      case Method::knn: predict_knn(f0, points, out); break;
      case Method::centroid: predict_centroid(f0, points, out); break;
      case Method::flbcr:
      case Method::fqbcr: predict_bayes(f0, points, out); break;
      default: fail(errc::invalid_configuration, "unexpected method in fold evaluation");
    }
    return out;
  }

 private:
  const FpcaModel& model_for_class(int cls) const {
    return models_.size() == 1 ? models_.front() : models_[static_cast<std::size_t>(cls - 1)];
  }

  // Projection at the fold's maximum truncation; standardized for FM and DH.
  Vector project(const Vector& coeffs, int cls) const {
    const FpcaModel& model = model_for_class(cls);
    Vector s = model.score_projection().leftCols(k_max_).transpose() * coeffs;
    if (kind_is_standardized(spec_.kind)) {
      for (int k = 0; k < k_max_; ++k) s[k] /= std::sqrt(model.eigenvalue(k));
    }
    return s;
  }

  void predict_knn(const FunctionalDatum& f0, std::span<const std::pair<int, int>> points,
                   std::vector<int>& out) const {
    const int n = static_cast<int>(labels_.size());
    const bool lp = kind_is_lp(spec_.kind);

    std::vector<Vector> query_proj;
    Vector diffs_fixed;
    if (lp) {
      diffs_fixed.resize(n);
      if (spec_.kind == DistanceKind::l2) {
        const Vector wb0 = gram_ * f0.coeffs();
        const double q0 = f0.coeffs().dot(wb0);
        for (int i = 0; i < n; ++i) {
          diffs_fixed[i] =
              std::sqrt(std::max(0.0, q0 + sq_norms_[i] - 2.0 * coeffs_.row(i).dot(wb0)));
        }
      } else {
        const Vector v0 = grid_design_ * f0.coeffs();
        for (int i = 0; i < n; ++i) {
          double sum = 0.0, sup = 0.0;
          for (int j = 0; j < lp_grid_points; ++j) {
            const double v = std::abs(v0[j] - grid_values_(i, j));
            sup = std::max(sup, v);
            sum += (j == 0 || j == lp_grid_points - 1) ? 0.5 * v : v;
          }
          diffs_fixed[i] = spec_.kind == DistanceKind::l1 ? sum * step_ : sup;
        }
      }
    } else {
      for (int g = 1; g <= num_classes_; ++g) query_proj.push_back(project(f0.coeffs(), g));
    }

    // candidate lists per distinct truncation, shared across neighbor counts
    std::vector<std::vector<std::pair<double, int>>> ordered_by_K;
    auto ordered_for = [&](int K) -> const std::vector<std::pair<double, int>>& {
      if (ordered_by_K.size() < static_cast<std::size_t>(K + 1)) {
        ordered_by_K.resize(static_cast<std::size_t>(K + 1));
      }
      auto& slot = ordered_by_K[static_cast<std::size_t>(K)];
      if (!slot.empty()) return slot;
      std::vector<std::tuple<double, int, int>> order(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        const int g = labels_[static_cast<std::size_t>(i)];
        const double d =
            lp ? diffs_fixed[i]
               : (query_proj[static_cast<std::size_t>(g - 1)].head(K) -
                  projected_.row(i).head(K).transpose())
                     .norm();
        order[static_cast<std::size_t>(i)] = {d, g, i};
      }
      std::sort(order.begin(), order.end());
      slot.resize(order.size());
      for (std::size_t i = 0; i < order.size(); ++i) {
        slot[i] = {std::get<0>(order[i]), std::get<1>(order[i])};
      }
      return slot;
    };

    for (std::size_t p = 0; p < points.size(); ++p) {
      const auto& list = ordered_for(lp ? 0 : points[p].first);
      out[p] = knn_vote(list, points[p].second, num_classes_);
    }
  }

  void predict_centroid(const FunctionalDatum& f0, std::span<const std::pair<int, int>> points,
                        std::vector<int>& out) const {
    if (spec_.kind == DistanceKind::dh) {
      // running products omega_k * delta_k accumulate over k
      Matrix partial(num_classes_, k_max_);
      for (int g = 1; g <= num_classes_; ++g) {
        const FpcaModel& model = models_.front();
        const Vector omega = model.standardized_scores(f0, g, k_max_);
        double sum = 0.0;
        for (int k = 0; k < k_max_; ++k) {
          sum += omega[k] * dh_delta_[k];
          partial(g - 1, k) = std::abs(sum);
        }
      }
      for (std::size_t p = 0; p < points.size(); ++p) {
        const int K = points[p].first;
        std::vector<double> dist(static_cast<std::size_t>(num_classes_));
        for (int g = 0; g < num_classes_; ++g) dist[static_cast<std::size_t>(g)] = partial(g, K - 1);
        out[p] = 1 + argmin_lowest(dist);
      }
      return;
    }

    // score differences to each class mean at the maximum truncation
    std::vector<Vector> diff(static_cast<std::size_t>(num_classes_));
    for (int g = 1; g <= num_classes_; ++g) {
      const FpcaModel& model = model_for_class(g);
      diff[static_cast<std::size_t>(g - 1)] =
          model.score_projection().leftCols(k_max_).transpose() *
          (f0.coeffs() - class_means_[static_cast<std::size_t>(g - 1)].coeffs());
    }
    for (std::size_t p = 0; p < points.size(); ++p) {
      const int K = points[p].first;
      std::vector<double> dist(static_cast<std::size_t>(num_classes_));
      for (int g = 1; g <= num_classes_; ++g) {
        const FpcaModel& model = model_for_class(g);
        const Vector& delta = diff[static_cast<std::size_t>(g - 1)];
        double sum = 0.0;
        for (int k = 0; k < K; ++k) {
          const double term = delta[k] * delta[k];
          sum += kind_is_standardized(spec_.kind) ? term / model.eigenvalue(k) : term;
        }
        dist[static_cast<std::size_t>(g - 1)] = std::sqrt(sum);
      }
      out[p] = 1 + argmin_lowest(dist);
    }
  }

  void predict_bayes(const FunctionalDatum& f0, std::span<const std::pair<int, int>> points,
                     std::vector<int>& out) const {
    const bool quadratic = spec_.method == Method::fqbcr;
    Matrix omegas(num_classes_, k_max_);
    for (int g = 1; g <= num_classes_; ++g) {
      const FpcaModel& model = quadratic ? model_for_class(g) : models_.front();
      omegas.row(g - 1) = model.standardized_scores(f0, g, k_max_).transpose();
    }
    for (std::size_t p = 0; p < points.size(); ++p) {
      const int K = points[p].first;
      std::vector<double> crit(static_cast<std::size_t>(num_classes_));
      for (int g = 1; g <= num_classes_; ++g) {
        const double d = omegas.row(g - 1).head(K).norm();
        double value = d * d - 2.0 * std::log(priors_[static_cast<std::size_t>(g - 1)]);
        if (quadratic) {
          const FpcaModel& model = model_for_class(g);
          for (int k = 0; k < K; ++k) value += std::log(model.eigenvalue(k));
        }
        crit[static_cast<std::size_t>(g - 1)] = value;
      }
      out[p] = 1 + argmin_lowest(crit);
    }
  }

  MethodSpec spec_;
  int num_classes_ = 0;
  int k_max_ = 0;
  std::vector<int> labels_;
  std::vector<FunctionalDatum> class_means_;
  std::vector<double> priors_;
  std::vector<FpcaModel> models_;
  std::optional<TrainedClassifier> plain_;

  Matrix coeffs_, gram_coeffs_, grid_design_, grid_values_, projected_, gram_;
  Vector sq_norms_, dh_delta_;
  double step_ = 0.0;
};

}  // namespace detail

// Stratified k-fold cross-validation over the method's hyperparameter grid:
// truncations 1..max_components (clamped per fold to the retained ranks of
// the refitted models) crossed with the neighbor counts for kNN. Models are
// refit inside every fold, so held-out curves never touch the means or
// covariances they are scored against. The grid point with the highest mean
// fold accuracy wins; ties prefer the smallest truncation, then the smallest
// neighbor count.
inline CvResult cross_validate(const LabeledSample& train, const MethodSpec& spec,
                               const TuningGrid& grid, std::uint64_t seed) {
  grid.validate();
  const int n = train.size();
  const int folds = grid.leave_one_out ? n : std::min(grid.folds, n);
  if (folds < 2) fail(errc::invalid_configuration, "cross-validation needs at least 2 folds");

  const auto assignment = detail::stratified_folds(train.labels(), train.num_classes(), folds, seed);

  struct Fold {
    std::vector<int> heldout;
    detail::FoldEvaluator evaluator;
  };
  std::vector<Fold> prepared;
  int min_fold_train = n;
  for (const auto& heldout : assignment) {
    if (heldout.empty()) continue;
    std::vector<int> keep;
    keep.reserve(static_cast<std::size_t>(n) - heldout.size());
    std::size_t cursor = 0;
    for (int i = 0; i < n; ++i) {
      if (cursor < heldout.size() && heldout[cursor] == i) {
        ++cursor;
        continue;
      }
      keep.push_back(i);
    }
    std::vector<int> train_counts(static_cast<std::size_t>(train.num_classes()), 0);
    for (int i : keep) ++train_counts[static_cast<std::size_t>(train.label(i) - 1)];
    for (int g = 1; g <= train.num_classes(); ++g) {
      if (train_counts[static_cast<std::size_t>(g - 1)] == 0) {
        fail(errc::fold_degenerate,
             "class " + std::to_string(g) + " has no curves in a fold's training portion");
      }
    }
    detail::FoldEvaluator evaluator(train.subset(keep), spec, grid.max_components);
    min_fold_train = std::min(min_fold_train, static_cast<int>(keep.size()));
    prepared.push_back({heldout, std::move(evaluator)});
  }

  // grid axes, clamped to what every fold supports
  std::vector<int> k_values{0};
  if (spec.tunes_neighbors()) {
    k_values.clear();
    for (int k : grid.neighbor_values) {
      if (k <= min_fold_train) k_values.push_back(k);
    }
    if (k_values.empty()) fail(errc::invalid_k, "every neighbor count exceeds the fold size");
  }
  int max_truncation = 0;
  std::vector<int> truncations{0};
  if (spec.tunes_truncation()) {
    max_truncation = grid.max_components;
    for (const Fold& fold : prepared) {
      max_truncation = std::min(max_truncation, fold.evaluator.usable_truncation());
    }
    truncations.clear();
    for (int K = 1; K <= max_truncation; ++K) truncations.push_back(K);
  }

  std::vector<std::pair<int, int>> points;
  for (int K : truncations) {
    for (int k : k_values) points.emplace_back(K, k);
  }

  std::vector<double> accuracy(points.size(), 0.0);
  for (const Fold& fold : prepared) {
    std::vector<int> correct(points.size(), 0);
    for (int index : fold.heldout) {
      const auto predictions = fold.evaluator.predict(train.datum(index), points);
      for (std::size_t p = 0; p < points.size(); ++p) {
        if (predictions[p] == train.label(index)) ++correct[p];
      }
    }
    for (std::size_t p = 0; p < points.size(); ++p) {
      accuracy[p] += static_cast<double>(correct[p]) / static_cast<double>(fold.heldout.size());
    }
  }
  for (double& a : accuracy) a /= static_cast<double>(prepared.size());

  CvResult result;
  result.max_truncation_used = max_truncation;
  result.table.reserve(points.size());
  std::size_t best = 0;
  for (std::size_t p = 0; p < points.size(); ++p) {
    result.table.push_back({points[p].first, points[p].second, accuracy[p]});
    if (accuracy[p] > accuracy[best]) best = p;
  }
  result.truncation = points[best].first;
  result.k_neighbors = points[best].second;
  result.cv_accuracy = accuracy[best];
  return result;
}

}  // namespace fdaclass
