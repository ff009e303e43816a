#pragma once

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "fdaclass/distances.hpp"
#include "fdaclass/errors.hpp"
#include "fdaclass/fpca.hpp"

namespace fdaclass {

enum class Method { knn, centroid, flbcr, fqbcr, lbcr_coef, qbcr_coef };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::knn: return "knn";
    case Method::centroid: return "centroid";
    case Method::flbcr: return "flbcr";
    case Method::fqbcr: return "fqbcr";
    case Method::lbcr_coef: return "lbcr_coef";
    case Method::qbcr_coef: return "qbcr_coef";
  }
  return "?";
}

inline bool method_uses_kind(Method m) { return m == Method::knn || m == Method::centroid; }

// A classification procedure plus, for kNN and centroid, the distance kind
// it runs on. Spelled "knn:fm_c", "centroid:dh", "flbcr", ... in configs.
struct MethodSpec {
  Method method = Method::knn;
  DistanceKind kind = DistanceKind::l2;

  std::string name() const {
    std::string out = method_name(method);
    if (method_uses_kind(method)) out += std::string(":") + kind_name(kind);
    return out;
  }

  // Which hyperparameters cross-validation has to choose.
  bool tunes_truncation() const {
    if (method == Method::flbcr || method == Method::fqbcr) return true;
    return method_uses_kind(method) && !kind_is_lp(kind);
  }
  bool tunes_neighbors() const { return method == Method::knn; }
};

inline std::optional<MethodSpec> parse_method_spec(const std::string& text) {
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  for (Method m : {Method::knn, Method::centroid, Method::flbcr, Method::fqbcr, Method::lbcr_coef,
                   Method::qbcr_coef}) {
    if (head != method_name(m)) continue;
    MethodSpec spec;
    spec.method = m;
    if (method_uses_kind(m)) {
      if (colon == std::string::npos) return std::nullopt;
      const auto kind = parse_kind(text.substr(colon + 1));
      if (!kind) return std::nullopt;
      spec.kind = *kind;
    } else if (colon != std::string::npos) {
      return std::nullopt;
    }
    return spec;
  }
  return std::nullopt;
}

namespace detail {

// Majority vote over the k nearest candidates, which must be sorted by
// (distance, class, original index). A tied vote drops the farthest
// candidate and revotes, so k = 1 (whose distance ties are already resolved
// toward the lowest class by the sort order) is always decisive.
inline int knn_vote(std::span<const std::pair<double, int>> ordered, int k, int num_classes) {
  std::vector<int> counts(static_cast<std::size_t>(num_classes) + 1, 0);
  for (int i = 0; i < k; ++i) ++counts[static_cast<std::size_t>(ordered[static_cast<std::size_t>(i)].second)];
  for (int kk = k; kk >= 1; --kk) {
    int best = 0, best_count = 0;
    bool tied = false;
    for (int g = 1; g <= num_classes; ++g) {
      const int c = counts[static_cast<std::size_t>(g)];
      if (c > best_count) {
        best = g;
        best_count = c;
        tied = false;
      } else if (c == best_count && c > 0) {
        tied = true;
      }
    }
    if (!tied || kk == 1) return best;
    --counts[static_cast<std::size_t>(ordered[static_cast<std::size_t>(kk - 1)].second)];
  }
  return ordered.front().second;
}

// First index attaining the minimum; class ties resolve to the lowest index.
inline int argmin_lowest(std::span<const double> values) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i) {
    if (values[static_cast<std::size_t>(i)] < values[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}

inline void check_priors(const Vector& priors, int num_classes) {
  if (priors.size() != num_classes) {
    fail(errc::invalid_priors, "need one prior per class");
  }
  double sum = 0.0;
  for (int g = 0; g < priors.size(); ++g) {
    if (!(priors[g] > 0.0)) fail(errc::invalid_priors, "priors must be positive");
    sum += priors[g];
  }
  if (std::abs(sum - 1.0) > 1e-12) fail(errc::invalid_priors, "priors must sum to one");
}

}  // namespace detail

// A classification rule fitted to one labeled sample. Immutable after
// training; classify() is pure, so test batches can be labeled from several
// threads at once.
class TrainedClassifier {
 public:
  // `truncation` is the number of leading components for the FM/FPC/DH kinds
  // and the Bayes rules; `k_neighbors` is only read by kNN. Priors default
  // to the training class proportions.
  static TrainedClassifier train(const LabeledSample& sample, const MethodSpec& spec,
                                 int truncation = 0, int k_neighbors = 0,
                                 std::optional<Vector> priors = std::nullopt) {
    TrainedClassifier c;
    c.spec_ = spec;
    c.truncation_ = truncation;
    c.num_classes_ = sample.num_classes();
    c.basis_ = sample.basis();
    c.labels_ = sample.labels();

    const int n = sample.size();
    if (priors) {
      detail::check_priors(*priors, c.num_classes_);
      c.priors_ = std::move(*priors);
    } else {
      c.priors_.resize(c.num_classes_);
      for (int g = 1; g <= c.num_classes_; ++g) {
        c.priors_[g - 1] = static_cast<double>(sample.class_count(g)) / n;
      }
    }

    for (int g = 1; g <= c.num_classes_; ++g) {
      std::vector<FunctionalDatum> in_class;
      for (int i = 0; i < n; ++i) {
        if (sample.label(i) == g) in_class.push_back(sample.datum(i));
      }
      c.class_means_.push_back(sample_mean(in_class));
    }

    switch (spec.method) {
      case Method::knn:
        if (k_neighbors < 1 || k_neighbors > n) {
          fail(errc::invalid_k, "k = " + std::to_string(k_neighbors) +
                                    " must be in [1, " + std::to_string(n) + "]");
        }
        c.k_neighbors_ = k_neighbors;
        c.setup_distance(sample);
        c.setup_knn(sample);
        break;
      case Method::centroid:
        c.setup_distance(sample);
        break;
      case Method::flbcr:
        c.models_.push_back(fit_fpca(sample, CovarianceMode::pooled_within_class));
        c.models_.front().check_truncation(truncation);
        if (truncation < 1) fail(errc::k_out_of_range, "truncation must be >= 1");
        break;
      case Method::fqbcr: {
        c.models_ = fit_fpca_per_class(sample);
        if (truncation < 1) fail(errc::k_out_of_range, "truncation must be >= 1");
        for (const FpcaModel& model : c.models_) model.check_truncation(truncation);
        break;
      }
      case Method::lbcr_coef:
      case Method::qbcr_coef:
        c.setup_coef_bayes(sample);
        break;
    }
    return c;
  }

  Method method() const { return spec_.method; }
  const MethodSpec& spec() const { return spec_; }
  int truncation() const { return truncation_; }
  int k_neighbors() const { return k_neighbors_; }
  int num_classes() const { return num_classes_; }
  const Vector& priors() const { return priors_; }
  const FunctionalDatum& class_mean(int g) const {
    return class_means_[static_cast<std::size_t>(g - 1)];
  }

  int classify(const FunctionalDatum& f0) const {
    if (f0.basis_id() != basis_.id()) {
      fail(errc::basis_mismatch, "query curve uses a different basis than the training sample");
    }
    switch (spec_.method) {
      case Method::knn: return classify_knn(f0);
      case Method::centroid: return classify_centroid(f0);
      case Method::flbcr: return classify_flbcr(f0);
      case Method::fqbcr: return classify_fqbcr(f0);
      case Method::lbcr_coef:
      case Method::qbcr_coef: return classify_coef_bayes(f0);
    }
    fail(errc::invalid_configuration, "unreachable");
  }

  std::vector<int> classify(std::span<const FunctionalDatum> batch) const {
    std::vector<int> out;
    out.reserve(batch.size());
    for (const FunctionalDatum& f : batch) out.push_back(classify(f));
    return out;
  }

 private:
  TrainedClassifier() = default;

  void setup_distance(const LabeledSample& sample) {
    const DistanceKind kind = spec_.kind;
    if (kind_is_lp(kind)) {
      distance_ = DistanceSpec::lp(kind);
    } else if (kind_uses_class_models(kind)) {
      distance_ = DistanceSpec::with_class_models(kind, fit_fpca_per_class(sample), truncation_);
    } else {
      if (kind == DistanceKind::dh && num_classes_ != 2) {
        fail(errc::two_class_only, "the DH distance needs exactly two classes");
      }
      distance_ = DistanceSpec::with_common_model(
          kind, fit_fpca(sample, CovarianceMode::pooled_within_class), truncation_);
    }
  }

  // Per-curve caches that make a kNN query one pass over the training set.
  void setup_knn(const LabeledSample& sample) {
    const int n = sample.size();
    const int m = basis_.size();
    const DistanceKind kind = spec_.kind;

    Matrix coeffs(n, m);
    for (int i = 0; i < n; ++i) coeffs.row(i) = sample.datum(i).coeffs().transpose();

    if (kind == DistanceKind::l2) {
      knn_gram_coeffs_ = basis_.gram() * coeffs.transpose();  // m x n
      knn_sq_norms_.resize(n);
      for (int i = 0; i < n; ++i) knn_sq_norms_[i] = coeffs.row(i).dot(knn_gram_coeffs_.col(i));
    } else if (kind == DistanceKind::l1 || kind == DistanceKind::linf) {
      std::vector<double> grid(lp_grid_points);
      const double a = basis_.domain_begin();
      const double h = (basis_.domain_end() - a) / (lp_grid_points - 1);
      for (int j = 0; j < lp_grid_points; ++j) grid[static_cast<std::size_t>(j)] = a + h * j;
      knn_grid_design_ = basis_.design_matrix(grid);       // points x m
      knn_grid_values_ = coeffs * knn_grid_design_.transpose();  // n x points
    } else {
      // standardized (FM) or raw (FPC) projections of each training curve
      // under its own class's model; centering cancels in differences
      knn_projected_ = Matrix(n, truncation_);
      for (int i = 0; i < n; ++i) {
        knn_projected_.row(i) = project(sample.datum(i).coeffs(), sample.label(i)).transpose();
      }
    }
    knn_coeffs_ = std::move(coeffs);
  }

  Vector project(const Vector& coeffs, int cls) const {
    const FpcaModel& model = distance_->model_for_class(cls);
    Vector s = model.score_projection().leftCols(truncation_).transpose() * coeffs;
    if (kind_is_standardized(spec_.kind)) {
      for (int k = 0; k < truncation_; ++k) s[k] /= std::sqrt(model.eigenvalue(k));
    }
    return s;
  }

  int classify_knn(const FunctionalDatum& f0) const {
    const int n = static_cast<int>(labels_.size());
    std::vector<std::tuple<double, int, int>> order(static_cast<std::size_t>(n));
    const DistanceKind kind = spec_.kind;

    if (kind == DistanceKind::l2) {
      const Vector wb0 = basis_.gram() * f0.coeffs();
      const double q0 = f0.coeffs().dot(wb0);
      for (int i = 0; i < n; ++i) {
        const double sq = std::max(0.0, q0 + knn_sq_norms_[i] - 2.0 * knn_coeffs_.row(i).dot(wb0));
        order[static_cast<std::size_t>(i)] = {std::sqrt(sq), labels_[static_cast<std::size_t>(i)], i};
      }
    } else if (kind == DistanceKind::l1 || kind == DistanceKind::linf) {
      const Vector v0 = knn_grid_design_ * f0.coeffs();
      const double h = (basis_.domain_end() - basis_.domain_begin()) / (lp_grid_points - 1);
      for (int i = 0; i < n; ++i) {
        double sum = 0.0, sup = 0.0;
        for (int j = 0; j < lp_grid_points; ++j) {
          const double v = std::abs(v0[j] - knn_grid_values_(i, j));
          sup = std::max(sup, v);
          sum += (j == 0 || j == lp_grid_points - 1) ? 0.5 * v : v;
        }
        const double d = kind == DistanceKind::l1 ? sum * h : sup;
        order[static_cast<std::size_t>(i)] = {d, labels_[static_cast<std::size_t>(i)], i};
      }
    } else {
      // one projection of the query per class model (a single one for the
      // common-covariance kinds)
      std::vector<Vector> q;
      for (int g = 1; g <= num_classes_; ++g) q.push_back(project(f0.coeffs(), g));
      for (int i = 0; i < n; ++i) {
        const int g = labels_[static_cast<std::size_t>(i)];
        const double d = (q[static_cast<std::size_t>(g - 1)] - knn_projected_.row(i).transpose()).norm();
        order[static_cast<std::size_t>(i)] = {d, g, i};
      }
    }

    std::sort(order.begin(), order.end());
    std::vector<std::pair<double, int>> ordered(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      ordered[i] = {std::get<0>(order[i]), std::get<1>(order[i])};
    }
    return detail::knn_vote(ordered, k_neighbors_, num_classes_);
  }

  int classify_centroid(const FunctionalDatum& f0) const {
    std::vector<double> dist(static_cast<std::size_t>(num_classes_));
    for (int g = 1; g <= num_classes_; ++g) {
      dist[static_cast<std::size_t>(g - 1)] =
          spec_.kind == DistanceKind::dh
              ? d_dh(*distance_, f0, g)
              : curve_distance(*distance_, f0, class_mean(g), g);
    }
    return 1 + detail::argmin_lowest(dist);
  }

  int classify_flbcr(const FunctionalDatum& f0) const {
    const FpcaModel& model = models_.front();
    std::vector<double> crit(static_cast<std::size_t>(num_classes_));
    for (int g = 1; g <= num_classes_; ++g) {
      const double d = model.standardized_scores(f0, g, truncation_).norm();
      crit[static_cast<std::size_t>(g - 1)] = d * d - 2.0 * std::log(priors_[g - 1]);
    }
    return 1 + detail::argmin_lowest(crit);
  }

  int classify_fqbcr(const FunctionalDatum& f0) const {
    std::vector<double> crit(static_cast<std::size_t>(num_classes_));
    for (int g = 1; g <= num_classes_; ++g) {
      const FpcaModel& model = models_[static_cast<std::size_t>(g - 1)];
      const double d = model.standardized_scores(f0, g, truncation_).norm();
      double log_det = 0.0;
      for (int k = 0; k < truncation_; ++k) log_det += std::log(model.eigenvalue(k));
      crit[static_cast<std::size_t>(g - 1)] = d * d + log_det - 2.0 * std::log(priors_[g - 1]);
    }
    return 1 + detail::argmin_lowest(crit);
  }

  // Gaussian discriminants on the raw basis coefficients: pooled covariance
  // for the linear rule, per-class (ridge-stabilized) for the quadratic one.
  void setup_coef_bayes(const LabeledSample& sample) {
    const int n = sample.size();
    const int m = basis_.size();
    const bool quadratic = spec_.method == Method::qbcr_coef;

    std::vector<Matrix> covs;
    if (quadratic) {
      for (int g = 1; g <= num_classes_; ++g) {
        const int ng = sample.class_count(g);
        Matrix centered(ng, m);
        int row = 0;
        for (int i = 0; i < n; ++i) {
          if (sample.label(i) != g) continue;
          centered.row(row++) = (sample.datum(i).coeffs() - class_mean(g).coeffs()).transpose();
        }
        Matrix cov = centered.transpose() * centered / static_cast<double>(ng);
        cov.diagonal().array() += 1e-8 * cov.trace() / m;
        covs.push_back(std::move(cov));
      }
    } else {
      Matrix centered(n, m);
      for (int i = 0; i < n; ++i) {
        centered.row(i) =
            (sample.datum(i).coeffs() - class_mean(sample.label(i)).coeffs()).transpose();
      }
      covs.push_back(centered.transpose() * centered / static_cast<double>(n));
    }

    for (Matrix& cov : covs) {
      Eigen::LLT<Matrix> llt(cov);
      if (llt.info() != Eigen::Success) {
        fail(errc::degenerate_covariance, "coefficient covariance is not positive definite");
      }
      double log_det = 0.0;
      for (int i = 0; i < m; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
      bayes_llt_.push_back(std::move(llt));
      bayes_log_det_.push_back(log_det);
    }
  }

  int classify_coef_bayes(const FunctionalDatum& f0) const {
    const bool quadratic = spec_.method == Method::qbcr_coef;
    std::vector<double> crit(static_cast<std::size_t>(num_classes_));
    for (int g = 1; g <= num_classes_; ++g) {
      const std::size_t slot = quadratic ? static_cast<std::size_t>(g - 1) : 0;
      const Vector diff = f0.coeffs() - class_mean(g).coeffs();
      const double maha_sq = diff.dot(bayes_llt_[slot].solve(diff));
      double value = maha_sq - 2.0 * std::log(priors_[g - 1]);
      if (quadratic) value += bayes_log_det_[slot];
      crit[static_cast<std::size_t>(g - 1)] = value;
    }
    return 1 + detail::argmin_lowest(crit);
  }

  MethodSpec spec_;
  int truncation_ = 0;
  int k_neighbors_ = 0;
  int num_classes_ = 0;
  BasisSystem basis_ = BasisSystem::bspline(0.0, 1.0, 1, 1);
  std::vector<int> labels_;
  Vector priors_;
  std::vector<FunctionalDatum> class_means_;

  std::optional<DistanceSpec> distance_;  // knn and centroid
  std::vector<FpcaModel> models_;         // flbcr (one) and fqbcr (per class)

  Matrix knn_coeffs_;       // n x m
  Matrix knn_gram_coeffs_;  // m x n, l2 only
  Vector knn_sq_norms_;     // l2 only
  Matrix knn_grid_design_;  // grid x m, l1/linf only
  Matrix knn_grid_values_;  // n x grid, l1/linf only
  Matrix knn_projected_;    // n x K, fm/fpc kinds only

  std::vector<Eigen::LLT<Matrix>> bayes_llt_;
  std::vector<double> bayes_log_det_;
};

}  // namespace fdaclass
