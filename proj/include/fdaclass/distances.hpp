#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fdaclass/basis.hpp"
#include "fdaclass/errors.hpp"
#include "fdaclass/fpca.hpp"

namespace fdaclass {

// The eight proximity measures used by the classifiers. The L kinds need no
// fitted model; the _C kinds and DH share one covariance model across
// classes; the _D kinds carry one model per class.
enum class DistanceKind { l1, l2, linf, fpc_c, fpc_d, fm_c, fm_d, dh };

inline const char* kind_name(DistanceKind kind) {
  switch (kind) {
    case DistanceKind::l1: return "l1";
    case DistanceKind::l2: return "l2";
    case DistanceKind::linf: return "linf";
    case DistanceKind::fpc_c: return "fpc_c";
    case DistanceKind::fpc_d: return "fpc_d";
    case DistanceKind::fm_c: return "fm_c";
    case DistanceKind::fm_d: return "fm_d";
    case DistanceKind::dh: return "dh";
  }
  return "?";
}

inline std::optional<DistanceKind> parse_kind(const std::string& name) {
  for (DistanceKind kind :
       {DistanceKind::l1, DistanceKind::l2, DistanceKind::linf, DistanceKind::fpc_c,
        DistanceKind::fpc_d, DistanceKind::fm_c, DistanceKind::fm_d, DistanceKind::dh}) {
    if (name == kind_name(kind)) return kind;
  }
  return std::nullopt;
}

inline bool kind_is_lp(DistanceKind kind) {
  return kind == DistanceKind::l1 || kind == DistanceKind::l2 || kind == DistanceKind::linf;
}
inline bool kind_uses_common_model(DistanceKind kind) {
  return kind == DistanceKind::fpc_c || kind == DistanceKind::fm_c || kind == DistanceKind::dh;
}
inline bool kind_uses_class_models(DistanceKind kind) {
  return kind == DistanceKind::fpc_d || kind == DistanceKind::fm_d;
}
inline bool kind_is_standardized(DistanceKind kind) {
  return kind == DistanceKind::fm_c || kind == DistanceKind::fm_d || kind == DistanceKind::dh;
}

// Number of quadrature / sup points for the L1 and Linf kinds.
inline constexpr int lp_grid_points = 2001;

class DistanceSpec {
 public:
  static DistanceSpec lp(DistanceKind kind) {
    if (!kind_is_lp(kind)) fail(errc::invalid_configuration, "not an L-kind distance");
    return DistanceSpec(kind, 0, {}, {});
  }

  static DistanceSpec with_common_model(DistanceKind kind, FpcaModel model, int truncation) {
    if (!kind_uses_common_model(kind)) {
      fail(errc::invalid_configuration, std::string(kind_name(kind)) + " does not take a common model");
    }
    if (model.mode() == CovarianceMode::per_class) {
      fail(errc::invalid_configuration, "common-covariance kinds need a pooled or global model");
    }
    std::vector<FpcaModel> models{std::move(model)};
    return DistanceSpec(kind, truncation, std::move(models), {});
  }

  static DistanceSpec with_class_models(DistanceKind kind, std::vector<FpcaModel> models,
                                        int truncation) {
    if (!kind_uses_class_models(kind)) {
      fail(errc::invalid_configuration, std::string(kind_name(kind)) + " does not take per-class models");
    }
    if (models.empty()) fail(errc::invalid_configuration, "need one model per class");
    for (std::size_t g = 0; g < models.size(); ++g) {
      if (models[g].mode() != CovarianceMode::per_class ||
          models[g].class_index() != static_cast<int>(g) + 1) {
        fail(errc::invalid_configuration,
             "class models must be per-class fits ordered by class index");
      }
    }
    return DistanceSpec(kind, truncation, {}, std::move(models));
  }

  DistanceKind kind() const { return kind_; }
  int truncation() const { return truncation_; }

  const FpcaModel& common_model() const { return common_.front(); }

  // Model used when scoring against class `cls`.
  const FpcaModel& model_for_class(int cls) const {
    if (!common_.empty()) return common_.front();
    if (cls < 1 || cls > static_cast<int>(per_class_.size())) {
      fail(errc::invalid_configuration, "no covariance model for class " + std::to_string(cls));
    }
    return per_class_[static_cast<std::size_t>(cls - 1)];
  }

 private:
  DistanceSpec(DistanceKind kind, int truncation, std::vector<FpcaModel> common,
               std::vector<FpcaModel> per_class)
      : kind_(kind), truncation_(truncation), common_(std::move(common)),
        per_class_(std::move(per_class)) {
    if (!kind_is_lp(kind_)) {
      if (truncation_ < 1) {
        fail(errc::k_out_of_range, "truncation must be >= 1 for " + std::string(kind_name(kind_)));
      }
      for (const FpcaModel& model : common_) model.check_truncation(truncation_);
      for (const FpcaModel& model : per_class_) model.check_truncation(truncation_);
    }
  }

  DistanceKind kind_;
  int truncation_;
  std::vector<FpcaModel> common_;     // one entry for the _C kinds and DH
  std::vector<FpcaModel> per_class_;  // class-indexed for the _D kinds
};

// L1 by composite trapezoid and Linf as the grid maximum, both over 2001
// uniform points; L2 exactly through the Gram matrix.
inline double d_lp(const FunctionalDatum& f, const FunctionalDatum& g, DistanceKind kind) {
  FunctionalDatum::require_same_basis(f, g, "distance");
  if (kind == DistanceKind::l2) {
    const Vector diff = f.coeffs() - g.coeffs();
    return std::sqrt(std::max(0.0, diff.dot(f.basis().gram() * diff)));
  }
  if (kind != DistanceKind::l1 && kind != DistanceKind::linf) {
    fail(errc::invalid_configuration, "d_lp requires an L-kind");
  }
  const FunctionalDatum diff = f - g;
  const double a = f.basis().domain_begin();
  const double b = f.basis().domain_end();
  const double h = (b - a) / (lp_grid_points - 1);
  double sum = 0.0, sup = 0.0;
  for (int j = 0; j < lp_grid_points; ++j) {
    const double t = a + h * j;
    const double v = std::abs(evaluate(diff, t));
    sup = std::max(sup, v);
    sum += (j == 0 || j == lp_grid_points - 1) ? 0.5 * v : v;
  }
  return kind == DistanceKind::l1 ? sum * h : sup;
}

namespace detail {

// Score differences under the class-appropriate model. Centering at any mean
// cancels in the difference, so none is applied.
inline Vector score_diff(const DistanceSpec& spec, const FunctionalDatum& f,
                         const FunctionalDatum& g, int cls) {
  FunctionalDatum::require_same_basis(f, g, "distance");
  const FpcaModel& model = spec.model_for_class(cls);
  if (f.basis_id() != model.basis().id()) {
    fail(errc::basis_mismatch, "curves and covariance model use different bases");
  }
  model.check_truncation(spec.truncation());
  const Vector diff = f.coeffs() - g.coeffs();
  return model.score_projection().leftCols(spec.truncation()).transpose() * diff;
}

}  // namespace detail

// Euclidean distance between standardized score vectors, truncated at K.
inline double d_fm(const DistanceSpec& spec, const FunctionalDatum& f, const FunctionalDatum& g,
                   int cls = 1) {
  if (spec.kind() != DistanceKind::fm_c && spec.kind() != DistanceKind::fm_d) {
    fail(errc::invalid_configuration, "d_fm requires an FM kind");
  }
  Vector delta = detail::score_diff(spec, f, g, cls);
  const FpcaModel& model = spec.model_for_class(cls);
  double sum = 0.0;
  for (int k = 0; k < delta.size(); ++k) sum += delta[k] * delta[k] / model.eigenvalue(k);
  return std::sqrt(sum);
}

// Same with raw (unstandardized) scores.
inline double d_fpc(const DistanceSpec& spec, const FunctionalDatum& f, const FunctionalDatum& g,
                    int cls = 1) {
  if (spec.kind() != DistanceKind::fpc_c && spec.kind() != DistanceKind::fpc_d) {
    fail(errc::invalid_configuration, "d_fpc requires an FPC kind");
  }
  return detail::score_diff(spec, f, g, cls).norm();
}

// Projected centroid distance for two-class problems:
// |sum_k omega_k(f, class) * delta_k| where delta_k are the standardized
// scores of the class-mean difference under the shared model.
inline double d_dh(const DistanceSpec& spec, const FunctionalDatum& f, int cls) {
  if (spec.kind() != DistanceKind::dh) fail(errc::invalid_configuration, "d_dh requires kind dh");
  const FpcaModel& model = spec.common_model();
  if (model.num_means() != 2) {
    fail(errc::two_class_only, "the DH distance is defined for exactly two classes");
  }
  const int K = spec.truncation();
  const Vector omega = model.standardized_scores(f, cls, K);
  const Vector mean_diff = model.mean(2).coeffs() - model.mean(1).coeffs();
  Vector delta = model.score_projection().leftCols(K).transpose() * mean_diff;
  double sum = 0.0;
  for (int k = 0; k < K; ++k) sum += omega[k] * delta[k] / std::sqrt(model.eigenvalue(k));
  return std::abs(sum);
}

// Pairwise dispatcher for every kind that compares two curves (DH is a
// curve-to-class-mean construct and is excluded).
inline double curve_distance(const DistanceSpec& spec, const FunctionalDatum& f,
                             const FunctionalDatum& g, int cls = 1) {
  switch (spec.kind()) {
    case DistanceKind::l1:
    case DistanceKind::l2:
    case DistanceKind::linf:
      return d_lp(f, g, spec.kind());
    case DistanceKind::fpc_c:
    case DistanceKind::fpc_d:
      return d_fpc(spec, f, g, cls);
    case DistanceKind::fm_c:
    case DistanceKind::fm_d:
      return d_fm(spec, f, g, cls);
    case DistanceKind::dh:
      break;
  }
  fail(errc::invalid_configuration, "DH is not a pairwise curve distance");
}

}  // namespace fdaclass
