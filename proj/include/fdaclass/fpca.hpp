#pragma once

#include <Eigen/Dense>

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fdaclass/basis.hpp"
#include "fdaclass/errors.hpp"

namespace fdaclass {

enum class CovarianceMode { global, pooled_within_class, per_class };

// Curves with class labels in {1..G}. Every class must be represented and
// all curves must share one basis system.
class LabeledSample {
 public:
  LabeledSample(std::vector<FunctionalDatum> data, std::vector<int> labels, int num_classes)
      : data_(std::move(data)), labels_(std::move(labels)), num_classes_(num_classes) {
    if (data_.empty()) fail(errc::empty_sample, "labeled sample must not be empty");
    if (data_.size() != labels_.size()) {
      fail(errc::invalid_configuration, "labels and data must have equal length");
    }
    if (num_classes_ < 1) fail(errc::invalid_configuration, "need at least one class");
    counts_.assign(static_cast<std::size_t>(num_classes_), 0);
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (labels_[i] < 1 || labels_[i] > num_classes_) {
        fail(errc::invalid_configuration,
             "label " + std::to_string(labels_[i]) + " outside {1.." +
                 std::to_string(num_classes_) + "}");
      }
      ++counts_[static_cast<std::size_t>(labels_[i] - 1)];
      if (data_[i].basis_id() != data_.front().basis_id()) {
        fail(errc::basis_mismatch, "sample curves must share one basis system");
      }
    }
    for (int g = 1; g <= num_classes_; ++g) {
      if (counts_[static_cast<std::size_t>(g - 1)] == 0) {
        fail(errc::invalid_configuration, "class " + std::to_string(g) + " has no curves");
      }
    }
  }

  int size() const { return static_cast<int>(data_.size()); }
  int num_classes() const { return num_classes_; }
  const std::vector<FunctionalDatum>& data() const { return data_; }
  const FunctionalDatum& datum(int i) const { return data_[static_cast<std::size_t>(i)]; }
  int label(int i) const { return labels_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& labels() const { return labels_; }
  int class_count(int g) const { return counts_[static_cast<std::size_t>(g - 1)]; }
  const BasisSystem& basis() const { return data_.front().basis(); }

  LabeledSample subset(std::span<const int> indices) const {
    std::vector<FunctionalDatum> data;
    std::vector<int> labels;
    data.reserve(indices.size());
    labels.reserve(indices.size());
    for (int i : indices) {
      data.push_back(data_[static_cast<std::size_t>(i)]);
      labels.push_back(labels_[static_cast<std::size_t>(i)]);
    }
    return LabeledSample(std::move(data), std::move(labels), num_classes_);
  }

 private:
  std::vector<FunctionalDatum> data_;
  std::vector<int> labels_;
  int num_classes_;
  std::vector<int> counts_;
};

inline FunctionalDatum sample_mean(std::span<const FunctionalDatum> curves) {
  if (curves.empty()) fail(errc::empty_sample, "mean of an empty sample");
  Vector sum = curves.front().coeffs();
  for (std::size_t i = 1; i < curves.size(); ++i) {
    FunctionalDatum::require_same_basis(curves.front(), curves[i], "mean");
    sum += curves[i].coeffs();
  }
  return FunctionalDatum(curves.front().basis(), sum / static_cast<double>(curves.size()));
}

inline FunctionalDatum sample_mean(const std::vector<FunctionalDatum>& curves) {
  return sample_mean(std::span<const FunctionalDatum>(curves));
}

// Eigenstructure of a sample covariance operator expressed in basis
// coordinates, together with the centering mean(s) used to fit it.
//
// The operator acts on curves f = phi' b as Gamma(f) = phi' Sigma_b W b,
// where Sigma_b is the centered coefficient covariance (divisor n, or n_g
// per class) and W the Gram matrix. Its eigenpairs are obtained from the
// symmetric problem W^{1/2} Sigma_b W^{1/2} v = lambda v, with eigenfunction
// coefficients u = W^{-1/2} v; the resulting eigenfunctions are orthonormal
// in L2. Eigenvalues below max(1e-10 * lambda_1, 1e-14) are discarded, and
// each eigenfunction's sign is fixed so its largest-magnitude coefficient is
// positive.
class FpcaModel {
 public:
  CovarianceMode mode() const { return mode_; }
  const BasisSystem& basis() const { return basis_; }
  int retained_count() const { return static_cast<int>(eigenvalues_.size()); }
  const Vector& eigenvalues() const { return eigenvalues_; }
  double eigenvalue(int k) const { return eigenvalues_[k]; }
  const Matrix& eigenfunction_coeffs() const { return coeffs_; }
  int num_means() const { return static_cast<int>(means_.size()); }

  // For per-class models, the class whose curves were used.
  int class_index() const { return class_index_; }

  FunctionalDatum eigenfunction(int k) const {
    if (k < 0 || k >= retained_count()) {
      fail(errc::k_out_of_range, "eigenfunction index " + std::to_string(k));
    }
    return FunctionalDatum(basis_, coeffs_.col(k));
  }

  // center_class: 0 selects the model's sole mean (global and per-class
  // modes); 1..G select class means of a pooled model.
  const FunctionalDatum& mean(int center_class = 0) const {
    return means_[static_cast<std::size_t>(mean_slot(center_class))];
  }

  // Principal component scores <f - mean, psi_k> for k = 1..K.
  Vector scores(const FunctionalDatum& f, int center_class, int K) const {
    check_truncation(K);
    if (f.basis_id() != basis_.id()) {
      fail(errc::basis_mismatch, "scores require the model's basis system");
    }
    const Vector centered = f.coeffs() - mean(center_class).coeffs();
    return proj_.leftCols(K).transpose() * centered;
  }

  // Scores divided by sqrt(eigenvalue); unit variance under the fitted law.
  Vector standardized_scores(const FunctionalDatum& f, int center_class, int K) const {
    Vector w = scores(f, center_class, K);
    for (int k = 0; k < K; ++k) w[k] /= std::sqrt(eigenvalues_[k]);
    return w;
  }

  void check_truncation(int K) const {
    if (K < 0 || K > retained_count()) {
      fail(errc::k_out_of_range, "truncation " + std::to_string(K) + " exceeds retained count " +
                                     std::to_string(retained_count()));
    }
  }

  // W * eigenfunction_coeffs; maps coefficient vectors to score space with a
  // single product, scores(f, c, K) = projection().leftCols(K)' * (b_f - b_c).
  const Matrix& score_projection() const { return proj_; }

 private:
  friend FpcaModel fit_fpca(const LabeledSample&, CovarianceMode);
  friend FpcaModel fit_fpca_class(const LabeledSample&, int);

  FpcaModel(BasisSystem basis, CovarianceMode mode, std::vector<FunctionalDatum> means,
            Matrix coeffs, Vector eigenvalues, int class_index)
      : basis_(std::move(basis)),
        mode_(mode),
        means_(std::move(means)),
        coeffs_(std::move(coeffs)),
        eigenvalues_(std::move(eigenvalues)),
        class_index_(class_index) {
    proj_ = basis_.gram() * coeffs_;
  }

  int mean_slot(int center_class) const {
    if (center_class == 0) {
      if (means_.size() == 1) return 0;
      fail(errc::invalid_configuration, "pooled model requires an explicit class for centering");
    }
    if (mode_ == CovarianceMode::per_class) {
      if (center_class == class_index_) return 0;
      fail(errc::invalid_configuration, "per-class model centered on a different class");
    }
    if (center_class < 1 || center_class > static_cast<int>(means_.size())) {
      fail(errc::invalid_configuration, "no mean for class " + std::to_string(center_class));
    }
    return center_class - 1;
  }

  BasisSystem basis_;
  CovarianceMode mode_;
  std::vector<FunctionalDatum> means_;
  Matrix coeffs_;       // M x K eigenfunction coefficients
  Vector eigenvalues_;  // positive, non-increasing
  int class_index_;
  Matrix proj_;  // W * coeffs_, so scores are single mat-vec products
};

namespace detail {

struct EigenDecomposition {
  Matrix coeffs;
  Vector eigenvalues;
};

// Symmetric eigenproblem for the covariance operator in basis coordinates.
// `centered` holds row-wise centered coefficients, `divisor` the 1/n (or
// 1/n_g) convention, `max_rank` the algebraic rank bound n - #centerings.
inline EigenDecomposition covariance_eigen(const BasisSystem& basis, const Matrix& centered,
                                           double divisor, int max_rank) {
  const int m = basis.size();
  const Matrix sigma = centered.transpose() * centered / divisor;

  Eigen::SelfAdjointEigenSolver<Matrix> gram_eig(basis.gram());
  const double gram_max = gram_eig.eigenvalues().maxCoeff();
  if (gram_eig.eigenvalues().minCoeff() <= 1e-10 * gram_max) {
    fail(errc::basis_degenerate, "Gram matrix is not positive definite");
  }
  const Vector gram_sqrt = gram_eig.eigenvalues().cwiseSqrt();
  const Matrix w_half =
      gram_eig.eigenvectors() * gram_sqrt.asDiagonal() * gram_eig.eigenvectors().transpose();
  const Matrix w_half_inv = gram_eig.eigenvectors() * gram_sqrt.cwiseInverse().asDiagonal() *
                            gram_eig.eigenvectors().transpose();

  Matrix sym = w_half * sigma * w_half;
  sym = ((sym + sym.transpose()) * 0.5).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);

  const double top = eig.eigenvalues().maxCoeff();
  const double floor = std::max(1e-10 * top, 1e-14);
  int retained = 0;
  for (int i = 0; i < m; ++i) {
    if (eig.eigenvalues()[m - 1 - i] >= floor) ++retained;
  }
  retained = std::min(retained, std::min(m, max_rank));

  EigenDecomposition out;
  out.eigenvalues.resize(retained);
  out.coeffs.resize(m, retained);
  for (int k = 0; k < retained; ++k) {
    out.eigenvalues[k] = eig.eigenvalues()[m - 1 - k];
    Vector u = w_half_inv * eig.eigenvectors().col(m - 1 - k);
    int arg = 0;
    u.cwiseAbs().maxCoeff(&arg);
    if (u[arg] < 0.0) u = -u;
    out.coeffs.col(k) = u;
  }
  return out;
}

}  // namespace detail

// Global and pooled-within-class covariance estimation. Global centers every
// curve at the overall mean with divisor n; pooled centers each curve at its
// own class mean, also with divisor n.
inline FpcaModel fit_fpca(const LabeledSample& sample, CovarianceMode mode) {
  if (mode == CovarianceMode::per_class) {
    fail(errc::invalid_configuration, "use fit_fpca_class (or fit_fpca_per_class) for per-class models");
  }
  const int n = sample.size();
  const int num_centers = mode == CovarianceMode::global ? 1 : sample.num_classes();
  if (n < num_centers + 1) {
    fail(errc::insufficient_data, "need more than " + std::to_string(num_centers) +
                                      " curves, got " + std::to_string(n));
  }

  std::vector<FunctionalDatum> means;
  if (mode == CovarianceMode::global) {
    means.push_back(sample_mean(sample.data()));
  } else {
    for (int g = 1; g <= sample.num_classes(); ++g) {
      std::vector<FunctionalDatum> in_class;
      in_class.reserve(static_cast<std::size_t>(sample.class_count(g)));
      for (int i = 0; i < n; ++i) {
        if (sample.label(i) == g) in_class.push_back(sample.datum(i));
      }
      means.push_back(sample_mean(in_class));
    }
  }

  const int m = sample.basis().size();
  Matrix centered(n, m);
  for (int i = 0; i < n; ++i) {
    const int slot = mode == CovarianceMode::global ? 0 : sample.label(i) - 1;
    centered.row(i) =
        (sample.datum(i).coeffs() - means[static_cast<std::size_t>(slot)].coeffs()).transpose();
  }

  auto decomp = detail::covariance_eigen(sample.basis(), centered, static_cast<double>(n),
                                         n - num_centers);
  return FpcaModel(sample.basis(), mode, std::move(means), std::move(decomp.coeffs),
                   std::move(decomp.eigenvalues), 0);
}

// Covariance of the curves in one class, centered at that class's mean with
// divisor n_g.
inline FpcaModel fit_fpca_class(const LabeledSample& sample, int cls) {
  if (cls < 1 || cls > sample.num_classes()) {
    fail(errc::invalid_configuration, "class " + std::to_string(cls) + " not in sample");
  }
  const int ng = sample.class_count(cls);
  if (ng < 2) {
    fail(errc::insufficient_data,
         "class " + std::to_string(cls) + " needs at least 2 curves, got " + std::to_string(ng));
  }
  std::vector<FunctionalDatum> in_class;
  in_class.reserve(static_cast<std::size_t>(ng));
  for (int i = 0; i < sample.size(); ++i) {
    if (sample.label(i) == cls) in_class.push_back(sample.datum(i));
  }
  std::vector<FunctionalDatum> means;
  means.push_back(sample_mean(in_class));

  const int m = sample.basis().size();
  Matrix centered(ng, m);
  for (int i = 0; i < ng; ++i) {
    centered.row(i) =
        (in_class[static_cast<std::size_t>(i)].coeffs() - means.front().coeffs()).transpose();
  }
  auto decomp =
      detail::covariance_eigen(sample.basis(), centered, static_cast<double>(ng), ng - 1);
  return FpcaModel(sample.basis(), CovarianceMode::per_class, std::move(means),
                   std::move(decomp.coeffs), std::move(decomp.eigenvalues), cls);
}

inline std::vector<FpcaModel> fit_fpca_per_class(const LabeledSample& sample) {
  std::vector<FpcaModel> models;
  models.reserve(static_cast<std::size_t>(sample.num_classes()));
  for (int g = 1; g <= sample.num_classes(); ++g) models.push_back(fit_fpca_class(sample, g));
  return models;
}

}  // namespace fdaclass
