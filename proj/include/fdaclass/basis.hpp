#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fdaclass/errors.hpp"
#include "fdaclass/numeric.hpp"

namespace fdaclass {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// A B-spline function system phi_1..phi_M on a closed interval [a, b].
//
// The system is determined by a clamped knot vector: `order` copies of each
// boundary knot plus uniformly spaced interior knots, so that the number of
// basis functions M equals (#knots - order). Basis values come from the
// Cox-de Boor triangular recursion; at any point at most `order` of them are
// nonzero. The Gram matrix W, W(m, l) = integral of phi_m*phi_l over [a, b],
// is assembled once at construction with per-span Gauss-Legendre quadrature
// using `order` nodes, which is exact for the piecewise-polynomial
// integrands of degree 2*(order - 1).
//
// Instances are immutable and cheap to copy (shared internal state), so they
// can be used concurrently and moved across threads freely. Two systems are
// interchangeable iff they have identical structure; id() is a structural
// fingerprint used to enforce that on every binary operation.
class BasisSystem {
 public:
  static BasisSystem bspline(double a, double b, int order, int num_basis) {
    if (!(a < b)) {
      fail(errc::invalid_domain, "domain [" + std::to_string(a) + ", " + std::to_string(b) +
                                     "] must satisfy a < b");
    }
    if (order < 1) fail(errc::invalid_configuration, "order must be >= 1");
    if (num_basis < order) {
      fail(errc::invalid_configuration,
           "num_basis (" + std::to_string(num_basis) + ") must be >= order (" +
               std::to_string(order) + ")");
    }
    std::vector<double> knots;
    knots.reserve(static_cast<std::size_t>(num_basis + order));
    for (int i = 0; i < order; ++i) knots.push_back(a);
    const int interior = num_basis - order;
    for (int i = 1; i <= interior; ++i) {
      knots.push_back(a + (b - a) * static_cast<double>(i) / static_cast<double>(interior + 1));
    }
    for (int i = 0; i < order; ++i) knots.push_back(b);
    return from_knots(std::move(knots), order);
  }

  int order() const { return impl_->order; }
  int size() const { return impl_->num_basis; }
  double domain_begin() const { return impl_->a; }
  double domain_end() const { return impl_->b; }
  std::span<const double> knots() const { return impl_->knots; }
  const Matrix& gram() const { return impl_->gram; }
  std::uint64_t id() const { return impl_->id; }

  bool contains(double t) const { return t >= impl_->a && t <= impl_->b; }

  // Values of the `order` basis functions that can be nonzero at t; returns
  // the index of the first one. `values` must hold order() doubles.
  // t is assumed to lie in the domain.
  int nonzero_band(double t, double* values) const {
    const int span = find_span(t);
    basis_funs(span, t, values);
    return span - (impl_->order - 1);
  }

  // All M basis values at t (zero outside the active band).
  Vector basis_row(double t) const {
    Vector row = Vector::Zero(size());
    std::vector<double> band(static_cast<std::size_t>(order()));
    const int first = nonzero_band(t, band.data());
    for (int j = 0; j < order(); ++j) row[first + j] = band[static_cast<std::size_t>(j)];
    return row;
  }

  // Rows of basis values at each abscissa. Points outside [a, b] are errors.
  Matrix design_matrix(std::span<const double> ts) const {
    Matrix design = Matrix::Zero(static_cast<Eigen::Index>(ts.size()), size());
    std::vector<double> band(static_cast<std::size_t>(order()));
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (!contains(ts[i])) {
        fail(errc::out_of_domain, "evaluation point " + std::to_string(ts[i]) +
                                      " outside [" + std::to_string(impl_->a) + ", " +
                                      std::to_string(impl_->b) + "]");
      }
      const int first = nonzero_band(ts[i], band.data());
      for (int j = 0; j < order(); ++j) {
        design(static_cast<Eigen::Index>(i), first + j) = band[static_cast<std::size_t>(j)];
      }
    }
    return design;
  }

  // The companion system of order (order - times) obtained by dropping
  // `times` knots at each end. B-spline derivatives live there exactly.
  BasisSystem derivative_system(int times) const {
    if (times < 1) fail(errc::invalid_configuration, "derivative order must be >= 1");
    if (times >= order()) {
      fail(errc::derivative_order_too_high, "derivative order " + std::to_string(times) +
                                                " requires basis order > " +
                                                std::to_string(times));
    }
    std::vector<double> trimmed(impl_->knots.begin() + times, impl_->knots.end() - times);
    return from_knots(std::move(trimmed), order() - times);
  }

  friend bool operator==(const BasisSystem& x, const BasisSystem& y) { return x.id() == y.id(); }

 private:
  struct Impl {
    double a = 0.0, b = 1.0;
    int order = 0;
    int num_basis = 0;
    std::vector<double> knots;
    Matrix gram;
    std::uint64_t id = 0;
  };

  explicit BasisSystem(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

  static BasisSystem from_knots(std::vector<double> knots, int order) {
    auto impl = std::make_shared<Impl>();
    impl->order = order;
    impl->knots = std::move(knots);
    impl->num_basis = static_cast<int>(impl->knots.size()) - order;
    impl->a = impl->knots.front();
    impl->b = impl->knots.back();
    for (std::size_t i = 1; i < impl->knots.size(); ++i) {
      if (impl->knots[i] < impl->knots[i - 1]) {
        fail(errc::invalid_configuration, "knots must be non-decreasing");
      }
    }
    impl->id = fingerprint(*impl);
    BasisSystem basis(std::move(impl));
    basis.compute_gram();
    return basis;
  }

  static std::uint64_t fingerprint(const Impl& impl) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    auto mix = [&h](std::uint64_t bits) {
      for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xffULL;
        h *= 1099511628211ULL;
      }
    };
    mix(static_cast<std::uint64_t>(impl.order));
    mix(static_cast<std::uint64_t>(impl.num_basis));
    for (double k : impl.knots) {
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(k));
      std::memcpy(&bits, &k, sizeof(bits));
      mix(bits);
    }
    return h;
  }

  // Index of the knot span containing t, in [order-1, num_basis-1]. The
  // right domain end maps to the last span of positive width.
  int find_span(double t) const {
    const auto& k = impl_->knots;
    const int p = impl_->order - 1;
    const int m = impl_->num_basis;
    if (t >= k[static_cast<std::size_t>(m)]) {
      int i = m - 1;
      while (i > p && k[static_cast<std::size_t>(i)] == k[static_cast<std::size_t>(i + 1)]) --i;
      return i;
    }
    const auto begin = k.begin() + p;
    const auto end = k.begin() + m + 1;
    int idx = static_cast<int>(std::upper_bound(begin, end, t) - k.begin()) - 1;
    return std::clamp(idx, p, m - 1);
  }

  // Cox-de Boor triangular recursion; fills N[0..order-1] with the values of
  // B_{span-order+1} .. B_{span} at t.
  void basis_funs(int span, double t, double* N) const {
    const auto& k = impl_->knots;
    const int p = impl_->order - 1;
    N[0] = 1.0;
    std::array<double, 32> left_buf, right_buf;
    double* left = left_buf.data();
    double* right = right_buf.data();
    std::vector<double> heap;
    if (p + 1 > static_cast<int>(left_buf.size())) {
      heap.resize(2 * static_cast<std::size_t>(p + 1));
      left = heap.data();
      right = heap.data() + (p + 1);
    }
    for (int j = 1; j <= p; ++j) {
      left[j] = t - k[static_cast<std::size_t>(span + 1 - j)];
      right[j] = k[static_cast<std::size_t>(span + j)] - t;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        const double temp = N[r] / (right[r + 1] + left[j - r]);
        N[r] = saved + right[r + 1] * temp;
        saved = left[j - r] * temp;
      }
      N[j] = saved;
    }
  }

  void compute_gram() {
    // Safe because compute_gram is only called from from_knots, before the
    // instance is shared.
    auto* impl = const_cast<Impl*>(impl_.get());
    const int m = impl->num_basis;
    const int order = impl->order;
    impl->gram = Matrix::Zero(m, m);
    const GaussLegendre rule = gauss_legendre(order);
    std::vector<double> band(static_cast<std::size_t>(order));
    const auto& k = impl->knots;
    for (int span = order - 1; span < m; ++span) {
      const double lo = k[static_cast<std::size_t>(span)];
      const double hi = k[static_cast<std::size_t>(span + 1)];
      if (!(hi > lo)) continue;
      const double mid = 0.5 * (lo + hi);
      const double half = 0.5 * (hi - lo);
      for (int q = 0; q < order; ++q) {
        const double t = mid + half * rule.nodes[static_cast<std::size_t>(q)];
        const double w = half * rule.weights[static_cast<std::size_t>(q)];
        const int first = nonzero_band(t, band.data());
        for (int aa = 0; aa < order; ++aa) {
          for (int bb = 0; bb < order; ++bb) {
            impl->gram(first + aa, first + bb) +=
                w * band[static_cast<std::size_t>(aa)] * band[static_cast<std::size_t>(bb)];
          }
        }
      }
    }
    // enforce exact symmetry
    impl->gram = ((impl->gram + impl->gram.transpose()) * 0.5).eval();
  }

  std::shared_ptr<const Impl> impl_;
};

inline BasisSystem build_bspline_basis(double a, double b, int order, int num_basis) {
  return BasisSystem::bspline(a, b, order, num_basis);
}

// One curve in coefficient form: chi(t) = sum_m coeffs[m] * phi_m(t).
// Immutable; combinable with another datum only over the same basis.
class FunctionalDatum {
 public:
  FunctionalDatum(BasisSystem basis, Vector coeffs)
      : basis_(std::move(basis)), coeffs_(std::move(coeffs)) {
    if (coeffs_.size() != basis_.size()) {
      fail(errc::invalid_configuration,
           "coefficient length " + std::to_string(coeffs_.size()) + " does not match basis size " +
               std::to_string(basis_.size()));
    }
    if (!coeffs_.allFinite()) fail(errc::invalid_configuration, "coefficients must be finite");
  }

  const BasisSystem& basis() const { return basis_; }
  std::uint64_t basis_id() const { return basis_.id(); }
  const Vector& coeffs() const { return coeffs_; }

  FunctionalDatum with_coeffs(Vector coeffs) const {
    return FunctionalDatum(basis_, std::move(coeffs));
  }

  friend FunctionalDatum operator+(const FunctionalDatum& f, const FunctionalDatum& g) {
    require_same_basis(f, g, "sum");
    return FunctionalDatum(f.basis_, f.coeffs_ + g.coeffs_);
  }
  friend FunctionalDatum operator-(const FunctionalDatum& f, const FunctionalDatum& g) {
    require_same_basis(f, g, "difference");
    return FunctionalDatum(f.basis_, f.coeffs_ - g.coeffs_);
  }
  friend FunctionalDatum operator*(double c, const FunctionalDatum& f) {
    return FunctionalDatum(f.basis_, c * f.coeffs_);
  }

  static void require_same_basis(const FunctionalDatum& f, const FunctionalDatum& g,
                                 const char* what) {
    if (f.basis_id() != g.basis_id()) {
      fail(errc::basis_mismatch, std::string(what) + " requires matching basis systems");
    }
  }

 private:
  BasisSystem basis_;
  Vector coeffs_;
};

// Ordinary least squares of the observations on the basis design matrix,
// solved with a rank-revealing column-pivoted QR (threshold 1e-10 relative).
inline FunctionalDatum smooth_curve(const BasisSystem& basis, std::span<const double> ts,
                                    std::span<const double> ys) {
  if (ts.size() != ys.size()) {
    fail(errc::invalid_configuration, "abscissae and values must have equal length");
  }
  if (static_cast<int>(ts.size()) < basis.size()) {
    fail(errc::rank_deficient_fit, "need at least " + std::to_string(basis.size()) +
                                       " points to fit " + std::to_string(basis.size()) +
                                       " coefficients, got " + std::to_string(ts.size()));
  }
  const Matrix design = basis.design_matrix(ts);
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  qr.setThreshold(1e-10);
  const int rank = static_cast<int>(qr.rank());
  if (rank < basis.size()) {
    fail(errc::rank_deficient_fit, "design matrix has effective rank " + std::to_string(rank) +
                                       " < " + std::to_string(basis.size()));
  }
  const Vector y = Eigen::Map<const Vector>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  return FunctionalDatum(basis, qr.solve(y));
}

inline double evaluate(const FunctionalDatum& f, double t) {
  const BasisSystem& basis = f.basis();
  if (!basis.contains(t)) {
    fail(errc::out_of_domain, "evaluation point " + std::to_string(t) + " outside domain");
  }
  std::vector<double> band(static_cast<std::size_t>(basis.order()));
  const int first = basis.nonzero_band(t, band.data());
  double value = 0.0;
  for (int j = 0; j < basis.order(); ++j) {
    value += f.coeffs()[first + j] * band[static_cast<std::size_t>(j)];
  }
  return value;
}

inline Vector evaluate(const FunctionalDatum& f, std::span<const double> grid) {
  Vector out(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = evaluate(f, grid[i]);
  }
  return out;
}

// Exact L2(T) inner product through the Gram matrix.
inline double inner_product(const FunctionalDatum& f, const FunctionalDatum& g) {
  FunctionalDatum::require_same_basis(f, g, "inner product");
  return f.coeffs().dot(f.basis().gram() * g.coeffs());
}

inline double l2_norm(const FunctionalDatum& f) {
  return std::sqrt(std::max(0.0, inner_product(f, f)));
}

// Least-squares fit of every row of `values` observed on a shared grid.
inline std::vector<FunctionalDatum> smooth_rows(const BasisSystem& basis,
                                                std::span<const double> grid,
                                                const Matrix& values) {
  std::vector<FunctionalDatum> out;
  out.reserve(static_cast<std::size_t>(values.rows()));
  std::vector<double> row(static_cast<std::size_t>(values.cols()));
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) row[static_cast<std::size_t>(j)] = values(i, j);
    out.push_back(smooth_curve(basis, grid, row));
  }
  return out;
}

// Analytic B-spline derivative. The result lives in the companion system of
// order (order - times); no projection is involved, the identity is exact.
inline FunctionalDatum derivative(const FunctionalDatum& f, int times) {
  if (times < 1) fail(errc::invalid_configuration, "derivative order must be >= 1");
  if (times >= f.basis().order()) {
    fail(errc::derivative_order_too_high,
         "cannot take derivative of order " + std::to_string(times) + " on a basis of order " +
             std::to_string(f.basis().order()));
  }
  BasisSystem current = f.basis();
  Vector coeffs = f.coeffs();
  for (int step = 0; step < times; ++step) {
    const auto knots = current.knots();
    const int degree = current.order() - 1;
    const int m = current.size();
    Vector next(m - 1);
    for (int i = 0; i + 1 < m; ++i) {
      const double width = knots[static_cast<std::size_t>(i + degree + 1)] -
                           knots[static_cast<std::size_t>(i + 1)];
      next[i] = width > 0.0 ? degree * (coeffs[i + 1] - coeffs[i]) / width : 0.0;
    }
    current = current.derivative_system(1);
    coeffs = std::move(next);
  }
  return FunctionalDatum(std::move(current), std::move(coeffs));
}

}  // namespace fdaclass
