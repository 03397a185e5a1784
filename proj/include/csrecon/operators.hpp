#pragma once

#include <cmath>
#include <concepts>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "csrecon/error.hpp"
#include "csrecon/transforms.hpp"

namespace csrecon {

/// Matrix-free real linear map: apply() is A v, adjoint() is A^T v.
template <class Op>
concept LinearMap = requires(const Op& op, const Eigen::VectorXd& v) {
  { op.rows() } -> std::convertible_to<Index>;
  { op.cols() } -> std::convertible_to<Index>;
  { op.apply(v) } -> std::convertible_to<Eigen::VectorXd>;
  { op.adjoint(v) } -> std::convertible_to<Eigen::VectorXd>;
};

/// diag(A^T A), used for Jacobi preconditioning of A^T A terms.
template <class Op>
concept HasGramDiagonal = requires(const Op& op) {
  { op.gram_diagonal() } -> std::convertible_to<Eigen::VectorXd>;
};

/// diag(A D A^T) for a diagonal weight D.
template <class Op>
concept HasWeightedGramDiagonal = requires(const Op& op, const Eigen::VectorXd& d) {
  { op.weighted_gram_diagonal(d) } -> std::convertible_to<Eigen::VectorXd>;
};

/// Orthogonal projection onto null(A).
template <class Op>
concept HasNullProjector = requires(const Op& op, const Eigen::VectorXd& v) {
  { op.project_null(v) } -> std::convertible_to<Eigen::VectorXd>;
};

/// Operators that only pick entries of their input (identity, pixel masks).
template <class Op>
concept SelectionLike = requires(const Op& op) {
  { op.selected() } -> std::convertible_to<const std::vector<Index>&>;
};

inline void require_length(const Eigen::VectorXd& v, Index n, const char* what) {
  if (v.size() != n) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(n) + ", got " +
                         std::to_string(v.size()));
  }
}

class MatrixMap {
 public:
  explicit MatrixMap(Eigen::MatrixXd matrix) : matrix_(std::move(matrix)) {}

  Index rows() const { return matrix_.rows(); }
  Index cols() const { return matrix_.cols(); }
  const Eigen::MatrixXd& matrix() const { return matrix_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
    require_length(v, cols(), "MatrixMap::apply");
    return matrix_ * v;
  }
  Eigen::VectorXd adjoint(const Eigen::VectorXd& v) const {
    require_length(v, rows(), "MatrixMap::adjoint");
    return matrix_.transpose() * v;
  }
  Eigen::VectorXd gram_diagonal() const { return matrix_.colwise().squaredNorm().transpose(); }
  Eigen::VectorXd weighted_gram_diagonal(const Eigen::VectorXd& d) const { return matrix_.cwiseAbs2() * d; }

 private:
  Eigen::MatrixXd matrix_;
};

/// Picks `selected` entries of a length-`total` vector (pixel-mask rows).
class SelectionMap {
 public:
  SelectionMap(Index total, std::vector<Index> selected) : total_(total), selected_(std::move(selected)) {
    for (Index i : selected_) {
      if (i < 0 || i >= total_) throw DimensionError("SelectionMap: index out of range");
    }
  }

  static SelectionMap identity(Index n) {
    std::vector<Index> all(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
    return SelectionMap(n, std::move(all));
  }

  Index rows() const { return static_cast<Index>(selected_.size()); }
  Index cols() const { return total_; }
  const std::vector<Index>& selected() const { return selected_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
    require_length(v, cols(), "SelectionMap::apply");
    Eigen::VectorXd out(rows());
    for (Index i = 0; i < rows(); ++i) out(i) = v(selected_[static_cast<std::size_t>(i)]);
    return out;
  }
  Eigen::VectorXd adjoint(const Eigen::VectorXd& v) const {
    require_length(v, rows(), "SelectionMap::adjoint");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(cols());
    for (Index i = 0; i < rows(); ++i) out(selected_[static_cast<std::size_t>(i)]) += v(i);
    return out;
  }
  Eigen::VectorXd gram_diagonal() const { return adjoint(Eigen::VectorXd::Ones(rows())); }
  Eigen::VectorXd weighted_gram_diagonal(const Eigen::VectorXd& d) const { return apply(d); }
  Eigen::VectorXd project_null(const Eigen::VectorXd& v) const {
    Eigen::VectorXd out = v;
    for (Index i : selected_) out(i) = 0.0;
    return out;
  }

 private:
  Index total_;
  std::vector<Index> selected_;
};

/// Selected entries of the unitary 2-D DFT of a real H x W block, stacked as
/// [Re; Im] (2M real rows).
class PartialDftMap {
 public:
  PartialDftMap(Index height, Index width, MeasurementSelector selector)
      : transform_(TransformKind::Dft, height, width), selector_(std::move(selector)) {
    if (selector_.total != height * width) throw DimensionError("PartialDftMap: selector does not cover the block");
    // Frequencies whose measurements fix a conjugate pair.
    in_pair_.assign(static_cast<std::size_t>(selector_.total), false);
    for (Index k : selector_.selected) {
      in_pair_[static_cast<std::size_t>(k)] = true;
      in_pair_[static_cast<std::size_t>(conjugate_index(k))] = true;
    }
  }

  Index height() const { return transform_.height(); }
  Index width() const { return transform_.width(); }
  Index rows() const { return 2 * selector_.count(); }
  Index cols() const { return transform_.size(); }
  const MeasurementSelector& selector() const { return selector_; }

  /// Index of the frequency holding the conjugate of frequency k for real input.
  Index conjugate_index(Index k) const {
    const Index h = height(), w = width();
    const Index k1 = k / w, k2 = k % w;
    return ((h - k1) % h) * w + (w - k2) % w;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
    require_length(v, cols(), "PartialDftMap::apply");
    const RowMatrix<Complex> spectrum =
        transform_.forward(unflatten<double>(v, height(), width()).cast<Complex>());
    const Index m = selector_.count();
    Eigen::VectorXd out(2 * m);
    for (Index i = 0; i < m; ++i) {
      const Complex c = spectrum.data()[selector_.selected[static_cast<std::size_t>(i)]];
      out(i) = c.real();
      out(m + i) = c.imag();
    }
    return out;
  }

  Eigen::VectorXd adjoint(const Eigen::VectorXd& v) const {
    require_length(v, rows(), "PartialDftMap::adjoint");
    const Index m = selector_.count();
    RowMatrix<Complex> spectrum = RowMatrix<Complex>::Zero(height(), width());
    for (Index i = 0; i < m; ++i) {
      spectrum.data()[selector_.selected[static_cast<std::size_t>(i)]] += Complex(v(i), v(m + i));
    }
    const RowMatrix<Complex> image = transform_.inverse(spectrum);
    return flatten<double>(RowMatrix<double>(image.real()));
  }

  Eigen::VectorXd gram_diagonal() const {
    return Eigen::VectorXd::Constant(cols(), static_cast<double>(selector_.count()) / static_cast<double>(cols()));
  }

  /// Removes every frequency constrained by a measurement (and its conjugate
  /// partner), which is the orthogonal projection onto null(A) for real input.
  Eigen::VectorXd project_null(const Eigen::VectorXd& v) const {
    require_length(v, cols(), "PartialDftMap::project_null");
    RowMatrix<Complex> spectrum = transform_.forward(unflatten<double>(v, height(), width()).cast<Complex>());
    for (Index k = 0; k < cols(); ++k) {
      if (in_pair_[static_cast<std::size_t>(k)]) spectrum.data()[k] = 0.0;
    }
    const RowMatrix<Complex> image = transform_.inverse(spectrum);
    return flatten<double>(RowMatrix<double>(image.real()));
  }

 private:
  SeparableTransform<Complex> transform_;
  MeasurementSelector selector_;
  std::vector<bool> in_pair_;
};

struct CgResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Preconditioned conjugate gradients for a symmetric positive (semi)definite
/// system given as a callable. `precondition` applies M^{-1}.
template <class ApplyFn, class PreconditionFn>
CgResult conjugate_gradient(ApplyFn&& apply, const Eigen::VectorXd& b, PreconditionFn&& precondition,
                            double tolerance, int max_iterations) {
  CgResult result;
  result.x = Eigen::VectorXd::Zero(b.size());
  const double b_norm = b.norm();
  if (b_norm == 0.0) {
    result.converged = true;
    return result;
  }
  Eigen::VectorXd r = b;
  Eigen::VectorXd z = precondition(r);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  Eigen::VectorXd best_x = result.x;
  double best_residual = 1.0;
  for (int it = 1; it <= max_iterations; ++it) {
    const Eigen::VectorXd q = apply(p);
    const double pq = p.dot(q);
    if (!(pq > 0.0)) break;
    const double alpha = rz / pq;
    result.x += alpha * p;
    r -= alpha * q;
    result.iterations = it;
    const double rel = r.norm() / b_norm;
    if (rel < best_residual) {
      best_residual = rel;
      best_x = result.x;
    }
    if (rel <= tolerance) {
      result.converged = true;
      break;
    }
    z = precondition(r);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  result.x = std::move(best_x);
  result.relative_residual = best_residual;
  return result;
}

/// Minimum-norm solution of A x = y, x = A^T (A A^T)^+ y, by CG on the
/// normal equations of the second kind.
template <LinearMap Op>
Eigen::VectorXd minimum_norm_solution(const Op& op, const Eigen::VectorXd& y, double tolerance = 1e-12,
                                      int max_iterations = 1000) {
  const auto normal = [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(op.apply(op.adjoint(v))); };
  const auto identity = [](const Eigen::VectorXd& v) { return v; };
  const CgResult cg = conjugate_gradient(normal, y, identity, tolerance, max_iterations);
  return op.adjoint(cg.x);
}

}  // namespace csrecon
