#pragma once

#include <cmath>
#include <complex>
#include <concepts>
#include <vector>

#include <Eigen/Dense>

#include "csrecon/error.hpp"
#include "csrecon/transforms.hpp"

namespace csrecon {

/// Output of the greedy solvers.
template <class Scalar>
struct SparseSolution {
  Vector<Scalar> coefficients;  // zero outside `support`
  std::vector<Index> support;   // atoms in selection order
  Vector<Scalar> approximation; // A x
  Vector<Scalar> residual;      // y - A x
  int iterations = 0;
  bool rank_deficient = false;
  /// ||r_i||_2 for i = 0 .. iterations.
  std::vector<double> residual_norms;
};

struct StopRule {
  Index max_atoms = 0;
  double residual_tol = 1e-6;  // relative to ||y||_2
};

/// Dictionary accessed through correlations and single columns.
template <class D>
concept GreedyDictionary = requires(const D& d, const Vector<typename D::scalar_type>& v, Index j) {
  typename D::scalar_type;
  { d.rows() } -> std::convertible_to<Index>;
  { d.cols() } -> std::convertible_to<Index>;
  { d.correlate(v) } -> std::convertible_to<Vector<typename D::scalar_type>>;
  { d.column(j) } -> std::convertible_to<Vector<typename D::scalar_type>>;
  { d.apply(v) } -> std::convertible_to<Vector<typename D::scalar_type>>;
};

/// Dictionaries that can produce A^H A_j cheaply (without touching the other atoms).
template <class D>
concept GramDictionary = GreedyDictionary<D> && requires(const D& d, Index j) {
  { d.gram_column(j) } -> std::convertible_to<Vector<typename D::scalar_type>>;
};

/// Adapter for an explicit dense matrix.
template <class Scalar>
class DenseDictionary {
 public:
  using scalar_type = Scalar;

  explicit DenseDictionary(Matrix<Scalar> matrix) : matrix_(std::move(matrix)) {}

  Index rows() const { return matrix_.rows(); }
  Index cols() const { return matrix_.cols(); }
  const Matrix<Scalar>& matrix() const { return matrix_; }
  Vector<Scalar> correlate(const Vector<Scalar>& r) const { return matrix_.adjoint() * r; }
  Vector<Scalar> column(Index j) const { return matrix_.col(j); }
  Vector<Scalar> apply(const Vector<Scalar>& x) const { return matrix_ * x; }

 private:
  Matrix<Scalar> matrix_;
};

template <class Derived>
DenseDictionary<typename Derived::Scalar> make_dictionary(const Eigen::MatrixBase<Derived>& a) {
  return DenseDictionary<typename Derived::Scalar>(a);
}

/// argmin_x ||y - Theta x||_2; the minimum-norm minimizer when Theta has
/// dependent columns.
template <class Derived>
Vector<typename Derived::Scalar> least_squares(const Eigen::MatrixBase<Derived>& theta,
                                               const Vector<typename Derived::Scalar>& y) {
  using Scalar = typename Derived::Scalar;
  if (theta.rows() != y.size()) throw DimensionError("least_squares: row count does not match y");
  if (theta.cols() == 0) return Vector<Scalar>(0);
  Eigen::CompleteOrthogonalDecomposition<Matrix<Scalar>> cod(theta);
  return cod.solve(y);
}

enum class OmpFactorization {
  Auto,      // Cholesky when the dictionary exposes gram_column(), QR otherwise
  Qr,        // incremental QR (classical Gram-Schmidt with reorthogonalization)
  Cholesky,  // incremental Cholesky of Theta^H Theta
};

namespace detail {

template <class Scalar>
void check_omp_inputs(Index rows, const Vector<Scalar>& y, const StopRule& stop) {
  if (y.size() != rows) {
    throw DimensionError("omp: measurement length " + std::to_string(y.size()) + " does not match " +
                         std::to_string(rows) + " dictionary rows");
  }
  if (stop.max_atoms < 0 || stop.max_atoms > rows) {
    throw InvalidArgument("omp: max_atoms K=" + std::to_string(stop.max_atoms) + " must lie in [0, M=" +
                          std::to_string(rows) + "]");
  }
  if (!(stop.residual_tol >= 0.0)) throw InvalidArgument("omp: residual_tol must be non-negative");
}

/// Most correlated atom not yet chosen; ties go to the lowest index.
template <class Scalar>
Index select_atom(const Vector<Scalar>& correlations, const std::vector<bool>& chosen) {
  Index best = -1;
  double best_value = 0.0;
  for (Index j = 0; j < correlations.size(); ++j) {
    if (chosen[static_cast<std::size_t>(j)]) continue;
    const double value = std::abs(correlations(j));
    if (value > best_value) {
      best_value = value;
      best = j;
    }
  }
  return best;
}

template <class Scalar, class D>
SparseSolution<Scalar> finish(const D& dict, const Vector<Scalar>& y, SparseSolution<Scalar> s,
                              const Vector<Scalar>& support_values) {
  s.coefficients = Vector<Scalar>::Zero(dict.cols());
  for (std::size_t i = 0; i < s.support.size(); ++i) {
    s.coefficients(s.support[i]) = support_values(static_cast<Index>(i));
  }
  s.approximation = dict.apply(s.coefficients);
  s.residual = y - s.approximation;
  return s;
}

template <class Scalar, class D>
SparseSolution<Scalar> omp_qr(const Vector<Scalar>& y, const D& dict, const StopRule& stop) {
  const Index m = dict.rows();
  SparseSolution<Scalar> s;
  const double y_norm = y.norm();
  const double target = stop.residual_tol * y_norm;
  Vector<Scalar> r = y;
  s.residual_norms.push_back(y_norm);
  std::vector<bool> chosen(static_cast<std::size_t>(dict.cols()), false);
  Matrix<Scalar> q(m, stop.max_atoms);
  Matrix<Scalar> theta(m, stop.max_atoms);
  Vector<Scalar> qty(stop.max_atoms);
  Matrix<Scalar> upper = Matrix<Scalar>::Zero(stop.max_atoms, stop.max_atoms);
  Index rank = 0;

  while (s.iterations < stop.max_atoms && r.norm() > target) {
    const Index omega = select_atom<Scalar>(dict.correlate(r), chosen);
    if (omega < 0) break;  // r is orthogonal to every remaining atom
    chosen[static_cast<std::size_t>(omega)] = true;
    s.support.push_back(omega);
    const Vector<Scalar> atom = dict.column(omega);
    theta.col(s.iterations) = atom;

    // Orthogonalize the new atom against Q twice (CGS2).
    Vector<Scalar> v = atom;
    Vector<Scalar> h = Vector<Scalar>::Zero(rank);
    for (int pass = 0; pass < 2 && rank > 0; ++pass) {
      const Vector<Scalar> proj = q.leftCols(rank).adjoint() * v;
      v -= q.leftCols(rank) * proj;
      h += proj;
    }
    const double rho = v.norm();
    if (rho <= 1e-12 * atom.norm()) {
      s.rank_deficient = true;
    } else {
      q.col(rank) = v / rho;
      upper.col(rank).head(rank) = h;
      upper(rank, rank) = rho;
      qty(rank) = q.col(rank).dot(y);  // dot() conjugates its first argument
      r -= q.col(rank) * qty(rank);
      ++rank;
    }
    ++s.iterations;
    s.residual_norms.push_back(r.norm());
  }

  const Index k = s.iterations;
  Vector<Scalar> values;
  if (!s.rank_deficient) {
    // x = R^{-1} Q^H y minimizes ||y - Theta x||.
    values = upper.topLeftCorner(k, k).template triangularView<Eigen::Upper>().solve(qty.head(k));
  } else {
    values = least_squares(theta.leftCols(k), y);
  }
  return finish<Scalar>(dict, y, std::move(s), values);
}

template <class Scalar, class D>
SparseSolution<Scalar> omp_cholesky(const Vector<Scalar>& y, const D& dict, const StopRule& stop) {
  const Index n = dict.cols();
  SparseSolution<Scalar> s;
  const double y_norm = y.norm();
  const double target = stop.residual_tol * y_norm;
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  const Vector<Scalar> aty = dict.correlate(y);
  Vector<Scalar> correlations = aty;
  Matrix<Scalar> lower = Matrix<Scalar>::Zero(stop.max_atoms, stop.max_atoms);
  Vector<Scalar> rhs(stop.max_atoms);
  Vector<Scalar> values(0);
  Vector<Scalar> x = Vector<Scalar>::Zero(n);
  double r_norm = y_norm;
  s.residual_norms.push_back(r_norm);

  while (s.iterations < stop.max_atoms && r_norm > target) {
    const Index omega = select_atom<Scalar>(correlations, chosen);
    if (omega < 0) break;
    const Index k = s.iterations;
    const Vector<Scalar> gram = dict.gram_column(omega);
    Vector<Scalar> g_support(k);
    for (Index i = 0; i < k; ++i) g_support(i) = gram(s.support[static_cast<std::size_t>(i)]);
    // Theta^H Theta = L L^H; the new row of L is w^H with L w = Theta^H a.
    Vector<Scalar> w = lower.topLeftCorner(k, k).template triangularView<Eigen::Lower>().solve(g_support);
    const double diag_sq = std::real(gram(omega)) - w.squaredNorm();
    if (diag_sq <= 1e-10 * std::real(gram(omega))) {
      // Atom lies in the span of the chosen ones: stop instead of growing a singular factor.
      s.rank_deficient = true;
      break;
    }
    chosen[static_cast<std::size_t>(omega)] = true;
    s.support.push_back(omega);
    lower.row(k).head(k) = w.adjoint();
    lower(k, k) = std::sqrt(diag_sq);
    rhs(k) = aty(omega);
    ++s.iterations;

    const Index kk = s.iterations;
    const auto l = lower.topLeftCorner(kk, kk);
    const Vector<Scalar> z = l.template triangularView<Eigen::Lower>().solve(rhs.head(kk));
    values = l.adjoint().template triangularView<Eigen::Upper>().solve(z);
    x.setZero();
    for (Index i = 0; i < kk; ++i) x(s.support[static_cast<std::size_t>(i)]) = values(i);
    const Vector<Scalar> r = y - dict.apply(x);
    r_norm = r.norm();
    s.residual_norms.push_back(r_norm);
    correlations = dict.correlate(r);
  }
  if (values.size() != static_cast<Index>(s.support.size())) values = Vector<Scalar>::Zero(s.support.size());
  return finish<Scalar>(dict, y, std::move(s), values);
}

}  // namespace detail

/// Orthogonal Matching Pursuit.
///
/// r_0 = y, empty support; each iteration adds the atom with the largest
/// |<r, A_j>| (conjugating the atom, lowest index on ties, chosen atoms
/// excluded), refits x = argmin ||y - Theta x|| on the support and sets
/// r = y - Theta x. Stops after stop.max_atoms atoms or once
/// ||r|| <= stop.residual_tol * ||y||.
template <GreedyDictionary D>
SparseSolution<typename D::scalar_type> omp(const Vector<typename D::scalar_type>& y, const D& dict,
                                            const StopRule& stop,
                                            OmpFactorization factorization = OmpFactorization::Auto) {
  using Scalar = typename D::scalar_type;
  detail::check_omp_inputs<Scalar>(dict.rows(), y, stop);
  if constexpr (GramDictionary<D>) {
    if (factorization != OmpFactorization::Qr) return detail::omp_cholesky<Scalar>(y, dict, stop);
  } else {
    if (factorization == OmpFactorization::Cholesky) {
      throw InvalidArgument("omp: Cholesky factorization needs a dictionary with gram_column()");
    }
  }
  return detail::omp_qr<Scalar>(y, dict, stop);
}

template <class Derived>
SparseSolution<typename Derived::Scalar> omp(const Vector<typename Derived::Scalar>& y,
                                             const Eigen::MatrixBase<Derived>& a, const StopRule& stop) {
  return omp(y, make_dictionary(a), stop, OmpFactorization::Qr);
}

/// Plain Matching Pursuit: each iteration picks the atom with the largest
/// normalized correlation |<r, A_j>| / ||A_j||, adds its projection
/// <A_j, r> / ||A_j||^2 to that coefficient and subtracts it from r. Atoms
/// may be picked repeatedly; `support` lists each atom once, in order of
/// first selection.
template <GreedyDictionary D>
SparseSolution<typename D::scalar_type> matching_pursuit(const Vector<typename D::scalar_type>& y, const D& dict,
                                                         int iterations, double residual_tol = 1e-6) {
  using Scalar = typename D::scalar_type;
  detail::check_omp_inputs<Scalar>(dict.rows(), y, StopRule{0, residual_tol});
  if (iterations < 0) throw InvalidArgument("matching_pursuit: iteration count must be non-negative");
  SparseSolution<Scalar> s;
  const Index n = dict.cols();
  Eigen::VectorXd norms_sq(n);
  for (Index j = 0; j < n; ++j) norms_sq(j) = dict.column(j).squaredNorm();
  if (norms_sq.minCoeff() <= 0.0) throw InvalidArgument("matching_pursuit: dictionary has a zero column");
  const Eigen::VectorXd norms = norms_sq.cwiseSqrt();
  const double target = residual_tol * y.norm();
  Vector<Scalar> x = Vector<Scalar>::Zero(n);
  Vector<Scalar> r = y;
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  const std::vector<bool> none(static_cast<std::size_t>(n), false);
  s.residual_norms.push_back(r.norm());
  while (s.iterations < iterations && r.norm() > target) {
    const Vector<Scalar> c = dict.correlate(r);
    const Index j = detail::select_atom<Scalar>(Vector<Scalar>(c.cwiseQuotient(norms.cast<Scalar>())), none);
    if (j < 0) break;
    const Scalar step = c(j) / norms_sq(j);
    x(j) += step;
    r -= step * dict.column(j);
    if (!used[static_cast<std::size_t>(j)]) {
      used[static_cast<std::size_t>(j)] = true;
      s.support.push_back(j);
    }
    ++s.iterations;
    s.residual_norms.push_back(r.norm());
  }
  s.coefficients = x;
  s.approximation = dict.apply(x);
  s.residual = y - s.approximation;
  return s;
}

template <class Derived>
SparseSolution<typename Derived::Scalar> matching_pursuit(const Vector<typename Derived::Scalar>& y,
                                                          const Eigen::MatrixBase<Derived>& a, int iterations,
                                                          double residual_tol = 1e-6) {
  return matching_pursuit(y, make_dictionary(a), iterations, residual_tol);
}

}  // namespace csrecon
