#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "csrecon/error.hpp"
#include "csrecon/transforms.hpp"

namespace csrecon {

/// l1 concentration of transform coefficients (sum of moduli).
template <class Derived>
double concentration(const Eigen::MatrixBase<Derived>& x) {
  return static_cast<double>(x.cwiseAbs().sum());
}

/// Linear transform of a length-N real signal that also exposes its columns,
/// so a one-sample perturbation can be added to cached coefficients.
template <class T>
concept ConcentrationTransform = requires(const T& t, const Eigen::VectorXd& x, Index n) {
  { t.size() } -> std::convertible_to<Index>;
  t.forward(x);
  t.column(n);
};

/// Explicit N x N transform matrix, optionally scaled.
template <class Scalar>
class DenseTransform {
 public:
  explicit DenseTransform(Matrix<Scalar> matrix) : matrix_(std::move(matrix)) {
    if (matrix_.rows() != matrix_.cols()) throw DimensionError("DenseTransform: matrix must be square");
  }
  DenseTransform(const TransformBasis& basis, double scale)
      : DenseTransform(Matrix<Scalar>(basis.template as<Scalar>() * Scalar(scale))) {}

  Index size() const { return matrix_.rows(); }
  Vector<Scalar> forward(const Eigen::VectorXd& x) const { return matrix_ * x.cast<Scalar>(); }
  auto column(Index n) const { return matrix_.col(n); }
  const Matrix<Scalar>& matrix() const { return matrix_; }

 private:
  Matrix<Scalar> matrix_;
};

/// Separable 2D transform acting on row-major flattened blocks.
template <class Scalar>
class FlattenedTransform {
 public:
  FlattenedTransform(SeparableTransform<Scalar> transform, double scale)
      : transform_(std::move(transform)), scale_(scale) {}

  Index size() const { return transform_.size(); }

  Vector<Scalar> forward(const Eigen::VectorXd& x) const {
    const RowMatrix<Scalar> block = unflatten<Scalar>(x.cast<Scalar>(), transform_.height(), transform_.width());
    const RowMatrix<Scalar> coefficients = transform_.forward(block) * Scalar(scale_);
    return flatten<Scalar>(coefficients);
  }

  Vector<Scalar> column(Index n) const {
    const Index w = transform_.width();
    const RowMatrix<Scalar> outer =
        (transform_.row_matrix().col(n / w) * Scalar(scale_)) * transform_.col_matrix().col(n % w).transpose();
    return flatten<Scalar>(outer);
  }

  /// ||c + step psi_n||_1 - ||c - step psi_n||_1 without forming psi_n.
  double concentration_difference(const Vector<Scalar>& coefficients, Index n, double step) const {
    const Index h = transform_.height(), w = transform_.width();
    const Eigen::Map<const RowMatrix<Scalar>> c(coefficients.data(), h, w);
    const auto right = transform_.col_matrix().col(n % w).transpose().array();
    const auto left = transform_.row_matrix().col(n / w);
    double total = 0.0;
    for (Index i = 0; i < h; ++i) {
      const Scalar a = left(i) * Scalar(scale_ * step);
      total += ((c.row(i).array() + a * right).abs() - (c.row(i).array() - a * right).abs()).sum();
    }
    return total;
  }

 private:
  SeparableTransform<Scalar> transform_;
  double scale_;
};

struct GradientSettings {
  double step_reduction_factor = 1.0 / std::sqrt(10.0);
  double angle_threshold = 170.0 * std::numbers::pi / 180.0;
  double target_error_db = -60.0;
  int max_iterations = 2000;

  void validate() const {
    if (!(step_reduction_factor > 0.0 && step_reduction_factor < 1.0)) {
      throw InvalidArgument("GradientSettings: step_reduction_factor must be in (0, 1)");
    }
    if (!(angle_threshold > 0.0 && angle_threshold <= std::numbers::pi)) {
      throw InvalidArgument("GradientSettings: angle_threshold must be in (0, pi]");
    }
    if (max_iterations < 1) throw InvalidArgument("GradientSettings: max_iterations must be positive");
  }
};

/// Floor reported instead of -inf when an iteration changes nothing.
inline constexpr double kErrorFloorDb = -300.0;

struct GradientState {
  Eigen::VectorXd estimate;
  std::vector<Index> missing;
  double step = 0.0;
  Eigen::VectorXd gradient;
  std::optional<Eigen::VectorXd> previous_gradient;
  std::optional<double> angle;
  std::optional<double> error_db;
  int iteration = 0;
};

struct GradientTraceRow {
  int iteration = 0;
  double delta = 0.0;
  std::optional<double> beta;
  double eps_db = 0.0;
  double mu = 0.0;
};

struct GradientResult {
  Eigen::VectorXd estimate;
  bool converged = false;
  int iterations = 0;
  int reductions = 0;
  std::vector<GradientTraceRow> trace;
};

/// Signal of length n holding f at the available positions and 0 elsewhere.
inline Eigen::VectorXd zero_fill(const Eigen::VectorXd& f, const std::vector<Index>& available, Index n) {
  if (f.size() != static_cast<Index>(available.size())) {
    throw DimensionError("zero_fill: sample count does not match available positions");
  }
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  for (std::size_t i = 0; i < available.size(); ++i) {
    const Index p = available[i];
    if (p < 0 || p >= n) throw DimensionError("zero_fill: position out of range");
    y(p) = f(static_cast<Index>(i));
  }
  return y;
}

/// Complement of a set of available positions in [0, n).
inline std::vector<Index> missing_positions(const std::vector<Index>& available, Index n) {
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (Index p : available) seen[static_cast<std::size_t>(p)] = 1;
  std::vector<Index> out;
  for (Index p = 0; p < n; ++p) {
    if (!seen[static_cast<std::size_t>(p)]) out.push_back(p);
  }
  return out;
}

inline double initial_step(const Eigen::VectorXd& y) {
  const double step = y.size() > 0 ? y.cwiseAbs().maxCoeff() : 0.0;
  if (!(step > 0.0)) throw DegenerateInputError("initial_step: all samples are zero");
  return step;
}

/// G(n) = (mu(T(y + step e_n)) - mu(T(y - step e_n))) / N at every missing n, 0 elsewhere.
/// All positions are perturbed from the same estimate.
template <ConcentrationTransform Transform>
Eigen::VectorXd gradient_vector(const GradientState& state, const Transform& psi) {
  const Index n = state.estimate.size();
  if (psi.size() != n) throw DimensionError("gradient_vector: transform size does not match signal");
  if (!(state.step > 0.0)) throw InvalidArgument("gradient_vector: step must be positive");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  if (state.missing.empty()) return g;
  const auto coefficients = psi.forward(state.estimate);
  using Scalar = typename std::decay_t<decltype(coefficients)>::Scalar;
  const Scalar step(state.step);
  for (Index p : state.missing) {
    if constexpr (requires { psi.concentration_difference(coefficients, p, state.step); }) {
      g(p) = psi.concentration_difference(coefficients, p, state.step) / static_cast<double>(n);
    } else {
      const auto column = psi.column(p);
      const double plus = (coefficients + step * column).cwiseAbs().sum();
      const double minus = (coefficients - step * column).cwiseAbs().sum();
      g(p) = (plus - minus) / static_cast<double>(n);
    }
  }
  return g;
}

inline void apply_update(GradientState& state, const Eigen::VectorXd& g) {
  for (Index p : state.missing) state.estimate(p) -= g(p);
  ++state.iteration;
}

/// Angle between two gradients, or nothing if either is zero.
inline std::optional<double> gradient_angle(const Eigen::VectorXd& previous, const Eigen::VectorXd& current) {
  const double denom = previous.norm() * current.norm();
  if (!(denom > 0.0)) return std::nullopt;
  return std::acos(std::clamp(previous.dot(current) / denom, -1.0, 1.0));
}

/// Relative change of the missing samples between two iterates, in dB.
inline double iteration_error(const Eigen::VectorXd& previous, const Eigen::VectorXd& current,
                              const std::vector<Index>& missing) {
  double num = 0.0, den = 0.0;
  for (Index p : missing) {
    const double d = previous(p) - current(p);
    num += d * d;
    den += current(p) * current(p);
  }
  if (num == 0.0 || den == 0.0) return kErrorFloorDb;
  return std::max(kErrorFloorDb, 10.0 * std::log10(num / den));
}

/// Fills the missing samples of a signal by descending the l1 concentration
/// of its transform. Only missing positions are ever modified.
/// `observer`, if set, sees the estimate after every update.
template <ConcentrationTransform Transform>
GradientResult reconstruct_gradient(const Eigen::VectorXd& f, const std::vector<Index>& available,
                                    const Transform& psi, const GradientSettings& settings = {},
                                    const std::function<void(int, const Eigen::VectorXd&)>& observer = {}) {
  settings.validate();
  const Index n = psi.size();
  GradientState state;
  state.estimate = zero_fill(f, available, n);
  state.missing = missing_positions(available, n);

  GradientResult result;
  if (state.missing.empty()) {
    result.estimate = state.estimate;
    result.converged = true;
    return result;
  }
  const double step0 = initial_step(state.estimate);
  state.step = step0;

  for (int it = 1; it <= settings.max_iterations; ++it) {
    state.gradient = gradient_vector(state, psi);
    const Eigen::VectorXd previous = state.estimate;
    apply_update(state, state.gradient);
    if (observer) observer(it, state.estimate);
    state.angle = state.previous_gradient ? gradient_angle(*state.previous_gradient, state.gradient)
                                          : std::optional<double>{};
    state.error_db = iteration_error(previous, state.estimate, state.missing);

    GradientTraceRow row;
    row.iteration = it;
    row.delta = state.step;
    row.beta = state.angle;
    row.eps_db = *state.error_db;
    row.mu = concentration(psi.forward(state.estimate));
    result.trace.push_back(row);
    result.iterations = it;

    const bool zero_gradient = state.gradient.squaredNorm() == 0.0;
    if (zero_gradient || *state.error_db <= settings.target_error_db) {
      result.converged = true;
      break;
    }
    if (state.angle && *state.angle > settings.angle_threshold) {
      ++result.reductions;
      state.step = step0 * std::pow(settings.step_reduction_factor, result.reductions);
    }
    state.previous_gradient = state.gradient;
  }
  result.estimate = std::move(state.estimate);
  return result;
}

/// Writes the per-iteration trace as CSV: iteration,delta,beta,eps_db,mu.
/// The angle of the first iteration is undefined and written as "nan".
inline void write_gradient_trace(std::ostream& out, const std::vector<GradientTraceRow>& trace) {
  out << "iteration,delta,beta,eps_db,mu\n";
  const auto old_precision = out.precision(17);
  for (const auto& row : trace) {
    out << row.iteration << ',' << row.delta << ',';
    if (row.beta) {
      out << *row.beta;
    } else {
      out << "nan";
    }
    out << ',' << row.eps_db << ',' << row.mu << '\n';
  }
  out.precision(old_precision);
}

}  // namespace csrecon
