#pragma once

#include <algorithm>
#include <complex>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "csrecon/error.hpp"
#include "csrecon/random.hpp"

namespace csrecon {

using Index = Eigen::Index;
using Complex = std::complex<double>;

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
/// 2-D arrays indexed (row, column) whose storage is the row-major
/// flattening used for pixel and coefficient vectors: n = row * width + col.
template <class Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class TransformKind { Dft, Dct };

inline std::string_view to_string(TransformKind kind) {
  return kind == TransformKind::Dft ? "dft" : "dct";
}

inline TransformKind parse_transform_kind(std::string_view text) {
  if (text == "dft") return TransformKind::Dft;
  if (text == "dct") return TransformKind::Dct;
  throw InvalidArgument("unknown transform kind '" + std::string(text) + "' (expected dft or dct)");
}

/// Dense unitary transform. Row k of matrix() is transform index k, column n
/// is sample index n, so forward(x) = matrix() * x.
class TransformBasis {
 public:
  TransformKind kind() const { return kind_; }
  Index size() const { return matrix_.rows(); }
  bool is_real() const { return kind_ == TransformKind::Dct; }

  const Eigen::MatrixXcd& matrix() const { return matrix_; }

  const Eigen::MatrixXd& real_matrix() const {
    if (!is_real()) throw InvalidArgument("real_matrix: the DFT basis is complex-valued");
    return real_;
  }

  /// Matrix in the requested scalar type; double is only available for DCT.
  template <class Scalar>
  const Matrix<Scalar>& as() const {
    if constexpr (std::is_same_v<Scalar, double>) {
      return real_matrix();
    } else {
      return matrix_;
    }
  }

  Eigen::VectorXcd forward(const Eigen::VectorXcd& x) const {
    check_length(x.size());
    return matrix_ * x;
  }

  Eigen::VectorXcd inverse(const Eigen::VectorXcd& coefficients) const {
    check_length(coefficients.size());
    return matrix_.adjoint() * coefficients;
  }

 private:
  friend TransformBasis build_basis(TransformKind kind, Index n);

  void check_length(Index n) const {
    if (n != size()) {
      throw DimensionError("transform of size " + std::to_string(size()) + " applied to vector of length " +
                           std::to_string(n));
    }
  }

  TransformKind kind_ = TransformKind::Dft;
  Eigen::MatrixXcd matrix_;
  Eigen::MatrixXd real_;
};

/// DFT: exp(-2 pi i j k / N) / sqrt(N). DCT: orthonormal type-II,
/// alpha_k cos(pi (2n + 1) k / 2N) with alpha_0 = sqrt(1/N), alpha_k = sqrt(2/N).
inline TransformBasis build_basis(TransformKind kind, Index n) {
  if (n < 1) throw InvalidArgument("build_basis: transform size must be at least 1");
  TransformBasis basis;
  basis.kind_ = kind;
  const double nd = static_cast<double>(n);
  if (kind == TransformKind::Dft) {
    basis.matrix_.resize(n, n);
    const double scale = 1.0 / std::sqrt(nd);
    for (Index k = 0; k < n; ++k) {
      for (Index j = 0; j < n; ++j) {
        // Reduce k*j mod n first so large products do not lose phase accuracy.
        const double phase = -2.0 * std::numbers::pi * static_cast<double>((k * j) % n) / nd;
        basis.matrix_(k, j) = std::polar(scale, phase);
      }
    }
  } else {
    basis.real_.resize(n, n);
    for (Index k = 0; k < n; ++k) {
      const double alpha = k == 0 ? std::sqrt(1.0 / nd) : std::sqrt(2.0 / nd);
      for (Index j = 0; j < n; ++j) {
        basis.real_(k, j) =
            alpha * std::cos(std::numbers::pi * static_cast<double>((2 * j + 1) * k) / (2.0 * nd));
      }
    }
    basis.matrix_ = basis.real_.cast<Complex>();
  }
  return basis;
}

/// Row selector Phi: which of the `total` positions are measured.
struct MeasurementSelector {
  Index total = 0;
  std::vector<Index> selected;  // strictly increasing
  std::uint64_t seed = 0;

  Index count() const { return static_cast<Index>(selected.size()); }
};

/// M distinct indices drawn uniformly from [0, N), sorted ascending.
inline MeasurementSelector draw_selector(Index total, Index count, std::uint64_t seed) {
  if (total < 1) throw InvalidArgument("draw_selector: N must be at least 1");
  if (count < 1 || count > total) {
    throw InvalidArgument("draw_selector: measurement count M=" + std::to_string(count) +
                          " must satisfy 1 <= M <= N=" + std::to_string(total));
  }
  Rng rng(seed);
  const auto drawn = sample_without_replacement(total, count, rng);
  MeasurementSelector selector{total, std::vector<Index>(drawn.begin(), drawn.end()), seed};
  std::sort(selector.selected.begin(), selector.selected.end());
  return selector;
}

/// Frequency selector for a partial DFT: index 0 (the block mean) plus M-1
/// distinct indices drawn uniformly from [1, N). Without the zero frequency
/// the mean lies in null(A) and no shift-invariant objective can recover it.
inline MeasurementSelector draw_frequency_selector(Index total, Index count, std::uint64_t seed) {
  if (total < 1) throw InvalidArgument("draw_frequency_selector: N must be at least 1");
  if (count < 1 || count > total) {
    throw InvalidArgument("draw_frequency_selector: measurement count M=" + std::to_string(count) +
                          " must satisfy 1 <= M <= N=" + std::to_string(total));
  }
  Rng rng(seed);
  const auto drawn = sample_without_replacement(total - 1, count - 1, rng);
  MeasurementSelector selector{total, {0}, seed};
  for (std::int64_t k : drawn) selector.selected.push_back(static_cast<Index>(k) + 1);
  std::sort(selector.selected.begin(), selector.selected.end());
  return selector;
}

/// Dictionary A = Phi Psi^H acting on transform coefficients: the selected
/// samples of the inverse transform. With columns_normalized every column of
/// A has unit norm (coefficients are divided by the column norms first).
class SensingOperator {
 public:
  SensingOperator(TransformBasis basis, MeasurementSelector selector, bool columns_normalized = false)
      : basis_(std::move(basis)), selector_(std::move(selector)), columns_normalized_(columns_normalized) {
    if (selector_.total != basis_.size()) {
      throw DimensionError("selector over " + std::to_string(selector_.total) +
                           " positions does not match basis of size " + std::to_string(basis_.size()));
    }
    column_norms_ = Eigen::VectorXd::Zero(basis_.size());
    for (Index row : selector_.selected) {
      column_norms_ += basis_.matrix().col(row).cwiseAbs2();
    }
    column_norms_ = column_norms_.cwiseSqrt();
    if (columns_normalized_ && column_norms_.minCoeff() <= 0.0) {
      throw DegenerateInputError("SensingOperator: a dictionary column is zero and cannot be normalized");
    }
  }

  const TransformBasis& basis() const { return basis_; }
  const MeasurementSelector& selector() const { return selector_; }
  bool columns_normalized() const { return columns_normalized_; }
  Index rows() const { return selector_.count(); }
  Index cols() const { return basis_.size(); }
  /// Column norms of the un-normalized dictionary.
  const Eigen::VectorXd& column_norms() const { return column_norms_; }

 private:
  TransformBasis basis_;
  MeasurementSelector selector_;
  bool columns_normalized_;
  Eigen::VectorXd column_norms_;
};

inline Eigen::VectorXcd apply_operator(const SensingOperator& op, const Eigen::VectorXcd& x) {
  if (x.size() != op.cols()) {
    throw DimensionError("apply_operator: expected coefficient vector of length " + std::to_string(op.cols()) +
                         ", got " + std::to_string(x.size()));
  }
  const Eigen::VectorXcd scaled =
      op.columns_normalized() ? Eigen::VectorXcd(x.cwiseQuotient(op.column_norms().cast<Complex>())) : x;
  const Eigen::VectorXcd signal = op.basis().inverse(scaled);
  Eigen::VectorXcd out(op.rows());
  for (Index i = 0; i < op.rows(); ++i) out(i) = signal(op.selector().selected[static_cast<std::size_t>(i)]);
  return out;
}

inline Eigen::VectorXcd apply_operator(const SensingOperator& op, const Eigen::VectorXd& x) {
  return apply_operator(op, Eigen::VectorXcd(x.cast<Complex>()));
}

struct MaterializedDictionary {
  Eigen::MatrixXcd matrix;
  /// Norms the columns had before normalization (all ones when not
  /// normalized). A solution z of the normalized system maps back to the
  /// operator's coefficients as z ./ scales.
  Eigen::VectorXd scales;
};

inline constexpr Index kDefaultMaxDictionaryEntries = Index{1} << 26;

inline MaterializedDictionary materialize_dictionary(const SensingOperator& op, bool normalize,
                                              Index max_entries = kDefaultMaxDictionaryEntries) {
  if (op.rows() * op.cols() > max_entries) {
    throw TooLargeError("materialize_dictionary: " + std::to_string(op.rows()) + "x" + std::to_string(op.cols()) +
                        " exceeds the budget of " + std::to_string(max_entries) +
                        " entries; use the operator form");
  }
  MaterializedDictionary out;
  out.matrix.resize(op.rows(), op.cols());
  const Eigen::MatrixXcd& psi = op.basis().matrix();
  for (Index i = 0; i < op.rows(); ++i) {
    out.matrix.row(i) = psi.col(op.selector().selected[static_cast<std::size_t>(i)]).adjoint();
  }
  if (op.columns_normalized()) {
    out.matrix = out.matrix * op.column_norms().cwiseInverse().asDiagonal();
  }
  out.scales = Eigen::VectorXd::Ones(op.cols());
  if (normalize) {
    out.scales = out.matrix.colwise().norm().transpose();
    for (Index j = 0; j < op.cols(); ++j) {
      if (out.scales(j) <= 0.0) throw DegenerateInputError("materialize_dictionary: zero column");
      out.matrix.col(j) /= out.scales(j);
    }
  }
  return out;
}

/// [Re A; Im A]: the real operator a complex matrix applies to real inputs.
inline Eigen::MatrixXd stack_real_rows(const Eigen::MatrixXcd& a) {
  Eigen::MatrixXd out(2 * a.rows(), a.cols());
  out << a.real(), a.imag();
  return out;
}

inline Eigen::VectorXd stack_real(const Eigen::VectorXcd& v) {
  Eigen::VectorXd out(2 * v.size());
  out << v.real(), v.imag();
  return out;
}

/// Real embedding of a complex matrix acting on complex inputs stacked as
/// [Re x; Im x]: [[Re A, -Im A], [Im A, Re A]].
inline Eigen::MatrixXd complex_embedding(const Eigen::MatrixXcd& a) {
  Eigen::MatrixXd out(2 * a.rows(), 2 * a.cols());
  out << a.real(), -a.imag(), a.imag(), a.real();
  return out;
}

inline Eigen::VectorXcd unstack_complex(const Eigen::VectorXd& v) {
  const Index n = v.size() / 2;
  Eigen::VectorXcd out(n);
  for (Index i = 0; i < n; ++i) out(i) = Complex(v(i), v(n + i));
  return out;
}

/// Separable 2-D transform on an H x W block, built from two 1-D bases:
/// coefficients = R * X * C^T, where R transforms columns (length H) and C
/// transforms rows (length W). Flattened, this is the Kronecker product
/// R (x) C under row-major ordering.
template <class Scalar>
class SeparableTransform {
 public:
  using Block = RowMatrix<Scalar>;

  SeparableTransform(const TransformBasis& rows, const TransformBasis& cols)
      : rows_(rows.template as<Scalar>()), cols_(cols.template as<Scalar>()) {
    if (rows.kind() != cols.kind()) throw InvalidArgument("SeparableTransform: mixed transform kinds");
    kind_ = rows.kind();
  }

  SeparableTransform(TransformKind kind, Index height, Index width)
      : SeparableTransform(build_basis(kind, height), build_basis(kind, width)) {}

  TransformKind kind() const { return kind_; }
  Index height() const { return rows_.rows(); }
  Index width() const { return cols_.rows(); }
  Index size() const { return height() * width(); }

  const Matrix<Scalar>& row_matrix() const { return rows_; }
  const Matrix<Scalar>& col_matrix() const { return cols_; }

  Block forward(const Block& image) const { return rows_ * image * cols_.transpose(); }
  Block inverse(const Block& coefficients) const { return rows_.adjoint() * coefficients * cols_.conjugate(); }

  /// Entry (k, n) of the flattened forward matrix.
  Scalar entry(Index k, Index n) const {
    return rows_(k / width(), n / width()) * cols_(k % width(), n % width());
  }

 private:
  TransformKind kind_;
  Matrix<Scalar> rows_;
  Matrix<Scalar> cols_;
};

template <class Scalar>
Eigen::Map<const Vector<Scalar>> flatten(const RowMatrix<Scalar>& block) {
  return Eigen::Map<const Vector<Scalar>>(block.data(), block.size());
}

template <class Scalar>
RowMatrix<Scalar> unflatten(const Vector<Scalar>& v, Index height, Index width) {
  if (v.size() != height * width) throw DimensionError("unflatten: length does not match block shape");
  return Eigen::Map<const RowMatrix<Scalar>>(v.data(), height, width);
}

}  // namespace csrecon
