#pragma once

#include <vector>

#include <Eigen/Dense>

#include "csrecon/error.hpp"
#include "csrecon/transforms.hpp"

namespace csrecon {

/// Dictionary A = S Psi^H for one image block: coefficients of a separable
/// 2-D transform, synthesized to pixels and sampled at the available pixel
/// positions. Applied matrix-free through the separable transform, so a
/// 64 x 64 block never materializes its 4096-column dictionary.
///
/// With normalize_columns the dictionary is A N^{-1}, N = diag(column norms),
/// i.e. every atom has unit norm; coefficients of the normalized system map
/// back to transform coefficients by dividing by column_norms().
template <class Scalar>
class BlockDictionary {
 public:
  using scalar_type = Scalar;
  using VectorType = Vector<Scalar>;
  using Block = RowMatrix<Scalar>;

  BlockDictionary(SeparableTransform<Scalar> transform, std::vector<Index> samples, bool normalize_columns)
      : transform_(std::move(transform)), samples_(std::move(samples)), normalized_(normalize_columns) {
    const Index h = transform_.height(), w = transform_.width();
    RowMatrix<double> mask = RowMatrix<double>::Zero(h, w);
    for (Index p : samples_) {
      if (p < 0 || p >= h * w) throw DimensionError("BlockDictionary: sample index out of range");
      mask.data()[p] = 1.0;
    }
    // ||A_k||^2 = sum over sampled pixels of |R(k1, r)|^2 |C(k2, c)|^2.
    row_sq_ = transform_.row_matrix().cwiseAbs2();
    col_sq_ = transform_.col_matrix().cwiseAbs2();
    const RowMatrix<double> norms_sq = row_sq_ * mask * col_sq_.transpose();
    norms_ = flatten<double>(norms_sq).cwiseSqrt();
    if (normalized_) {
      inverse_norms_ = norms_;
      for (Index k = 0; k < inverse_norms_.size(); ++k) {
        inverse_norms_(k) = norms_(k) > 0.0 ? 1.0 / norms_(k) : 0.0;
      }
    }
  }

  Index rows() const { return static_cast<Index>(samples_.size()); }
  Index cols() const { return transform_.size(); }
  const SeparableTransform<Scalar>& transform() const { return transform_; }
  const std::vector<Index>& samples() const { return samples_; }
  bool normalized() const { return normalized_; }
  const Eigen::VectorXd& column_norms() const { return norms_; }

  VectorType apply(const VectorType& x) const {
    if (x.size() != cols()) throw DimensionError("BlockDictionary::apply: wrong coefficient length");
    VectorType scaled = normalized_ ? VectorType(x.cwiseProduct(inverse_norms_.cast<Scalar>())) : x;
    const Block image = transform_.inverse(unflatten<Scalar>(scaled, transform_.height(), transform_.width()));
    VectorType out(rows());
    for (Index i = 0; i < rows(); ++i) out(i) = image.data()[samples_[static_cast<std::size_t>(i)]];
    return out;
  }

  /// A^H r.
  VectorType adjoint(const VectorType& r) const {
    if (r.size() != rows()) throw DimensionError("BlockDictionary::adjoint: wrong measurement length");
    Block image = Block::Zero(transform_.height(), transform_.width());
    for (Index i = 0; i < rows(); ++i) image.data()[samples_[static_cast<std::size_t>(i)]] = r(i);
    VectorType out = flatten<Scalar>(transform_.forward(image));
    if (normalized_) out = out.cwiseProduct(inverse_norms_.cast<Scalar>());
    return out;
  }

  VectorType correlate(const VectorType& r) const { return adjoint(r); }

  VectorType column(Index k) const {
    VectorType out(rows());
    const Scalar scale = normalized_ ? Scalar(inverse_norms_(k)) : Scalar(1.0);
    for (Index i = 0; i < rows(); ++i) {
      out(i) = conj_if_complex(transform_.entry(k, samples_[static_cast<std::size_t>(i)])) * scale;
    }
    return out;
  }

  /// A^H A_k, computed with one forward transform.
  VectorType gram_column(Index k) const { return adjoint(column(k)); }

  /// diag(A D A^T) for real dictionaries.
  Eigen::VectorXd weighted_gram_diagonal(const Eigen::VectorXd& d) const
    requires std::is_same_v<Scalar, double>
  {
    Eigen::VectorXd weights = normalized_ ? Eigen::VectorXd(d.cwiseProduct(inverse_norms_.cwiseAbs2())) : d;
    const RowMatrix<double> w = unflatten<double>(weights, transform_.height(), transform_.width());
    const RowMatrix<double> per_pixel = row_sq_.transpose() * w * col_sq_;
    Eigen::VectorXd out(rows());
    for (Index i = 0; i < rows(); ++i) out(i) = per_pixel.data()[samples_[static_cast<std::size_t>(i)]];
    return out;
  }

 private:
  static Scalar conj_if_complex(const Scalar& v) {
    if constexpr (std::is_same_v<Scalar, double>) {
      return v;
    } else {
      return std::conj(v);
    }
  }

  SeparableTransform<Scalar> transform_;
  std::vector<Index> samples_;
  bool normalized_;
  Eigen::MatrixXd row_sq_;
  Eigen::MatrixXd col_sq_;
  Eigen::VectorXd norms_;
  Eigen::VectorXd inverse_norms_;
};

/// Real view of a complex operator on stacked [Re; Im] vectors.
template <class ComplexOp>
class ComplexAsReal {
 public:
  explicit ComplexAsReal(const ComplexOp& op) : op_(&op) {}

  Index rows() const { return 2 * op_->rows(); }
  Index cols() const { return 2 * op_->cols(); }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const { return stack_real(op_->apply(unstack_complex(v))); }
  Eigen::VectorXd adjoint(const Eigen::VectorXd& v) const {
    return stack_real(op_->adjoint(unstack_complex(v)));
  }

 private:
  const ComplexOp* op_;
};

}  // namespace csrecon
