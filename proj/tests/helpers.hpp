#pragma once

#include <algorithm>
#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "csrecon/csrecon.hpp"

namespace testing_helpers {

using namespace csrecon;

/// Gaussian matrix with unit-norm columns.
inline Eigen::MatrixXd gaussian_unit_columns(Index m, Index n, Rng& rng) {
  Eigen::MatrixXd a(m, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < m; ++i) a(i, j) = rng.normal();
    a.col(j).normalize();
  }
  return a;
}

/// K-sparse vector with random support, random signs and magnitudes in [1, 2).
inline Eigen::VectorXd planted_sparse(Index n, Index k, Rng& rng) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  for (std::int64_t j : sample_without_replacement(n, k, rng)) x(j) = rng.sign() * (1.0 + rng.uniform());
  return x;
}

/// Direct O(N^2) unitary DFT by summation.
inline Eigen::VectorXcd naive_dft(const Eigen::VectorXcd& x) {
  const Index n = x.size();
  Eigen::VectorXcd out(n);
  for (Index k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (Index j = 0; j < n; ++j) {
      acc += x(j) * std::exp(std::complex<double>(0.0, -2.0 * std::numbers::pi * double(k) * double(j) / double(n)));
    }
    out(k) = acc / std::sqrt(double(n));
  }
  return out;
}

/// Orthonormal DCT-II through the DFT of the even extension [x, reverse(x)].
inline Eigen::VectorXd dct_via_even_extension(const Eigen::VectorXd& x) {
  const Index n = x.size();
  Eigen::VectorXcd y(2 * n);
  for (Index j = 0; j < n; ++j) {
    y(j) = x(j);
    y(2 * n - 1 - j) = x(j);
  }
  const Eigen::VectorXcd big = naive_dft(y) * std::sqrt(double(2 * n));  // unnormalized
  Eigen::VectorXd out(n);
  for (Index k = 0; k < n; ++k) {
    const std::complex<double> twiddle = std::exp(std::complex<double>(0.0, -std::numbers::pi * double(k) / (2.0 * double(n))));
    const double alpha = k == 0 ? std::sqrt(1.0 / double(n)) : std::sqrt(2.0 / double(n));
    out(k) = alpha * (twiddle * big(k)).real() / 2.0;
  }
  return out;
}

/// Smooth 8-bit-valued test image with an edge and a gradient.
inline Image synthetic_image(Index h, Index w) {
  Image image(h, w);
  for (Index i = 0; i < h; ++i) {
    for (Index j = 0; j < w; ++j) {
      const double ramp = 60.0 + 80.0 * double(i + j) / double(h + w);
      const bool inside = (i - h / 2) * (i - h / 2) + (j - w / 3) * (j - w / 3) < (h / 4) * (h / 4);
      image.pixels(i, j) = std::round(inside ? ramp + 70.0 : ramp);
    }
  }
  return image;
}

inline Image random_image(Index h, Index w, std::uint64_t seed) {
  Rng rng(seed);
  Image image(h, w);
  for (Index i = 0; i < h; ++i) {
    for (Index j = 0; j < w; ++j) image.pixels(i, j) = double(rng.uniform_index(256));
  }
  return image;
}

}  // namespace testing_helpers
