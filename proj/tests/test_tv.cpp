#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace csrecon;
using namespace testing_helpers;

namespace {

double loop_tv(const RowMatrix<double>& x) {
  double total = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      const double dv = i + 1 < x.rows() ? x(i + 1, j) - x(i, j) : 0.0;
      const double dh = j + 1 < x.cols() ? x(i, j + 1) - x(i, j) : 0.0;
      total += std::sqrt(dv * dv + dh * dh);
    }
  }
  return total;
}

double block_psnr(const RowMatrix<double>& a, const RowMatrix<double>& b) {
  return psnr(Image(a), Image(b));
}

}  // namespace

TEST(DiscreteGradient, MatchesForwardDifferences) {
  const Image img = random_image(7, 5, 1);
  const GradientField g = discrete_gradient(img.pixels);
  for (Index i = 0; i < 7; ++i) {
    for (Index j = 0; j < 5; ++j) {
      EXPECT_EQ(g.dx(i, j), i + 1 < 7 ? img.pixels(i + 1, j) - img.pixels(i, j) : 0.0);
      EXPECT_EQ(g.dy(i, j), j + 1 < 5 ? img.pixels(i, j + 1) - img.pixels(i, j) : 0.0);
    }
  }
}

TEST(TvNorm, ClosedFormCases) {
  RowMatrix<double> step = RowMatrix<double>::Zero(6, 8);
  step.rightCols(3).setConstant(100.0);
  EXPECT_DOUBLE_EQ(tv_norm(step), 600.0);  // one 100-unit jump per row
  EXPECT_EQ(tv_norm(RowMatrix<double>::Constant(5, 5, 42.0)), 0.0);
  RowMatrix<double> corner = RowMatrix<double>::Zero(2, 2);
  corner(0, 0) = 1.0;
  EXPECT_NEAR(tv_norm(corner), std::sqrt(2.0), 1e-15);
  const Image img = random_image(9, 11, 2);
  EXPECT_NEAR(tv_norm(img.pixels), loop_tv(img.pixels), 1e-9);
}

TEST(TvNorm, ShiftInvariantAndHomogeneous) {
  const Image img = random_image(16, 16, 3);
  const double base = tv_norm(img.pixels);
  for (double c : {-100.0, 1.0, 37.0}) {
    EXPECT_EQ(tv_norm(RowMatrix<double>(img.pixels.array() + c)), base);
  }
  for (double a : {-3.0, 0.25, 7.5}) {
    EXPECT_NEAR(tv_norm(RowMatrix<double>(a * img.pixels)), std::abs(a) * base, 1e-10 * std::abs(a) * base);
  }
}

TEST(TvReconstruct, AllPixelsReproduceTheBlock) {
  const Image img = synthetic_image(16, 16);
  const TvResult r = tv_denoise(img.pixels, 0.0);
  EXPECT_GE(block_psnr(r.block, img.pixels), 50.0);
}

TEST(TvReconstruct, OneDimensionalGapIsFilledMonotonically) {
  // Only the end points of a 1 x 9 signal are known: any monotone fill has TV 10.
  const SelectionMap op(9, {0, 8});
  Eigen::VectorXd y(2);
  y << 0.0, 10.0;
  const TvResult r = tv_reconstruct(op, y, 1, 9);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.tv, 10.0, 1e-3);
  EXPECT_NEAR(r.block(0, 0), 0.0, 1e-6);
  EXPECT_NEAR(r.block(0, 8), 10.0, 1e-6);
  for (Index j = 1; j < 9; ++j) EXPECT_GE(r.block(0, j), r.block(0, j - 1) - 1e-4);
}

TEST(TvReconstruct, PiecewiseConstantBlockFromHalfThePixels) {
  RowMatrix<double> truth = RowMatrix<double>::Constant(24, 24, 50.0);
  truth.block(6, 4, 12, 14).setConstant(200.0);
  Rng rng(4);
  std::vector<Index> samples;
  for (std::int64_t p : sample_without_replacement(24 * 24, 288, rng)) samples.push_back(p);
  std::sort(samples.begin(), samples.end());
  const SelectionMap op(24 * 24, samples);
  const TvResult r = tv_reconstruct(op, op.apply(flatten<double>(truth)), 24, 24);
  EXPECT_TRUE(r.converged);
  // The minimizer may cut an edge where a run of pixels is missing, so the
  // truth is not recovered exactly; its TV is an upper bound on the optimum.
  EXPECT_GE(block_psnr(r.block, truth), 25.0);
  for (Index p : samples) EXPECT_NEAR(r.block.data()[p], truth.data()[p], 1e-6);
  EXPECT_LE(r.tv, tv_norm(truth) * (1.0 + 1e-3));
}

TEST(TvReconstruct, PartialDftMeasurementsWithNoiseRadius) {
  RowMatrix<double> truth = RowMatrix<double>::Constant(16, 16, 50.0);
  truth.block(3, 5, 8, 8).setConstant(200.0);
  const PartialDftMap op(16, 16, draw_frequency_selector(256, 100, 5));
  TvSettings settings;
  settings.epsilon = 1e-3;
  const Eigen::VectorXd y = op.apply(flatten<double>(truth));
  const TvResult r = tv_reconstruct(op, y, 16, 16, settings);
  EXPECT_LE((op.apply(flatten<double>(r.block)) - y).norm(), 1e-3 * (1.0 + 1e-6));
  EXPECT_GE(block_psnr(r.block, truth), 40.0);
}

TEST(TvDenoise, LowersTotalVariationWithinTheRadius) {
  RowMatrix<double> clean = RowMatrix<double>::Constant(20, 20, 80.0);
  clean.bottomRows(10).setConstant(160.0);
  Rng rng(6);
  RowMatrix<double> noisy = clean;
  for (Index i = 0; i < noisy.size(); ++i) noisy.data()[i] += 5.0 * rng.normal();
  const double eps = 5.0 * 20.0;
  const TvResult r = tv_denoise(noisy, eps);
  EXPECT_LE((r.block - noisy).norm(), eps * (1.0 + 1e-6));
  EXPECT_LT(r.tv, 0.5 * tv_norm(noisy));
  EXPECT_GT(block_psnr(r.block, clean), block_psnr(noisy, clean));
}

TEST(TvReconstruct, RejectsBadInputs) {
  const SelectionMap op(16, {0, 1});
  const Eigen::VectorXd y = Eigen::VectorXd::Zero(2);
  EXPECT_THROW(tv_reconstruct(op, y, 3, 5), DimensionError);
  EXPECT_THROW(tv_reconstruct(op, Eigen::VectorXd(Eigen::VectorXd::Zero(3)), 4, 4), DimensionError);
  TvSettings bad;
  bad.epsilon = -1.0;
  EXPECT_THROW(tv_reconstruct(op, y, 4, 4, bad), InvalidArgument);
}
