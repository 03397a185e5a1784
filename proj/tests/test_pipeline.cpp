#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

#include "helpers.hpp"

using namespace csrecon;
using namespace testing_helpers;

TEST(Mask, ExactCountAndSeeded) {
  const PixelMask all = make_mask(5, 7, 1.0, 3);
  EXPECT_EQ(all.count(), 35);
  EXPECT_EQ(make_mask(2, 2, 0.5, 9).count(), 2);
  const PixelMask a = make_mask(200, 200, 0.3, 1);
  EXPECT_EQ(a.count(), 12000);
  EXPECT_DOUBLE_EQ(a.realized_theta(), 0.3);
  EXPECT_EQ(make_mask(200, 200, 0.3, 1).available, a.available);
  EXPECT_NE(make_mask(200, 200, 0.3, 2).available, a.available);
}

TEST(Mask, RejectsInvalidFraction) {
  for (double theta : {0.0, -0.1, 1.01}) {
    try {
      make_mask(4, 4, theta, 1);
      FAIL() << "theta " << theta << " accepted";
    } catch (const InvalidArgument& e) {
      EXPECT_STREQ(e.what(), "theta must be in (0,1]");
    }
  }
}

TEST(Tiling, GridAndPaddingFor200x200) {
  const BlockTiling t = make_tiling(200, 200, 64);
  EXPECT_EQ(t.grid_rows, 4);
  EXPECT_EQ(t.grid_cols, 4);
  ASSERT_EQ(t.placements.size(), 16u);
  EXPECT_EQ(t.placements[3].col, 192);
  EXPECT_EQ(t.placements[3].width, 8);
  EXPECT_EQ(t.placements[3].height, 64);
  EXPECT_EQ(t.placements[15].height, 8);
  const BlockTiling single = make_tiling(50, 30, 64);
  EXPECT_EQ(single.placements.size(), 1u);
  EXPECT_THROW(make_tiling(10, 10, 0), InvalidArgument);
}

TEST(Tiling, EdgeBlocksReplicateTheLastRowAndColumn) {
  const Image img = random_image(5, 7, 4);
  const BlockTiling t = make_tiling(5, 7, 4);
  const auto blocks = partition_blocks(img.pixels, t);
  ASSERT_EQ(blocks.size(), 4u);
  const RowMatrix<double>& corner = blocks[3];  // real region is 1 x 3 starting at (4, 4)
  for (Index i = 0; i < 4; ++i) {
    for (Index j = 0; j < 4; ++j) EXPECT_EQ(corner(i, j), img.pixels(4, 4 + std::min<Index>(j, 2)));
  }
}

TEST(Tiling, PartitionReassembleIsIdentity) {
  for (auto [h, w] : {std::pair<Index, Index>{1, 1}, {7, 5}, {64, 64}, {200, 200}}) {
    const Image img = random_image(h, w, static_cast<std::uint64_t>(h * 1000 + w));
    for (Index b : {1, 3, 64}) {
      const BlockTiling t = make_tiling(h, w, b);
      const RowMatrix<double> back = reassemble(partition_blocks(img.pixels, t), t);
      EXPECT_TRUE(back == img.pixels) << h << "x" << w << " B=" << b;
    }
  }
}

TEST(Psnr, ClosedForms) {
  const Image zeros(4, 4, 0.0), full(4, 4, 255.0), ones(4, 4, 1.0);
  EXPECT_TRUE(std::isinf(psnr(zeros, zeros)));
  EXPECT_DOUBLE_EQ(psnr(zeros, full), 0.0);
  EXPECT_NEAR(psnr(zeros, ones), 48.1308, 1e-4);
  EXPECT_NEAR(psnr(zeros, ones), 20.0 * std::log10(255.0), 1e-12);
  const Image a = random_image(9, 9, 1), b = random_image(9, 9, 2);
  EXPECT_EQ(psnr(a, b), psnr(b, a));
  EXPECT_THROW(psnr(Image(4, 4), Image(4, 5)), DimensionError);
}

TEST(Bmp, EightBitRoundTrip) {
  const Image img = random_image(13, 7, 5);
  const Image back = decode_bmp(encode_bmp(img, 8));
  EXPECT_TRUE(back.pixels == img.pixels);
  EXPECT_EQ(back.source_bits, 8);
}

TEST(Bmp, TwentyFourBitRoundTripAndRowPadding) {
  const Image img = random_image(3, 5, 6);  // 15-byte rows padded to 16
  const std::vector<unsigned char> bytes = encode_bmp(img, 24);
  EXPECT_EQ(bytes.size(), 54u + 16u * 3u);
  const Image back = decode_bmp(bytes);
  EXPECT_LE((back.pixels - img.pixels).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_EQ(back.source_bits, 24);
}

TEST(Bmp, ColourPixelsUseLuma) {
  std::vector<unsigned char> bytes = encode_bmp(Image(1, 1, 0.0), 24);
  bytes[54] = 30;   // B
  bytes[55] = 20;   // G
  bytes[56] = 10;   // R
  EXPECT_NEAR(decode_bmp(bytes).pixels(0, 0), 0.299 * 10 + 0.587 * 20 + 0.114 * 30, 1e-12);
}

TEST(Bmp, TopDownRowsAreRead) {
  Image img(2, 1);
  img.pixels(0, 0) = 10.0;
  img.pixels(1, 0) = 200.0;
  std::vector<unsigned char> bytes = encode_bmp(img, 8);
  // Flip to top-down: negative height and rows in top-to-bottom order.
  const std::int32_t h = -2;
  std::memcpy(&bytes[22], &h, 4);
  const std::size_t data = bytes.size() - 8;
  std::swap_ranges(bytes.begin() + static_cast<long>(data), bytes.begin() + static_cast<long>(data) + 4,
                   bytes.begin() + static_cast<long>(data) + 4);
  const Image back = decode_bmp(bytes);
  EXPECT_EQ(back.pixels(0, 0), 10.0);
  EXPECT_EQ(back.pixels(1, 0), 200.0);
}

TEST(Bmp, RejectsMalformedInput) {
  EXPECT_THROW(decode_bmp({'P', 'N', 'G'}), IoError);
  std::vector<unsigned char> bytes = encode_bmp(Image(2, 2, 5.0), 8);
  std::vector<unsigned char> compressed = bytes;
  compressed[30] = 1;
  EXPECT_THROW(decode_bmp(compressed), IoError);
  std::vector<unsigned char> truncated(bytes.begin(), bytes.end() - 3);
  EXPECT_THROW(decode_bmp(truncated), IoError);
  std::vector<unsigned char> sixteen = bytes;
  sixteen[28] = 16;
  EXPECT_THROW(decode_bmp(sixteen), IoError);
  EXPECT_THROW(load_grayscale("/nonexistent/image.bmp"), IoError);
}

TEST(Bmp, SaveAndLoadFile) {
  const auto path = std::filesystem::temp_directory_path() / "csrecon_test_roundtrip.bmp";
  const Image img = random_image(6, 6, 7);
  save_bmp(path, img, 8);
  EXPECT_TRUE(load_grayscale(path).pixels == img.pixels);
  std::filesystem::remove(path);
}

TEST(Algorithm, NamesRoundTrip) {
  for (Algorithm a : kAllAlgorithms) EXPECT_EQ(parse_algorithm(to_string(a)), a);
  EXPECT_EQ(parse_algorithm("tv"), Algorithm::Tv);
  EXPECT_EQ(parse_algorithm("Gradient"), Algorithm::Gradient);
  EXPECT_THROW(parse_algorithm("lasso"), InvalidArgument);
}

class FullData : public ::testing::TestWithParam<Algorithm> {};

TEST_P(FullData, NearLosslessWithEveryPixel) {
  const Image img = synthetic_image(40, 48);
  ReconConfig config;
  config.block_size = 32;
  config.omp.sparsity_ratio = 1.0;  // with M = N a full-rank fit needs every atom
  const ReconResult r = reconstruct_image(img, make_mask(40, 48, 1.0, 1), GetParam(), config);
  EXPECT_GE(r.report.psnr_db, 50.0) << to_string(GetParam());
  EXPECT_EQ(r.report.blocks_failed, 0);
}

INSTANTIATE_TEST_SUITE_P(AllAlgorithms, FullData, ::testing::ValuesIn(kAllAlgorithms),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(ReconstructImage, ConstantImageIsRecoveredByTvAtLowTheta) {
  const Image img(64, 64, 137.0);
  const ReconResult r = reconstruct_image(img, make_mask(64, 64, 0.1, 2), Algorithm::Tv, ReconConfig{});
  EXPECT_GE(r.report.psnr_db, 50.0);
}

TEST(ReconstructImage, AvailablePixelsAreKeptBySampleConsistentSolvers) {
  const Image img = synthetic_image(32, 32);
  const PixelMask mask = make_mask(32, 32, 0.5, 3);
  ReconConfig config;
  config.block_size = 16;
  for (Algorithm a : {Algorithm::Tv, Algorithm::Gradient}) {
    const ReconResult r = reconstruct_image(img, mask, a, config);
    double worst = 0.0;
    for (Index i = 0; i < 32; ++i) {
      for (Index j = 0; j < 32; ++j) {
        if (mask.at(i, j)) worst = std::max(worst, std::abs(r.image.pixels(i, j) - img.pixels(i, j)));
      }
    }
    EXPECT_LE(worst, a == Algorithm::Gradient ? 0.0 : 1e-4) << to_string(a);
  }
}

TEST(ReconstructImage, DeterministicAcrossRunsAndWorkerCounts) {
  const Image img = synthetic_image(40, 40);
  const PixelMask mask = make_mask(40, 40, 0.4, 5);
  ReconConfig config;
  config.block_size = 16;
  for (Algorithm a : kAllAlgorithms) {
    const ReconResult one = reconstruct_image(img, mask, a, config, 1);
    const ReconResult three = reconstruct_image(img, mask, a, config, 3);
    EXPECT_TRUE(one.image.pixels == three.image.pixels) << to_string(a);
    EXPECT_EQ(one.report.psnr_db, three.report.psnr_db);
    ASSERT_EQ(one.report.blocks.size(), three.report.blocks.size());
    for (std::size_t k = 0; k < one.report.blocks.size(); ++k) {
      EXPECT_EQ(one.report.blocks[k].iterations, three.report.blocks[k].iterations);
      EXPECT_EQ(one.report.blocks[k].realized_theta, three.report.blocks[k].realized_theta);
    }
  }
}

TEST(ReconstructImage, BlocksWithoutSamplesFallBackToTheMean) {
  const Image img = random_image(8, 8, 9);
  const PixelMask mask = make_mask(8, 8, 0.1, 1);
  ReconConfig config;
  config.block_size = 2;
  const ReconResult r = reconstruct_image(img, mask, Algorithm::Tv, config);
  double sum = 0.0;
  for (Index i = 0; i < 8; ++i) {
    for (Index j = 0; j < 8; ++j) sum += mask.at(i, j) ? img.pixels(i, j) : 0.0;
  }
  const double mean = sum / double(mask.count());
  int empty = 0;
  for (const BlockStats& s : r.report.blocks) {
    if (s.realized_theta > 0.0) continue;
    ++empty;
    EXPECT_TRUE(s.failed);
    EXPECT_FALSE(s.message.empty());
    const Index row = 2 * (s.index / 4), col = 2 * (s.index % 4);
    EXPECT_NEAR(r.image.pixels(row, col), mean, 1e-12);
  }
  EXPECT_GT(empty, 0);
  EXPECT_EQ(r.report.blocks_failed, empty);
  EXPECT_TRUE(std::isfinite(r.report.psnr_db));
}

TEST(ReconstructImage, RejectsMismatchedMask) {
  EXPECT_THROW(reconstruct_image(Image(8, 8), make_mask(8, 9, 0.5, 1), Algorithm::Omp, ReconConfig{}),
               DimensionError);
}

TEST(ReconstructImage, TvWithDftMeasurementModel) {
  Image img(32, 32, 60.0);
  img.pixels.block(8, 8, 16, 12).setConstant(180.0);
  ReconConfig config;
  config.block_size = 32;
  config.tv.model = MeasurementModel::RandomDft;
  config.tv.dft_measurements = 400;
  const ReconResult r = reconstruct_image(img, make_mask(32, 32, 0.5, 1), Algorithm::Tv, config);
  EXPECT_GE(r.report.psnr_db, 40.0);
}

TEST(ReconstructImage, ReportFields) {
  const Image img = synthetic_image(20, 20);
  ReconConfig config;
  config.block_size = 8;
  const ReconResult r = reconstruct_image(img, make_mask(20, 20, 0.5, 4), Algorithm::Omp, config);
  EXPECT_EQ(r.report.algorithm, Algorithm::Omp);
  EXPECT_EQ(r.report.theta, 0.5);
  EXPECT_EQ(r.report.seed, 4u);
  EXPECT_EQ(r.report.blocks.size(), 9u);
  EXPECT_DOUBLE_EQ(r.report.realized_theta, 0.5);
  EXPECT_GE(r.report.wall_time_s, 0.0);
  EXPECT_GE(r.image.pixels.minCoeff(), 0.0);
  EXPECT_LE(r.image.pixels.maxCoeff(), 255.0);
}
