#include <gtest/gtest.h>

#include <set>

#include "csrecon/config.hpp"

using namespace csrecon;

TEST(Config, DefaultsMatchTheBenchmarkProtocol) {
  const BenchmarkConfig c;
  EXPECT_EQ(c.thetas, (std::vector<double>{0.1, 0.3, 0.5, 0.7, 0.9}));
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(c.algorithms.size(), 4u);
  EXPECT_EQ(c.recon.block_size, 64);
  EXPECT_EQ(c.recon.tv.model, MeasurementModel::PixelMask);
  EXPECT_EQ(c.recon.omp.basis, TransformKind::Dct);
  EXPECT_NO_THROW(validate_config(c));
}

TEST(Config, SerializeParseRoundTrip) {
  BenchmarkConfig c;
  c.input = "data/some image.bmp";
  c.thetas = {0.25, 1.0};
  c.algorithms = {Algorithm::Tv, Algorithm::Omp};
  c.seeds = {7, 18446744073709551615ULL};
  c.recon.bp.settings.cg_tol = 1.0 / 3.0;
  c.recon.gradient.unnormalized_transform = false;
  c.recon.tv.model = MeasurementModel::RandomDft;
  const std::string text = serialize_config(c);
  const BenchmarkConfig back = parse_config(text);
  EXPECT_EQ(serialize_config(back), text);
  EXPECT_EQ(back.recon.bp.settings.cg_tol, 1.0 / 3.0);
  EXPECT_EQ(back.seeds, c.seeds);
  EXPECT_EQ(config_fingerprint(back), config_fingerprint(c));
}

TEST(Config, CommentsBlankLinesAndPartialFiles) {
  const BenchmarkConfig c = parse_config("# sweep\n\n  theta = 0.5   # only one\nalgorithms = omp\nseeds = 4\n");
  EXPECT_EQ(c.thetas, (std::vector<double>{0.5}));
  EXPECT_EQ(c.algorithms, (std::vector<Algorithm>{Algorithm::Omp}));
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{4}));
  EXPECT_EQ(c.recon.block_size, 64);
}

TEST(Config, ErrorsNameTheLine) {
  const auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const InvalidArgument& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("theta = 0.5\nbogus = 1\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("theta = 0.5\nbogus = 1\n").find("unknown key 'bogus'"), std::string::npos);
  EXPECT_NE(message("seeds = 1\nseeds = 2\n").find("duplicate"), std::string::npos);
  EXPECT_NE(message("block_size\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("block_size = 6x4\n").find("block_size"), std::string::npos);
  EXPECT_NE(message("theta = 0, 0.5\n").find("theta must be in (0,1]"), std::string::npos);
  EXPECT_NE(message("algorithms = \n").find("at least one algorithm"), std::string::npos);
  EXPECT_NE(message("omp.basis = haar\n").find("unknown transform"), std::string::npos);
  EXPECT_NE(message("gradient.step_reduction_factor = 2\n").find("step_reduction_factor"), std::string::npos);
}

TEST(Config, FingerprintIsStableAndSensitiveToEveryField) {
  const BenchmarkConfig base;
  const std::string fp = config_fingerprint(base);
  EXPECT_EQ(fp.size(), 16u);
  EXPECT_EQ(fp.find_first_not_of("0123456789abcdef"), std::string::npos);
  EXPECT_EQ(config_fingerprint(BenchmarkConfig{}), fp);

  // Change each key in turn to a different valid value.
  const std::vector<std::pair<std::string, std::string>> edits = {
      {"input", "x.bmp"},
      {"output_dir", "elsewhere"},
      {"theta", "0.1, 0.3"},
      {"algorithms", "TV"},
      {"seeds", "1, 2"},
      {"block_size", "32"},
      {"omp.basis", "dft"},
      {"omp.sparsity_ratio", "0.3"},
      {"omp.residual_tol", "1e-7"},
      {"bp.basis", "dft"},
      {"bp.noise_level", "0.5"},
      {"bp.max_iterations", "50"},
      {"bp.duality_gap_tol", "1e-5"},
      {"bp.constraint_tol", "1e-7"},
      {"bp.stall_iterations", "5"},
      {"bp.barrier_growth", "5"},
      {"bp.newton_max_iterations", "40"},
      {"bp.cg_tol", "1e-9"},
      {"bp.cg_max_iterations", "300"},
      {"tv.model", "dft"},
      {"tv.dft_measurements", "1000"},
      {"tv.dft_epsilon", "0.01"},
      {"tv.epsilon", "0.5"},
      {"tv.tolerance", "1e-3"},
      {"tv.max_outer_iterations", "8"},
      {"tv.max_newton_iterations", "30"},
      {"tv.barrier_growth", "5"},
      {"tv.newton_tol", "1e-5"},
      {"tv.cg_tol", "1e-7"},
      {"tv.cg_max_iterations", "100"},
      {"gradient.basis", "dft"},
      {"gradient.unnormalized_transform", "false"},
      {"gradient.step_reduction_factor", "0.5"},
      {"gradient.angle_threshold_rad", "3"},
      {"gradient.target_error_db", "-50"},
      {"gradient.max_iterations", "100"},
  };
  std::set<std::string> keys, prints{fp};
  for (const auto& [key, value] : edits) {
    keys.insert(key);
    const BenchmarkConfig changed = parse_config(key + " = " + value + "\n");
    EXPECT_TRUE(prints.insert(config_fingerprint(changed)).second) << key;
  }
  // Every serialized key is covered above.
  const std::string text = serialize_config(base);
  std::size_t lines = 0;
  for (std::size_t at = 0; at < text.size(); at = text.find('\n', at) + 1) {
    const std::string key = text.substr(at, text.find(" = ", at) - at);
    EXPECT_TRUE(keys.count(key)) << key;
    ++lines;
  }
  EXPECT_EQ(lines, edits.size());
}

TEST(Config, FormatNumberRoundTrips) {
  for (double v : {0.1, 1e-300, 123456789.125, -0.0, 2.0 / 3.0}) {
    EXPECT_EQ(detail::parse_double(format_number(v)), v);
  }
  EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_number(0.5), "0.5");
}
