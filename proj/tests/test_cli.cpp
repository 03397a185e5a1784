#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"

namespace fs = std::filesystem;
using namespace csrecon;
using namespace testing_helpers;

namespace {

struct CliRun {
  int status = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("csrecon_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    save_bmp(dir_ / "in.bmp", synthetic_image(32, 32), 8);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliRun run(const std::string& args) const {
    const std::string cmd = std::string(CSRECON_CLI_PATH) + " " + args + " > " + (dir_ / "out.txt").string() +
                            " 2> " + (dir_ / "err.txt").string();
    const int raw = std::system(cmd.c_str());
    CliRun r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(dir_ / "out.txt");
    r.err = slurp(dir_ / "err.txt");
    return r;
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, ReconstructFullDataTvPrintsHighPsnr) {
  const CliRun r = run("reconstruct --input " + path("in.bmp") + " --theta 1.0 --algo tv --out " + path("o.bmp"));
  ASSERT_EQ(r.status, 0) << r.err;
  ASSERT_EQ(r.out.rfind("PSNR ", 0), 0u) << r.out;
  const std::string value = r.out.substr(5, r.out.find(' ', 5) - 5);
  EXPECT_TRUE(value == "inf" || std::stod(value) >= 50.0) << r.out;
  EXPECT_TRUE(fs::exists(path("o.bmp")));
  const auto csv = slurp(path("o.csv"));
  EXPECT_EQ(csv.rfind("theta,algorithm,seed,psnr_dB,blocks_failed,wall_time_s,config_fingerprint\n1,TV,1,", 0), 0u)
      << csv;
}

TEST_F(Cli, OutputKeepsTheInputBitDepth) {
  save_bmp(path("colour.bmp"), synthetic_image(16, 16), 24);
  const CliRun r = run("reconstruct --input " + path("colour.bmp") + " --theta 0.5 --algo omp --out " + path("o.bmp"));
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(load_grayscale(path("o.bmp")).source_bits, 24);
}

TEST_F(Cli, MissingInputIsAUsageError) {
  const CliRun r = run("reconstruct --theta 0.5 --algo tv");
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("--input"), std::string::npos);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST_F(Cli, ThetaOutOfRangeIsAUsageError) {
  const CliRun r = run("reconstruct --input " + path("in.bmp") + " --theta 0 --algo tv");
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("theta must be in (0,1]"), std::string::npos);
}

TEST_F(Cli, UnknownAlgorithmIsAUsageError) {
  EXPECT_EQ(run("reconstruct --input " + path("in.bmp") + " --theta 0.5 --algo lasso").status, 2);
  EXPECT_EQ(run("").status, 2);
}

TEST_F(Cli, UnreadableInputIsARuntimeError) {
  const CliRun r = run("reconstruct --input " + path("missing.bmp") + " --theta 0.5 --algo tv");
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.err.find("cannot open"), std::string::npos);
}

TEST_F(Cli, BenchmarkWritesCsvAndTable) {
  std::ofstream(path("cfg.txt")) << "input = " << path("in.bmp") << "\noutput_dir = " << path("res")
                                 << "\ntheta = 0.5\nalgorithms = OMP\nseeds = 1\nblock_size = 16\n";
  const CliRun r = run("benchmark --config " + path("cfg.txt") + " --save-images");
  ASSERT_EQ(r.status, 0) << r.err;
  const auto csv = slurp(path("res/results.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  EXPECT_TRUE(fs::exists(path("res/table.txt")));
  EXPECT_TRUE(fs::exists(path("res/recon_theta0.50_OMP_seed1.bmp")));
  EXPECT_NE(r.err.find("[1/1] theta 0.5 OMP seed 1"), std::string::npos);
  EXPECT_NE(r.out.find("OMP"), std::string::npos);
}

TEST_F(Cli, BenchmarkConfigErrors) {
  std::ofstream(path("bad.txt")) << "input = " << path("in.bmp") << "\nthetas = 0.5\n";
  const CliRun bad = run("benchmark --config " + path("bad.txt"));
  EXPECT_EQ(bad.status, 2);
  EXPECT_NE(bad.err.find("line 2"), std::string::npos);
  EXPECT_EQ(run("benchmark --config " + path("nope.txt")).status, 1);
  EXPECT_EQ(run("benchmark").status, 2);
}

TEST_F(Cli, PrintedDefaultConfigParsesBackToTheDefaults) {
  const CliRun r = run("benchmark --print-default-config");
  ASSERT_EQ(r.status, 0);
  EXPECT_EQ(config_fingerprint(parse_config(r.out)), config_fingerprint(BenchmarkConfig{}));
}

TEST_F(Cli, TraceWritesOneRowPerIteration) {
  const CliRun r = run("trace --input " + path("in.bmp") + " --theta 0.5 --algo gradient --max-iterations 1 --out " +
                    path("t.csv"));
  ASSERT_EQ(r.status, 0) << r.err;
  const auto csv = slurp(path("t.csv"));
  EXPECT_EQ(csv.rfind("iteration,delta,beta,eps_db,mu\n1,", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
}

TEST_F(Cli, TraceOfConvergentRunEndsBelowTarget) {
  std::ofstream(path("cfg.txt")) << "block_size = 16\n";
  const CliRun r = run("trace --input " + path("in.bmp") + " --theta 0.7 --algo gradient --block 1 --config " +
                    path("cfg.txt") + " --out " + path("t.csv"));
  ASSERT_EQ(r.status, 0) << r.err;
  ASSERT_NE(r.out.find(", converged"), std::string::npos) << r.out;
  std::istringstream in(slurp(path("t.csv")));
  std::string line, last;
  std::getline(in, line);
  while (std::getline(in, line)) last = line;
  std::vector<std::string> cols;
  std::stringstream ss(last);
  for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
  ASSERT_EQ(cols.size(), 5u);
  EXPECT_LE(std::stod(cols[3]), -60.0);
}

TEST_F(Cli, TraceRejectsOtherAlgorithmsAndBadBlocks) {
  EXPECT_EQ(run("trace --input " + path("in.bmp") + " --theta 0.5 --algo tv").status, 2);
  EXPECT_EQ(run("trace --input " + path("in.bmp") + " --theta 0.5 --algo gradient --block 99").status, 2);
}
