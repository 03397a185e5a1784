// csrecon: reconstruct one masked image, run a PSNR benchmark, or export a
// gradient-solver trace.
//
// Exit status: 0 success, 1 runtime or I/O error, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "csrecon/csrecon.hpp"

namespace fs = std::filesystem;
using namespace csrecon;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Raised for flag values that parse but make no sense.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check_theta(double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw UsageError("theta must be in (0,1]");
}

BenchmarkConfig base_config(const std::string& path) {
  return path.empty() ? BenchmarkConfig{} : load_config(path);
}

std::string format_psnr(double db) {
  if (std::isinf(db)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", db);
  return buf;
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

struct ReconstructArgs {
  std::string input, out = "recon.bmp", report, config, algo;
  double theta = 0.0;
  std::uint64_t seed = 1;
};

int cmd_reconstruct(const ReconstructArgs& a) {
  check_theta(a.theta);
  BenchmarkConfig config = base_config(a.config);
  const Algorithm algorithm = parse_algorithm(a.algo);
  config.input = a.input;
  config.thetas = {a.theta};
  config.algorithms = {algorithm};
  config.seeds = {a.seed};
  config.output_dir = fs::path(a.out).parent_path().string();
  validate_config(config);

  const Image image = load_grayscale(a.input);
  const PixelMask mask = make_mask(image.height(), image.width(), a.theta, a.seed);
  const ReconResult r = reconstruct_image(image, mask, algorithm, config.recon);

  ensure_parent(a.out);
  save_bmp(a.out, r.image, image.source_bits);

  BenchmarkCell cell{a.theta, algorithm, a.seed, r.report.psnr_db, r.report.blocks_failed, r.report.wall_time_s,
                     config_fingerprint(config)};
  const fs::path report = a.report.empty() ? fs::path(a.out).replace_extension(".csv") : fs::path(a.report);
  ensure_parent(report);
  std::ofstream csv(report);
  if (!csv) throw IoError("cannot write report '" + report.string() + "'");
  write_csv(csv, {cell});

  std::cout << "PSNR " << format_psnr(r.report.psnr_db) << " dB (" << to_string(algorithm) << ", theta "
            << format_number(a.theta) << ", realized " << format_number(r.report.realized_theta) << ", seed "
            << a.seed << ", " << r.report.blocks_failed << " failed blocks)\n";
  for (const auto& s : r.report.blocks) {
    if (s.failed) std::cerr << "block " << s.index << " failed: " << s.message << '\n';
  }
  return kExitOk;
}

struct BenchmarkArgs {
  std::string config, input, output_dir;
  bool save_images = false;
  bool print_default = false;
};

int cmd_benchmark(const BenchmarkArgs& a) {
  if (a.print_default) {
    std::cout << serialize_config(BenchmarkConfig{});
    return kExitOk;
  }
  BenchmarkConfig config = base_config(a.config);
  if (!a.input.empty()) config.input = a.input;
  if (!a.output_dir.empty()) config.output_dir = a.output_dir;
  if (config.input.empty()) throw UsageError("no input image (set 'input' in the config or pass --input)");
  validate_config(config);
  const Image image = load_grayscale(config.input);

  const std::size_t total = config.thetas.size() * config.algorithms.size() * config.seeds.size();
  std::size_t done = 0;
  BenchmarkOptions options;
  options.save_images = a.save_images;
  options.on_cell = [&](const BenchmarkCell& c) {
    ++done;
    std::cerr << "[" << done << "/" << total << "] theta " << format_number(c.theta) << " " << to_string(c.algorithm)
              << " seed " << c.seed << ": ";
    if (c.error.empty()) {
      std::cerr << format_psnr(c.psnr_db) << " dB, " << c.blocks_failed << " failed blocks, "
                << format_number(std::round(c.wall_time_s * 100.0) / 100.0) << " s\n";
    } else {
      std::cerr << "error: " << c.error << '\n';
    }
  };
  const std::vector<BenchmarkCell> cells = run_benchmark(image, config, options);

  fs::create_directories(config.output_dir);
  const fs::path csv_path = fs::path(config.output_dir) / "results.csv";
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot write '" + csv_path.string() + "'");
  write_csv(csv, cells);

  const std::string table = render_table(config, cells);
  const fs::path table_path = fs::path(config.output_dir) / "table.txt";
  std::ofstream txt(table_path);
  if (!txt) throw IoError("cannot write '" + table_path.string() + "'");
  txt << table;
  std::cout << table;
  return kExitOk;
}

struct TraceArgs {
  std::string input, out = "trace.csv", config, algo;
  double theta = 0.0;
  std::uint64_t seed = 1;
  std::size_t block = 0;
  std::optional<int> max_iterations;
};

int cmd_trace(const TraceArgs& a) {
  if (parse_algorithm(a.algo) != Algorithm::Gradient) throw UsageError("trace supports only --algo gradient");
  check_theta(a.theta);
  BenchmarkConfig config = base_config(a.config);
  if (a.max_iterations) config.recon.gradient.settings.max_iterations = *a.max_iterations;
  validate_config(config);

  const Image image = load_grayscale(a.input);
  const PixelMask mask = make_mask(image.height(), image.width(), a.theta, a.seed);
  const GradientResult r = trace_gradient_block(image, mask, config.recon, a.block);

  ensure_parent(a.out);
  std::ofstream out(a.out);
  if (!out) throw IoError("cannot write trace '" + a.out + "'");
  write_gradient_trace(out, r.trace);
  std::cout << "block " << a.block << ": " << r.iterations << " iterations, " << r.reductions << " step reductions, "
            << (r.converged ? "converged" : "not converged");
  if (!r.trace.empty()) std::cout << ", final eps " << format_number(r.trace.back().eps_db) << " dB";
  std::cout << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compressive-sensing image reconstruction"};
  app.require_subcommand(1);

  ReconstructArgs rec;
  auto* reconstruct = app.add_subcommand("reconstruct", "Reconstruct one image from a random subset of its pixels");
  reconstruct->add_option("--input", rec.input, "Input BMP (8-bit paletted or 24-bit)")->required();
  reconstruct->add_option("--theta", rec.theta, "Fraction of available pixels, in (0,1]")->required();
  reconstruct->add_option("--algo", rec.algo, "BP, OMP, TV or GRADIENT")->required();
  reconstruct->add_option("--seed", rec.seed, "Mask seed")->capture_default_str();
  reconstruct->add_option("--out", rec.out, "Output BMP")->capture_default_str();
  reconstruct->add_option("--report", rec.report, "Report CSV (default: --out with a .csv extension)");
  reconstruct->add_option("--config", rec.config, "Key-value config file for solver settings");

  BenchmarkArgs bench;
  auto* benchmark = app.add_subcommand("benchmark", "Run every (theta, algorithm, seed) cell and tabulate PSNR");
  benchmark->add_option("--config", bench.config, "Key-value config file");
  benchmark->add_option("--input", bench.input, "Input BMP (overrides the config)");
  benchmark->add_option("--output-dir", bench.output_dir, "Output directory (overrides the config)");
  benchmark->add_flag("--save-images", bench.save_images, "Save each cell's reconstruction");
  benchmark->add_flag("--print-default-config", bench.print_default, "Print the default config and exit");

  TraceArgs tr;
  auto* trace = app.add_subcommand("trace", "Write the gradient solver's per-iteration trace for one block");
  trace->add_option("--input", tr.input, "Input BMP")->required();
  trace->add_option("--theta", tr.theta, "Fraction of available pixels, in (0,1]")->required();
  trace->add_option("--algo", tr.algo, "Must be GRADIENT")->required();
  trace->add_option("--seed", tr.seed, "Mask seed")->capture_default_str();
  trace->add_option("--block", tr.block, "Block index, row-major over the tile grid")->capture_default_str();
  trace->add_option("--out", tr.out, "Trace CSV")->capture_default_str();
  trace->add_option("--config", tr.config, "Key-value config file for solver settings");
  trace->add_option("--max-iterations", tr.max_iterations, "Override the iteration cap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const auto parsed = app.get_subcommands();
    std::cerr << (parsed.empty() ? app.help() : parsed.front()->help());
    return kExitUsage;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    if (active == reconstruct) return cmd_reconstruct(rec);
    if (active == benchmark) return cmd_benchmark(bench);
    return cmd_trace(tr);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << active->help();
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n\n" << active->help();
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
