#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "csrecon/config.hpp"
#include "csrecon/image.hpp"
#include "csrecon/pipeline.hpp"

namespace csrecon {

/// One (theta, algorithm, seed) cell of a benchmark.
struct BenchmarkCell {
  double theta = 0.0;
  Algorithm algorithm = Algorithm::Bp;
  std::uint64_t seed = 0;
  double psnr_db = std::numeric_limits<double>::quiet_NaN();
  int blocks_failed = 0;
  double wall_time_s = 0.0;
  std::string config_fingerprint;
  /// Empty unless the whole cell threw; the CSV then carries psnr "nan".
  std::string error;
};

inline constexpr const char* kCsvHeader = "theta,algorithm,seed,psnr_dB,blocks_failed,wall_time_s,config_fingerprint";

inline std::string csv_row(const BenchmarkCell& c) {
  return format_number(c.theta) + "," + std::string(to_string(c.algorithm)) + "," + std::to_string(c.seed) + "," +
         format_number(c.psnr_db) + "," + std::to_string(c.blocks_failed) + "," + format_number(c.wall_time_s) +
         "," + c.config_fingerprint;
}

inline void write_csv(std::ostream& out, const std::vector<BenchmarkCell>& cells) {
  out << kCsvHeader << '\n';
  for (const auto& c : cells) out << csv_row(c) << '\n';
}

/// Mean over seeds of finite and infinite PSNR values; NaN cells are skipped.
/// Returns NaN when no seed produced a value.
inline double mean_psnr(const std::vector<BenchmarkCell>& cells, double theta, Algorithm algorithm) {
  double sum = 0.0;
  int n = 0;
  for (const auto& c : cells) {
    if (c.theta != theta || c.algorithm != algorithm || std::isnan(c.psnr_db)) continue;
    sum += c.psnr_db;
    ++n;
  }
  return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

/// Rows are theta, columns are algorithms, cells are "%.2f" mean PSNR in dB.
inline std::string render_table(const BenchmarkConfig& config, const std::vector<BenchmarkCell>& cells) {
  constexpr int kWidth = 10;
  char buf[64];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-6s", "theta");
  out += buf;
  for (Algorithm a : config.algorithms) {
    std::snprintf(buf, sizeof buf, "%*s", kWidth, std::string(to_string(a)).c_str());
    out += buf;
  }
  out += "\n";
  for (double theta : config.thetas) {
    std::snprintf(buf, sizeof buf, "%-6.2f", theta);
    out += buf;
    for (Algorithm a : config.algorithms) {
      std::snprintf(buf, sizeof buf, "%*.2f", kWidth, mean_psnr(cells, theta, a));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

inline std::string cell_image_name(const BenchmarkCell& c) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "recon_theta%.2f_%s_seed%llu.bmp", c.theta, std::string(to_string(c.algorithm)).c_str(),
                static_cast<unsigned long long>(c.seed));
  return buf;
}

struct BenchmarkOptions {
  bool save_images = false;
  unsigned workers = 0;  // 0 reads CS_RECON_THREADS
  /// Called once per finished cell, in run order.
  std::function<void(const BenchmarkCell&)> on_cell;
};

/// Runs every cell theta-major, then algorithm, then seed. Cells run one
/// after another and each cell parallelizes over blocks. A cell that throws
/// is recorded with its error and the run continues.
inline std::vector<BenchmarkCell> run_benchmark(const Image& image, const BenchmarkConfig& config,
                                                const BenchmarkOptions& options = {}) {
  validate_config(config);
  const std::string fingerprint = config_fingerprint(config);
  const unsigned workers = options.workers > 0 ? options.workers : worker_count();
  if (options.save_images) std::filesystem::create_directories(config.output_dir);

  std::vector<BenchmarkCell> cells;
  for (double theta : config.thetas) {
    for (Algorithm algorithm : config.algorithms) {
      for (std::uint64_t seed : config.seeds) {
        BenchmarkCell cell{theta, algorithm, seed};
        cell.config_fingerprint = fingerprint;
        try {
          const PixelMask mask = make_mask(image.height(), image.width(), theta, seed);
          const ReconResult r = reconstruct_image(image, mask, algorithm, config.recon, workers);
          cell.psnr_db = r.report.psnr_db;
          cell.blocks_failed = r.report.blocks_failed;
          cell.wall_time_s = r.report.wall_time_s;
          if (options.save_images) {
            save_bmp(std::filesystem::path(config.output_dir) / cell_image_name(cell), r.image, image.source_bits);
          }
        } catch (const IoError&) {
          throw;
        } catch (const std::exception& e) {
          cell.error = e.what();
        }
        cells.push_back(cell);
        if (options.on_cell) options.on_cell(cells.back());
      }
    }
  }
  return cells;
}

}  // namespace csrecon
