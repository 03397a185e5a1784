#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "csrecon/bp.hpp"
#include "csrecon/dictionary.hpp"
#include "csrecon/error.hpp"
#include "csrecon/gradient.hpp"
#include "csrecon/image.hpp"
#include "csrecon/omp.hpp"
#include "csrecon/operators.hpp"
#include "csrecon/random.hpp"
#include "csrecon/transforms.hpp"
#include "csrecon/tv.hpp"

namespace csrecon {

// ---------------------------------------------------------------------------
// Masks and tiling

/// Available-pixel mask; available(i, j) is true where the pixel is observed.
struct PixelMask {
  Index height = 0;
  Index width = 0;
  std::vector<std::uint8_t> available;  // row-major
  double theta = 0.0;                   // requested fraction
  std::uint64_t seed = 0;

  bool at(Index i, Index j) const { return available[static_cast<std::size_t>(i * width + j)] != 0; }
  Index count() const { return static_cast<Index>(std::count(available.begin(), available.end(), 1)); }
  double realized_theta() const {
    return available.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(available.size());
  }
};

/// Marks exactly round(theta * H * W) pixels available, uniformly without
/// replacement.
inline PixelMask make_mask(Index height, Index width, double theta, std::uint64_t seed) {
  if (!(theta > 0.0 && theta <= 1.0)) throw InvalidArgument("theta must be in (0,1]");
  if (height < 1 || width < 1) throw InvalidArgument("make_mask: image dimensions must be positive");
  const Index total = height * width;
  const auto count = static_cast<Index>(std::llround(theta * static_cast<double>(total)));
  PixelMask mask{height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(total), 0), theta, seed};
  Rng rng(seed);
  for (std::int64_t p : sample_without_replacement(total, count, rng)) mask.available[static_cast<std::size_t>(p)] = 1;
  return mask;
}

struct BlockPlacement {
  Index row = 0;     // top-left pixel in the image
  Index col = 0;
  Index height = 0;  // extent of real (non-padded) pixels
  Index width = 0;
};

struct BlockTiling {
  Index image_height = 0;
  Index image_width = 0;
  Index block_size = 0;
  Index grid_rows = 0;
  Index grid_cols = 0;
  std::vector<BlockPlacement> placements;  // row-major over the grid
};

inline BlockTiling make_tiling(Index height, Index width, Index block_size) {
  if (block_size < 1) throw InvalidArgument("block size must be at least 1");
  if (height < 1 || width < 1) throw InvalidArgument("image dimensions must be positive");
  BlockTiling t{height, width, block_size, (height + block_size - 1) / block_size,
                (width + block_size - 1) / block_size, {}};
  for (Index gr = 0; gr < t.grid_rows; ++gr) {
    for (Index gc = 0; gc < t.grid_cols; ++gc) {
      const Index r = gr * block_size, c = gc * block_size;
      t.placements.push_back({r, c, std::min(block_size, height - r), std::min(block_size, width - c)});
    }
  }
  return t;
}

/// Cuts an image into B x B blocks in row-major order. Blocks that overhang
/// the image are filled by replicating the last real row / column.
inline std::vector<RowMatrix<double>> partition_blocks(const RowMatrix<double>& image, const BlockTiling& tiling) {
  if (image.rows() != tiling.image_height || image.cols() != tiling.image_width) {
    throw DimensionError("partition_blocks: tiling does not match image");
  }
  const Index b = tiling.block_size;
  std::vector<RowMatrix<double>> blocks;
  blocks.reserve(tiling.placements.size());
  for (const BlockPlacement& p : tiling.placements) {
    RowMatrix<double> block(b, b);
    for (Index i = 0; i < b; ++i) {
      const Index src_r = p.row + std::min(i, p.height - 1);
      for (Index j = 0; j < b; ++j) block(i, j) = image(src_r, p.col + std::min(j, p.width - 1));
    }
    blocks.push_back(std::move(block));
  }
  return blocks;
}

/// Inverse of partition_blocks: writes the real region of every block back.
inline RowMatrix<double> reassemble(const std::vector<RowMatrix<double>>& blocks, const BlockTiling& tiling) {
  if (blocks.size() != tiling.placements.size()) throw DimensionError("reassemble: block count mismatch");
  RowMatrix<double> image(tiling.image_height, tiling.image_width);
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const BlockPlacement& p = tiling.placements[k];
    image.block(p.row, p.col, p.height, p.width) = blocks[k].topLeftCorner(p.height, p.width);
  }
  return image;
}

inline RowMatrix<double> mask_matrix(const PixelMask& mask) {
  RowMatrix<double> m(mask.height, mask.width);
  for (Index i = 0; i < mask.height; ++i) {
    for (Index j = 0; j < mask.width; ++j) m(i, j) = mask.at(i, j) ? 1.0 : 0.0;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Configuration

enum class Algorithm { Bp, Omp, Tv, Gradient };

inline constexpr Algorithm kAllAlgorithms[] = {Algorithm::Bp, Algorithm::Omp, Algorithm::Tv, Algorithm::Gradient};

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Bp: return "BP";
    case Algorithm::Omp: return "OMP";
    case Algorithm::Tv: return "TV";
    case Algorithm::Gradient: return "GRADIENT";
  }
  return "?";
}

inline Algorithm parse_algorithm(std::string_view text) {
  std::string upper(text);
  for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (Algorithm a : kAllAlgorithms) {
    if (upper == to_string(a)) return a;
  }
  throw InvalidArgument("unknown algorithm '" + std::string(text) + "' (expected bp, omp, tv or gradient)");
}

/// How a block is measured: selected pixels, or random rows of its 2D DFT.
enum class MeasurementModel { PixelMask, RandomDft };

inline std::string_view to_string(MeasurementModel m) { return m == MeasurementModel::PixelMask ? "pixel" : "dft"; }

inline MeasurementModel parse_measurement_model(std::string_view text) {
  if (text == "pixel") return MeasurementModel::PixelMask;
  if (text == "dft") return MeasurementModel::RandomDft;
  throw InvalidArgument("unknown measurement model '" + std::string(text) + "' (expected pixel or dft)");
}

struct OmpOptions {
  TransformKind basis = TransformKind::Dct;
  /// K = ceil(sparsity_ratio * M) atoms per block.
  double sparsity_ratio = 0.25;
  double residual_tol = 1e-6;
};

struct BpOptions {
  TransformKind basis = TransformKind::Dct;
  /// Zero solves equality-constrained BP; positive values solve BPDN.
  double noise_level = 0.0;
  BpSettings settings{};
};

struct TvOptions {
  MeasurementModel model = MeasurementModel::PixelMask;
  Index dft_measurements = 1500;
  /// Data-constraint radius used with the DFT model.
  double dft_epsilon = 1e-3;
  /// settings.epsilon applies to the pixel model.
  TvSettings settings{};
};

struct GradientOptions {
  TransformKind basis = TransformKind::Dct;
  /// Multiply the orthonormal transform by sqrt(N) (the unnormalized DCT/DFT
  /// convention). With the orthonormal scaling the fixed gradient step is
  /// sqrt(N) times too small and the iteration stalls.
  bool unnormalized_transform = true;
  GradientSettings settings{};
};

struct ReconConfig {
  Index block_size = 64;
  OmpOptions omp{};
  BpOptions bp{};
  TvOptions tv{};
  GradientOptions gradient{};
};

// ---------------------------------------------------------------------------
// Reports

struct BlockStats {
  Index index = 0;
  /// Fraction of the block's real pixels that are available.
  double realized_theta = 0.0;
  int iterations = 0;
  bool converged = false;
  bool failed = false;
  std::string message;
};

struct ReconReport {
  Algorithm algorithm = Algorithm::Tv;
  double theta = 0.0;
  double realized_theta = 0.0;
  double psnr_db = 0.0;  // +inf for a perfect reconstruction
  std::vector<BlockStats> blocks;
  int blocks_failed = 0;
  double wall_time_s = 0.0;
  std::uint64_t seed = 0;
  std::string config_fingerprint;
};

struct ReconResult {
  Image image;
  ReconReport report;
};

// ---------------------------------------------------------------------------
// Workers

/// Worker cap: CS_RECON_THREADS if set to a positive integer, otherwise the
/// hardware concurrency.
inline unsigned worker_count() {
  if (const char* env = std::getenv("CS_RECON_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, count) on up to `workers` threads.
template <class Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
  workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
}

// ---------------------------------------------------------------------------
// Per-block solvers

struct BlockOutcome {
  RowMatrix<double> block;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline Eigen::VectorXd gather(const RowMatrix<double>& block, const std::vector<Index>& samples) {
  Eigen::VectorXd y(static_cast<Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) y(static_cast<Index>(i)) = block.data()[samples[i]];
  return y;
}

template <class Scalar>
RowMatrix<double> real_block(const RowMatrix<Scalar>& block) {
  if constexpr (std::is_same_v<Scalar, double>) {
    return block;
  } else {
    return block.real();
  }
}

template <class Scalar>
BlockOutcome omp_block(const RowMatrix<double>& truth, const std::vector<Index>& samples, const OmpOptions& opt,
                       Index b) {
  const Eigen::VectorXd y = gather(truth, samples);
  BlockDictionary<Scalar> dict(SeparableTransform<Scalar>(opt.basis, b, b), samples, true);
  const auto m = static_cast<double>(samples.size());
  const auto k = std::clamp<Index>(static_cast<Index>(std::ceil(opt.sparsity_ratio * m)), 1,
                                   static_cast<Index>(samples.size()));
  const SparseSolution<Scalar> sol = omp(Vector<Scalar>(y.cast<Scalar>()), dict, StopRule{k, opt.residual_tol});
  Vector<Scalar> coefficients = sol.coefficients;
  for (Index i = 0; i < coefficients.size(); ++i) {
    const double norm = dict.column_norms()(i);
    coefficients(i) = norm > 0.0 ? coefficients(i) / Scalar(norm) : Scalar(0);
  }
  const RowMatrix<Scalar> image = dict.transform().inverse(unflatten<Scalar>(coefficients, b, b));
  return {real_block<Scalar>(image), sol.iterations, true};
}

inline BlockOutcome bp_block(const RowMatrix<double>& truth, const std::vector<Index>& samples, const BpOptions& opt,
                             Index b) {
  const Eigen::VectorXd y = gather(truth, samples);
  const auto solve = [&](const auto& op, const Eigen::VectorXd& rhs) {
    return opt.noise_level > 0.0 ? bpdn(op, rhs, opt.noise_level, opt.settings)
                                 : basis_pursuit(op, rhs, opt.settings);
  };
  if (opt.basis == TransformKind::Dct) {
    const BlockDictionary<double> dict(SeparableTransform<double>(TransformKind::Dct, b, b), samples, false);
    const BpResult r = solve(dict, y);
    return {dict.transform().inverse(unflatten<double>(r.x, b, b)), r.iterations, r.converged};
  }
  const BlockDictionary<Complex> dict(SeparableTransform<Complex>(TransformKind::Dft, b, b), samples, false);
  const ComplexAsReal<BlockDictionary<Complex>> op(dict);
  const BpResult r = solve(op, stack_real(Eigen::VectorXcd(y.cast<Complex>())));
  const Eigen::VectorXcd x = unstack_complex(r.x);
  return {dict.transform().inverse(unflatten<Complex>(x, b, b)).real(), r.iterations, r.converged};
}

inline BlockOutcome tv_block(const RowMatrix<double>& truth, const std::vector<Index>& samples, const TvOptions& opt,
                             Index b, std::uint64_t block_seed) {
  TvResult r;
  if (opt.model == MeasurementModel::PixelMask) {
    const SelectionMap op(b * b, samples);
    r = tv_reconstruct(op, gather(truth, samples), b, b, opt.settings);
  } else {
    const Index m = std::min(opt.dft_measurements, b * b);
    const PartialDftMap op(b, b, draw_frequency_selector(b * b, m, block_seed));
    TvSettings settings = opt.settings;
    settings.epsilon = opt.dft_epsilon;
    r = tv_reconstruct(op, Eigen::VectorXd(op.apply(flatten<double>(truth))), b, b, settings);
  }
  return {std::move(r.block), r.newton_iterations, r.converged};
}

inline GradientResult gradient_solve(const RowMatrix<double>& truth, const std::vector<Index>& samples,
                                     const GradientOptions& opt, Index b) {
  const Eigen::VectorXd f = gather(truth, samples);
  const double scale = opt.unnormalized_transform ? static_cast<double>(b) : 1.0;  // sqrt(b * b)
  if (opt.basis == TransformKind::Dct) {
    return reconstruct_gradient(f, samples,
                                FlattenedTransform<double>(SeparableTransform<double>(TransformKind::Dct, b, b), scale),
                                opt.settings);
  }
  return reconstruct_gradient(
      f, samples, FlattenedTransform<Complex>(SeparableTransform<Complex>(TransformKind::Dft, b, b), scale),
      opt.settings);
}

inline BlockOutcome gradient_block(const RowMatrix<double>& truth, const std::vector<Index>& samples,
                                   const GradientOptions& opt, Index b) {
  GradientResult r = gradient_solve(truth, samples, opt, b);
  return BlockOutcome{unflatten<double>(r.estimate, b, b), r.iterations, r.converged};
}

inline std::vector<Index> block_samples(const RowMatrix<double>& mask_block) {
  std::vector<Index> samples;
  for (Index p = 0; p < mask_block.size(); ++p) {
    if (mask_block.data()[p] != 0.0) samples.push_back(p);
  }
  return samples;
}

}  // namespace detail

/// Reconstructs one padded B x B block from the pixels listed in `samples`
/// (row-major positions inside the block). `truth` supplies the measured
/// values and, for the DFT model, the block being sensed.
inline BlockOutcome reconstruct_block(const RowMatrix<double>& truth, const std::vector<Index>& samples,
                                      Algorithm algorithm, const ReconConfig& config, std::uint64_t block_seed) {
  const Index b = truth.rows();
  if (truth.cols() != b) throw DimensionError("reconstruct_block: blocks must be square");
  const bool needs_samples = !(algorithm == Algorithm::Tv && config.tv.model == MeasurementModel::RandomDft);
  if (needs_samples && samples.empty()) throw DegenerateInputError("block has no available pixels");
  switch (algorithm) {
    case Algorithm::Omp:
      return config.omp.basis == TransformKind::Dct ? detail::omp_block<double>(truth, samples, config.omp, b)
                                                    : detail::omp_block<Complex>(truth, samples, config.omp, b);
    case Algorithm::Bp: return detail::bp_block(truth, samples, config.bp, b);
    case Algorithm::Tv: return detail::tv_block(truth, samples, config.tv, b, block_seed);
    case Algorithm::Gradient: return detail::gradient_block(truth, samples, config.gradient, b);
  }
  throw InvalidArgument("reconstruct_block: unknown algorithm");
}

/// Masks, tiles and reconstructs an image block by block, then clamps to
/// [0, 255] and scores against the original. A block whose solver throws or
/// returns non-finite values is filled with the mean of its available
/// pixels and counted as failed.
inline ReconResult reconstruct_image(const Image& image, const PixelMask& mask, Algorithm algorithm,
                                     const ReconConfig& config, unsigned workers = worker_count()) {
  if (mask.height != image.height() || mask.width != image.width()) {
    throw DimensionError("reconstruct_image: mask dimensions do not match the image");
  }
  const auto start = std::chrono::steady_clock::now();
  const BlockTiling tiling = make_tiling(image.height(), image.width(), config.block_size);
  const std::vector<RowMatrix<double>> truth = partition_blocks(image.pixels, tiling);
  const std::vector<RowMatrix<double>> mask_blocks = partition_blocks(mask_matrix(mask), tiling);

  double global_sum = 0.0;
  Index global_count = 0;
  for (Index i = 0; i < image.height(); ++i) {
    for (Index j = 0; j < image.width(); ++j) {
      if (mask.at(i, j)) {
        global_sum += image.pixels(i, j);
        ++global_count;
      }
    }
  }
  const double global_mean = global_count > 0 ? global_sum / static_cast<double>(global_count) : 0.0;

  const std::size_t count = tiling.placements.size();
  std::vector<RowMatrix<double>> out(count);
  std::vector<BlockStats> stats(count);
  parallel_for(count, workers, [&](std::size_t k) {
    const BlockPlacement& place = tiling.placements[k];
    const RowMatrix<double>& m = mask_blocks[k];
    const std::vector<Index> samples = detail::block_samples(m);
    BlockStats& s = stats[k];
    s.index = static_cast<Index>(k);
    s.realized_theta = m.topLeftCorner(place.height, place.width).mean();
    try {
      BlockOutcome o = reconstruct_block(truth[k], samples, algorithm, config, derive_seed(mask.seed, k));
      if (!o.block.allFinite()) throw Error("solver returned non-finite values");
      out[k] = std::move(o.block);
      s.iterations = o.iterations;
      s.converged = o.converged;
    } catch (const std::exception& e) {
      double fill = global_mean;
      if (!samples.empty()) fill = detail::gather(truth[k], samples).mean();
      out[k] = RowMatrix<double>::Constant(truth[k].rows(), truth[k].cols(), fill);
      s.failed = true;
      s.message = e.what();
    }
  });

  ReconResult result;
  result.image = clamp_pixels(Image(reassemble(out, tiling), image.source_bits));
  ReconReport& report = result.report;
  report.algorithm = algorithm;
  report.theta = mask.theta;
  report.realized_theta = mask.realized_theta();
  report.psnr_db = psnr(image, result.image);
  report.blocks = std::move(stats);
  report.blocks_failed = static_cast<int>(
      std::count_if(report.blocks.begin(), report.blocks.end(), [](const BlockStats& s) { return s.failed; }));
  report.seed = mask.seed;
  report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

/// Runs the gradient solver on block `block_index` (row-major over the tile
/// grid) of a masked image and returns the full result including the trace.
inline GradientResult trace_gradient_block(const Image& image, const PixelMask& mask, const ReconConfig& config,
                                           std::size_t block_index) {
  if (mask.height != image.height() || mask.width != image.width()) {
    throw DimensionError("trace_gradient_block: mask dimensions do not match the image");
  }
  const BlockTiling tiling = make_tiling(image.height(), image.width(), config.block_size);
  if (block_index >= tiling.placements.size()) {
    throw InvalidArgument("block index " + std::to_string(block_index) + " out of range (image has " +
                          std::to_string(tiling.placements.size()) + " blocks)");
  }
  const RowMatrix<double> truth = partition_blocks(image.pixels, tiling)[block_index];
  const std::vector<Index> samples = detail::block_samples(partition_blocks(mask_matrix(mask), tiling)[block_index]);
  if (samples.empty()) throw DegenerateInputError("block has no available pixels");
  return detail::gradient_solve(truth, samples, config.gradient, config.block_size);
}

}  // namespace csrecon
