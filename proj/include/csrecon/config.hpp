#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <vector>

#include "csrecon/error.hpp"
#include "csrecon/pipeline.hpp"

namespace csrecon {

/// Everything a benchmark run depends on. Serialized as flat `key = value`
/// lines; list values are comma separated.
struct BenchmarkConfig {
  std::string input;
  std::vector<double> thetas{0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<Algorithm> algorithms{Algorithm::Bp, Algorithm::Omp, Algorithm::Tv, Algorithm::Gradient};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string output_dir = "results";
  ReconConfig recon{};
};

/// Shortest text that parses back to the same double.
inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    const std::string_view item = trim(s.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

inline double parse_double(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InvalidArgument("expected a number, got '" + std::string(s) + "'");
  }
  return v;
}

inline long long parse_integer(std::string_view s) {
  s = trim(s);
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InvalidArgument("expected an integer, got '" + std::string(s) + "'");
  }
  return v;
}

inline std::uint64_t parse_unsigned(std::string_view s) {
  s = trim(s);
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InvalidArgument("expected a non-negative integer, got '" + std::string(s) + "'");
  }
  return v;
}

inline bool parse_bool(std::string_view s) {
  s = trim(s);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw InvalidArgument("expected true or false, got '" + std::string(s) + "'");
}

inline std::string bool_text(bool b) { return b ? "true" : "false"; }

template <class T, class Fn>
std::string join(const std::vector<T>& items, Fn&& text) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += ", ";
    out += text(items[i]);
  }
  return out;
}

struct ConfigField {
  std::string key;
  std::function<std::string(const BenchmarkConfig&)> get;
  std::function<void(BenchmarkConfig&, std::string_view)> set;
};

template <class Member>
ConfigField number_field(std::string key, Member member) {
  return {std::move(key),
          [member](const BenchmarkConfig& c) { return format_number(static_cast<double>(std::invoke(member, c))); },
          [member](BenchmarkConfig& c, std::string_view v) {
            auto& field = std::invoke(member, c);
            using T = std::remove_reference_t<decltype(field)>;
            if constexpr (std::is_floating_point_v<T>) {
              field = parse_double(v);
            } else {
              field = static_cast<T>(parse_integer(v));
            }
          }};
}

inline const std::vector<ConfigField>& config_fields() {
  using C = BenchmarkConfig;
  static const std::vector<ConfigField> fields = {
      {"input", [](const C& c) { return c.input; }, [](C& c, std::string_view v) { c.input = std::string(v); }},
      {"output_dir", [](const C& c) { return c.output_dir; },
       [](C& c, std::string_view v) { c.output_dir = std::string(v); }},
      {"theta", [](const C& c) { return join(c.thetas, format_number); },
       [](C& c, std::string_view v) {
         c.thetas.clear();
         for (auto item : split_list(v)) c.thetas.push_back(parse_double(item));
       }},
      {"algorithms",
       [](const C& c) { return join(c.algorithms, [](Algorithm a) { return std::string(to_string(a)); }); },
       [](C& c, std::string_view v) {
         c.algorithms.clear();
         for (auto item : split_list(v)) c.algorithms.push_back(parse_algorithm(item));
       }},
      {"seeds", [](const C& c) { return join(c.seeds, [](std::uint64_t s) { return std::to_string(s); }); },
       [](C& c, std::string_view v) {
         c.seeds.clear();
         for (auto item : split_list(v)) c.seeds.push_back(parse_unsigned(item));
       }},
      number_field("block_size", [](auto& c) -> auto& { return c.recon.block_size; }),

      {"omp.basis", [](const C& c) { return std::string(to_string(c.recon.omp.basis)); },
       [](C& c, std::string_view v) { c.recon.omp.basis = parse_transform_kind(trim(v)); }},
      number_field("omp.sparsity_ratio", [](auto& c) -> auto& { return c.recon.omp.sparsity_ratio; }),
      number_field("omp.residual_tol", [](auto& c) -> auto& { return c.recon.omp.residual_tol; }),

      {"bp.basis", [](const C& c) { return std::string(to_string(c.recon.bp.basis)); },
       [](C& c, std::string_view v) { c.recon.bp.basis = parse_transform_kind(trim(v)); }},
      number_field("bp.noise_level", [](auto& c) -> auto& { return c.recon.bp.noise_level; }),
      number_field("bp.max_iterations", [](auto& c) -> auto& { return c.recon.bp.settings.max_iterations; }),
      number_field("bp.duality_gap_tol", [](auto& c) -> auto& { return c.recon.bp.settings.duality_gap_tol; }),
      number_field("bp.constraint_tol", [](auto& c) -> auto& { return c.recon.bp.settings.constraint_tol; }),
      number_field("bp.stall_iterations", [](auto& c) -> auto& { return c.recon.bp.settings.stall_iterations; }),
      number_field("bp.barrier_growth", [](auto& c) -> auto& { return c.recon.bp.settings.barrier_growth; }),
      number_field("bp.newton_max_iterations",
                   [](auto& c) -> auto& { return c.recon.bp.settings.newton_max_iterations; }),
      number_field("bp.cg_tol", [](auto& c) -> auto& { return c.recon.bp.settings.cg_tol; }),
      number_field("bp.cg_max_iterations", [](auto& c) -> auto& { return c.recon.bp.settings.cg_max_iterations; }),

      {"tv.model", [](const C& c) { return std::string(to_string(c.recon.tv.model)); },
       [](C& c, std::string_view v) { c.recon.tv.model = parse_measurement_model(trim(v)); }},
      number_field("tv.dft_measurements", [](auto& c) -> auto& { return c.recon.tv.dft_measurements; }),
      number_field("tv.dft_epsilon", [](auto& c) -> auto& { return c.recon.tv.dft_epsilon; }),
      number_field("tv.epsilon", [](auto& c) -> auto& { return c.recon.tv.settings.epsilon; }),
      number_field("tv.tolerance", [](auto& c) -> auto& { return c.recon.tv.settings.tolerance; }),
      number_field("tv.max_outer_iterations",
                   [](auto& c) -> auto& { return c.recon.tv.settings.max_outer_iterations; }),
      number_field("tv.max_newton_iterations",
                   [](auto& c) -> auto& { return c.recon.tv.settings.max_newton_iterations; }),
      number_field("tv.barrier_growth", [](auto& c) -> auto& { return c.recon.tv.settings.barrier_growth; }),
      number_field("tv.newton_tol", [](auto& c) -> auto& { return c.recon.tv.settings.newton_tol; }),
      number_field("tv.cg_tol", [](auto& c) -> auto& { return c.recon.tv.settings.cg_tol; }),
      number_field("tv.cg_max_iterations", [](auto& c) -> auto& { return c.recon.tv.settings.cg_max_iterations; }),

      {"gradient.basis", [](const C& c) { return std::string(to_string(c.recon.gradient.basis)); },
       [](C& c, std::string_view v) { c.recon.gradient.basis = parse_transform_kind(trim(v)); }},
      {"gradient.unnormalized_transform",
       [](const C& c) { return bool_text(c.recon.gradient.unnormalized_transform); },
       [](C& c, std::string_view v) { c.recon.gradient.unnormalized_transform = parse_bool(v); }},
      number_field("gradient.step_reduction_factor",
                   [](auto& c) -> auto& { return c.recon.gradient.settings.step_reduction_factor; }),
      number_field("gradient.angle_threshold_rad",
                   [](auto& c) -> auto& { return c.recon.gradient.settings.angle_threshold; }),
      number_field("gradient.target_error_db",
                   [](auto& c) -> auto& { return c.recon.gradient.settings.target_error_db; }),
      number_field("gradient.max_iterations",
                   [](auto& c) -> auto& { return c.recon.gradient.settings.max_iterations; }),
  };
  return fields;
}

}  // namespace detail

/// Checks value domains; throws InvalidArgument naming the offending key.
inline void validate_config(const BenchmarkConfig& c) {
  if (c.thetas.empty()) throw InvalidArgument("theta: at least one value is required");
  for (double t : c.thetas) {
    if (!(t > 0.0 && t <= 1.0)) throw InvalidArgument("theta must be in (0,1]");
  }
  if (c.algorithms.empty()) throw InvalidArgument("algorithms: at least one algorithm is required");
  if (c.seeds.empty()) throw InvalidArgument("seeds: at least one seed is required");
  if (c.recon.block_size < 1) throw InvalidArgument("block_size must be at least 1");
  if (!(c.recon.omp.sparsity_ratio > 0.0 && c.recon.omp.sparsity_ratio <= 1.0)) {
    throw InvalidArgument("omp.sparsity_ratio must be in (0,1]");
  }
  if (!(c.recon.omp.residual_tol >= 0.0)) throw InvalidArgument("omp.residual_tol must be non-negative");
  if (!(c.recon.bp.noise_level >= 0.0)) throw InvalidArgument("bp.noise_level must be non-negative");
  detail::validate(c.recon.bp.settings);
  if (c.recon.tv.dft_measurements < 1) throw InvalidArgument("tv.dft_measurements must be at least 1");
  if (!(c.recon.tv.dft_epsilon >= 0.0) || !(c.recon.tv.settings.epsilon >= 0.0)) {
    throw InvalidArgument("tv epsilon values must be non-negative");
  }
  if (!(c.recon.tv.settings.tolerance > 0.0)) throw InvalidArgument("tv.tolerance must be positive");
  if (c.recon.tv.settings.max_outer_iterations < 1 || c.recon.tv.settings.max_newton_iterations < 1) {
    throw InvalidArgument("tv iteration limits must be positive");
  }
  c.recon.gradient.settings.validate();
}

/// Canonical text form: every field, fixed order, shortest round-trip numbers.
inline std::string serialize_config(const BenchmarkConfig& c) {
  std::string out;
  for (const auto& f : detail::config_fields()) out += f.key + " = " + f.get(c) + "\n";
  return out;
}

/// Parses `key = value` lines over the defaults. '#' starts a comment.
/// Unknown or repeated keys are errors.
inline BenchmarkConfig parse_config(std::string_view text) {
  BenchmarkConfig c;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) throw InvalidArgument(where + "expected 'key = value'");
    const std::string_view key = detail::trim(line.substr(0, eq));
    const std::string_view value = detail::trim(line.substr(eq + 1));
    const auto& fields = detail::config_fields();
    const auto it = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return f.key == key; });
    if (it == fields.end()) throw InvalidArgument(where + "unknown key '" + std::string(key) + "'");
    if (!seen.insert(std::string(key)).second) throw InvalidArgument(where + "duplicate key '" + std::string(key) + "'");
    try {
      it->set(c, value);
    } catch (const Error& e) {
      throw InvalidArgument(where + std::string(key) + ": " + e.what());
    }
  }
  validate_config(c);
  return c;
}

inline BenchmarkConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

/// 64-bit FNV-1a of the canonical serialization, as 16 hex digits.
inline std::string config_fingerprint(const BenchmarkConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize_config(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
  return out;
}

}  // namespace csrecon
