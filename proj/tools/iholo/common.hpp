#pragma once

#include <iholo/config.hpp>
#include <iholo/grid.hpp>

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace iholo::cli {

namespace fs = std::filesystem;
using nlohmann::json;

/// Flags shared by every subcommand.
struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> config;

  unsigned thread_count() const;
};

/// A config file is either a bare experiment config or a preset
/// {"config": {...}, "pipeline": {...}}.
struct LoadedConfig {
  ExperimentConfig config;
  json pipeline = json::object();
  fs::path source;
};

LoadedConfig load_experiment(const fs::path &path, const GlobalOptions &global,
                             std::optional<std::uint64_t> trials = {});

json read_json(const fs::path &path);
void write_json(const fs::path &path, const json &doc);
void write_text(const fs::path &path, const std::string &text);
void ensure_parent(const fs::path &path);
fs::path with_suffix(const fs::path &prefix, const std::string &suffix);

/// 16-bit grayscale PGM scaled over the finite range of `values`.
void write_pgm(const fs::path &path, const PixelGrid &grid, std::span<const double> values);

/// Floats in CSV output use up to 10 significant digits.
std::string csv_number(double v);

Pixel parse_pixel(const std::string &text);

class Stopwatch {
public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

} // namespace iholo::cli
