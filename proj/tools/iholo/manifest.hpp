#pragma once

#include "common.hpp"

namespace iholo::cli {

/// Record of a run: enough to repeat it and to check its outputs.
///   {tool_version, seed, config_digest, config, threads, stages: [
///     {name, args, outputs: [{path, sha256, bytes}], wall_seconds}]}
/// Output paths are stored relative to the manifest's directory.
class Manifest {
public:
  explicit Manifest(fs::path path);

  /// Loads an existing manifest; a different tool major.minor version is a
  /// config error.
  static Manifest open(const fs::path &path);
  static Manifest open_or_create(const fs::path &path);

  void set_run(const ExperimentConfig &config, unsigned threads);
  void add_stage(const std::string &name, const json &args, std::span<const fs::path> outputs,
                 double wall_seconds);
  void save() const;

  const json &document() const noexcept { return doc_; }
  const fs::path &path() const noexcept { return path_; }

private:
  fs::path path_;
  json doc_;
};

struct VerifyResult {
  std::size_t checked{0};
  std::vector<std::string> mismatched;
  std::vector<std::string> missing;
};

VerifyResult verify_manifest(const fs::path &path);

} // namespace iholo::cli
