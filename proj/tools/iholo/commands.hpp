#pragma once

#include "common.hpp"
#include "manifest.hpp"

#include <iholo/correlator.hpp>
#include <iholo/retrieval.hpp>

#include <CLI11.hpp>

namespace iholo::cli {

/// Each stage returns the files it wrote and a JSON summary for stdout.
struct StageResult {
  std::vector<fs::path> outputs;
  json summary = json::object();
};

StageResult run_simulate(const LoadedConfig &config, const fs::path &out, unsigned threads);

struct CorrelateArgs {
  double window_ns{5.0};
  std::string mode{"twofold"};
  std::string pairing{"all"};
  bool full_width{false};
  std::vector<std::string> marginal; ///< axes; only "x" is defined
  std::vector<std::string> cross_sections;

  corr::CorrelatorOptions options() const;
  json to_json() const;
};

StageResult run_correlate(const fs::path &stream, const CorrelateArgs &args,
                          const fs::path &prefix, unsigned threads);

struct RetrieveArgs {
  std::string mode{"fourier"};
  std::optional<double> k0;
  std::optional<double> window_sigma;
  double amplitude_floor{0.05};
  std::uint64_t min_count{10};

  json to_json() const;
};

struct Retrieved {
  retrieval::RetrievalResult result;
  json diagnostics; ///< singular values, gauge, visibility fit, quadratic fit
};

/// Phase retrieval plus the visibility fit of the x-marginal.
Retrieved retrieve_phase(const corr::CorrelationTensor &tensor, const RetrieveArgs &args, double k0);

/// Fit of the normalized x-marginal, or {"error": ...}.
json visibility_json(const corr::CorrelationTensor &tensor, double k0);

/// Writes <prefix>.pgm and <prefix>.csv (x,y,phase,amplitude,valid).
std::vector<fs::path> write_phase(const retrieval::RetrievalResult &result, const fs::path &prefix);

StageResult run_retrieve(const fs::path &tensor, const RetrieveArgs &args, const fs::path &prefix);

struct ReportArgs {
  fs::path tensor;
  std::optional<fs::path> stream;
  fs::path out_dir;
  std::string retrieve_mode{"auto"};
  std::optional<double> k0;
  std::vector<std::string> cross_sections;
  double g2_s{1.0};
  double g2_r{1.0};
  double mode_overlap{1.0};

  json to_json() const;
};

StageResult run_report(const ReportArgs &args);

/// k0 recorded by the simulation that produced a tensor, if known.
std::optional<double> tensor_k0(const json &summary);

void register_simulate(CLI::App &app, const GlobalOptions &global);
void register_correlate(CLI::App &app, const GlobalOptions &global);
void register_retrieve(CLI::App &app, const GlobalOptions &global);
void register_theory(CLI::App &app, const GlobalOptions &global);
void register_events(CLI::App &app, const GlobalOptions &global);
void register_report(CLI::App &app, const GlobalOptions &global);
void register_pipeline(CLI::App &app, const GlobalOptions &global);
void register_manifest(CLI::App &app, const GlobalOptions &global);

/// Records a stage in `manifest_path` when one is given.
void record_stage(const std::optional<fs::path> &manifest_path, const std::string &name,
                  const json &args, const StageResult &result, double seconds);

void print_json(const json &doc);

} // namespace iholo::cli
