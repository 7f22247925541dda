#include "commands.hpp"

#include <iholo/error.hpp>
#include <iholo/events.hpp>
#include <iholo/simulate.hpp>

#include <fstream>
#include <iostream>

namespace iholo::cli {

StageResult run_simulate(const LoadedConfig &loaded, const fs::path &out, unsigned threads) {
  const ExperimentConfig &cfg = loaded.config;
  for (const auto &w : sim::simulation_warnings(cfg)) std::cerr << "iholo: warning: " << w << '\n';

  ensure_parent(out);
  std::ofstream file(out, std::ios::binary);
  if (!file) throw io_error("cannot create " + out.string());
  events::StreamWriter writer(file, sim::simulation_header(cfg));
  std::array<std::uint64_t, 3> counts{};
  sim::SimulationOptions opts;
  opts.threads = threads;
  sim::simulate(cfg, opts, [&](std::span<const events::DetectionEvent> batch) {
    for (const auto &e : batch) {
      writer.write(e);
      ++counts[static_cast<std::size_t>(e.channel)];
    }
  });
  writer.flush();
  file.close();
  if (!file) throw io_error("failed to write " + out.string());

  StageResult r;
  r.outputs.push_back(out);
  r.summary = {{"stream", out.string()},
               {"trials", cfg.trials},
               {"events", writer.records_written()},
               {"left", counts[0]},
               {"right", counts[1]},
               {"herald", counts[2]},
               {"config_digest", cfg.digest()},
               {"seed", cfg.rng_seed}};
  return r;
}

void register_simulate(CLI::App &app, const GlobalOptions &global) {
  struct Args {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> trials;
    std::optional<std::string> manifest;
  };
  auto args = std::make_shared<Args>();
  auto *cmd = app.add_subcommand("simulate", "Monte Carlo acquisition to an event stream");
  cmd->add_option("config", args->config, "Config or preset JSON (else --config)");
  cmd->add_option("-o,--out", args->out, "Output stream (.iih)")->required();
  cmd->add_option("--trials", args->trials, "Override the number of trials");
  cmd->add_option("--manifest", args->manifest, "Manifest path (default <out>.manifest.json)");
  cmd->callback([args, &global] {
    std::string path = !args->config.empty() ? args->config : global.config.value_or("");
    if (path.empty()) throw config_error("simulate needs a config (positional or --config)");
    Stopwatch clock;
    LoadedConfig loaded = load_experiment(path, global, args->trials);
    unsigned threads = global.thread_count();
    StageResult r = run_simulate(loaded, args->out, threads);

    fs::path manifest_path = args->manifest ? fs::path(*args->manifest)
                                            : with_suffix(args->out, ".manifest.json");
    Manifest m(manifest_path);
    m.set_run(loaded.config, threads);
    m.add_stage("simulate", {{"config", path}, {"out", args->out}}, r.outputs, clock.seconds());
    m.save();
    r.summary["manifest"] = manifest_path.string();
    print_json(r.summary);
  });
}

void record_stage(const std::optional<fs::path> &manifest_path, const std::string &name,
                  const json &args, const StageResult &result, double seconds) {
  if (!manifest_path) return;
  Manifest m = Manifest::open_or_create(*manifest_path);
  m.add_stage(name, args, result.outputs, seconds);
  m.save();
}

void print_json(const json &doc) { std::cout << doc.dump(2) << '\n'; }

} // namespace iholo::cli
