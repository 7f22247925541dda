#include "commands.hpp"

#include <iholo/error.hpp>

#include <cstdlib>

namespace iholo::cli {
namespace {

fs::path resolve_preset(const std::string &name) {
  if (fs::exists(name)) return name;
  std::vector<fs::path> dirs;
  if (const char *env = std::getenv("IHOLO_PRESET_DIR")) dirs.emplace_back(env);
  dirs.emplace_back(IHOLO_PRESET_DIR);
  dirs.emplace_back(IHOLO_INSTALLED_PRESET_DIR);
  for (const auto &d : dirs) {
    fs::path p = d / (name + ".json");
    if (fs::exists(p)) return p;
  }
  throw config_error("unknown preset '" + name + "'");
}

template <class T> T setting(const json &pipeline, const char *key, T fallback) {
  try {
    return pipeline.value(key, fallback);
  } catch (const json::exception &) {
    throw config_error(std::string("pipeline.") + key + " has the wrong type");
  }
}

} // namespace

void register_pipeline(CLI::App &app, const GlobalOptions &global) {
  struct Args {
    std::optional<std::string> preset;
    std::string out;
    std::optional<std::uint64_t> trials;
  };
  auto args = std::make_shared<Args>();
  auto *cmd = app.add_subcommand("pipeline", "simulate -> correlate -> retrieve -> report");
  cmd->add_option("--preset", args->preset, "Preset name (fig3a, fig3b, fig3c, fig4, fig5) or path");
  cmd->add_option("-o,--out", args->out, "Output directory")->required();
  cmd->add_option("--trials", args->trials, "Override the number of trials");
  cmd->callback([args, &global] {
    fs::path source;
    if (args->preset)
      source = resolve_preset(*args->preset);
    else if (global.config)
      source = *global.config;
    else
      throw config_error("pipeline needs --preset or --config");

    const fs::path dir = args->out;
    LoadedConfig loaded = load_experiment(source, global, args->trials);
    const json &p = loaded.pipeline;
    const unsigned threads = global.thread_count();
    Manifest manifest(dir / "manifest.json");
    manifest.set_run(loaded.config, threads);
    json summary = {{"preset", source.string()}, {"out", dir.string()}};

    Stopwatch t_sim;
    auto stream = dir / "events.iih";
    StageResult sim = run_simulate(loaded, stream, threads);
    manifest.add_stage("simulate", {{"config", source.string()}, {"out", stream.string()}}, sim.outputs,
                       t_sim.seconds());
    summary["simulate"] = sim.summary;

    CorrelateArgs ca;
    ca.window_ns = setting(p, "window_ns", ca.window_ns);
    ca.mode = setting(p, "mode", ca.mode);
    ca.pairing = setting(p, "pairing", ca.pairing);
    ca.marginal = {"x"};
    ca.cross_sections = setting(p, "cross_sections", std::vector<std::string>{});
    Stopwatch t_corr;
    auto tensor = dir / "tensor";
    StageResult cor = run_correlate(stream, ca, tensor, threads);
    json cargs = ca.to_json();
    cargs["stream"] = stream.string();
    manifest.add_stage("correlate", cargs, cor.outputs, t_corr.seconds());
    summary["correlate"] = cor.summary;
    manifest.save();

    RetrieveArgs ra;
    ra.mode = setting(p, "retrieve", ra.mode);
    if (loaded.config.shear) ra.k0 = loaded.config.shear->k0;
    ra.min_count = setting(p, "min_count", ra.min_count);
    Stopwatch t_ret;
    StageResult ret = run_retrieve(tensor, ra, dir / "retrieved");
    manifest.add_stage("retrieve", ra.to_json(), ret.outputs, t_ret.seconds());
    summary["retrieve"] = ret.summary;

    ReportArgs rep;
    rep.tensor = tensor;
    rep.out_dir = dir / "report";
    rep.retrieve_mode = ra.mode;
    rep.k0 = ra.k0;
    rep.cross_sections = ca.cross_sections;
    rep.g2_s = loaded.config.signal.g2();
    rep.g2_r = loaded.config.reference.g2();
    rep.mode_overlap = loaded.config.mode_overlap;
    if (sim.summary.value("herald", 0) > 0) rep.stream = stream;
    Stopwatch t_rep;
    StageResult rr = run_report(rep);
    manifest.add_stage("report", rep.to_json(), rr.outputs, t_rep.seconds());
    manifest.save();

    summary["report"] = {{"visibility", rr.summary["visibility"]}, {"dir", rep.out_dir.string()}};
    if (rr.summary.contains("timing")) summary["report"]["timing"] = rr.summary["timing"];
    summary["manifest"] = manifest.path().string();
    double total = 0;
    for (const auto &s : manifest.document()["stages"]) total += s["wall_seconds"].get<double>();
    summary["wall_seconds"] = total;
    print_json(summary);
  });
}

} // namespace iholo::cli
