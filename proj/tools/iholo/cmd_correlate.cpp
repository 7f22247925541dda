#include "commands.hpp"

#include <iholo/error.hpp>
#include <iholo/events.hpp>

#include <fmt/format.h>

#include <cmath>

namespace iholo::cli {

corr::CorrelatorOptions CorrelateArgs::options() const {
  if (!(window_ns > 0.0)) throw config_error("--window must be > 0 ns");
  corr::CorrelatorOptions o;
  o.tau_w_ps = static_cast<std::uint64_t>(std::llround(window_ns * 1000.0));
  if (mode == "twofold")
    o.mode = corr::CoincidenceMode::twofold;
  else if (mode == "threefold")
    o.mode = corr::CoincidenceMode::threefold;
  else
    throw config_error("--mode must be twofold or threefold");
  if (pairing == "all")
    o.pairing = corr::PairingPolicy::all_pairs;
  else if (pairing == "unique")
    o.pairing = corr::PairingPolicy::unique;
  else
    throw config_error("--pairing must be all or unique");
  o.window = full_width ? corr::WindowConvention::full_width : corr::WindowConvention::centered;
  for (const auto &axis : marginal)
    if (axis != "x") throw config_error("--marginal supports only x");
  return o;
}

json CorrelateArgs::to_json() const {
  return {{"window_ns", window_ns},   {"mode", mode},         {"pairing", pairing},
          {"full_width", full_width}, {"marginal", marginal}, {"cross_sections", cross_sections}};
}

std::optional<double> tensor_k0(const json &summary) {
  const json *cfg = summary.contains("source") ? &summary["source"] : nullptr;
  if (cfg && cfg->contains("k0") && (*cfg)["k0"].is_number()) return (*cfg)["k0"].get<double>();
  return std::nullopt;
}

namespace {

fs::path write_marginal(const corr::CorrelationTensor &t, const fs::path &path) {
  auto g = corr::normalize_gtilde_x(t);
  std::string csv = "x1,x2,count,gtilde\n";
  for (Eigen::Index i = 0; i < g.counts.rows(); ++i)
    for (Eigen::Index j = 0; j < g.counts.cols(); ++j)
      csv += fmt::format("{},{},{},{}\n", i, j, static_cast<std::uint64_t>(g.counts(i, j)),
                         csv_number(g.values(i, j)));
  write_text(path, csv);
  return path;
}

} // namespace

StageResult run_correlate(const fs::path &stream_path, const CorrelateArgs &args,
                          const fs::path &prefix, unsigned threads) {
  corr::CorrelatorOptions opts = args.options();
  std::vector<Pixel> sections;
  for (const auto &s : args.cross_sections) sections.push_back(parse_pixel(s));

  events::EventStream stream = events::read_stream_file(stream_path.string());
  const PixelGrid grid = stream.header.grid();
  for (const auto &p : sections)
    if (!grid.contains(p))
      throw config_error(fmt::format("--cross-section {},{} is outside the {}x{} grid", p.x, p.y,
                                     grid.width(), grid.height()));
  corr::CorrelationTensor t = corr::correlate(stream, opts, threads);

  StageResult r;
  ensure_parent(prefix);
  corr::save_tensor(t, prefix);
  json summary = corr::tensor_summary(t);
  const json &meta = stream.header.metadata;
  json source = {{"stream", stream_path.string()}};
  if (meta.contains("config_digest")) source["config_digest"] = meta["config_digest"];
  if (meta.contains("config") && meta["config"].contains("shear") &&
      meta["config"]["shear"].is_object())
    source["k0"] = meta["config"]["shear"].value("k0", 0.0);
  summary["source"] = source;
  write_json(with_suffix(prefix, ".json"), summary);
  r.outputs = {with_suffix(prefix, ".csv"), with_suffix(prefix, ".json")};

  if (!args.marginal.empty()) r.outputs.push_back(write_marginal(t, with_suffix(prefix, "_marginal_x.csv")));
  for (const auto &p : sections) {
    PixelMap m = corr::cross_section(t, p);
    auto base = with_suffix(prefix, fmt::format("_cs_{}_{}", p.x, p.y));
    write_pgm(with_suffix(base, ".pgm"), grid, m.values);
    std::string csv = "x,y,count\n";
    for (int y = 0; y < grid.height(); ++y)
      for (int x = 0; x < grid.width(); ++x) csv += fmt::format("{},{},{}\n", x, y, m(x, y));
    write_text(with_suffix(base, ".csv"), csv);
    r.outputs.push_back(with_suffix(base, ".pgm"));
    r.outputs.push_back(with_suffix(base, ".csv"));
  }

  r.summary = {{"N", t.total},
               {"tau_w_ps", t.options.tau_w_ps},
               {"singles_left_total", t.singles_left_total()},
               {"singles_right_total", t.singles_right_total()},
               {"heralds", t.heralds},
               {"trials", t.trials},
               {"tensor", with_suffix(prefix, ".csv").string()}};
  return r;
}

void register_correlate(CLI::App &app, const GlobalOptions &global) {
  struct Args {
    std::string stream;
    std::string out;
    CorrelateArgs c;
    std::optional<std::string> manifest;
  };
  auto args = std::make_shared<Args>();
  auto *cmd = app.add_subcommand("correlate", "Coincidence tensor from an event stream");
  cmd->add_option("stream", args->stream, "Event stream (.iih)")->required();
  cmd->add_option("-o,--out", args->out, "Output prefix for <prefix>.csv and <prefix>.json")->required();
  cmd->add_option("--window", args->c.window_ns, "Coincidence window tau_w in ns")->capture_default_str();
  cmd->add_option("--mode", args->c.mode, "twofold or threefold")->capture_default_str();
  cmd->add_option("--pairing", args->c.pairing, "all or unique")->capture_default_str();
  cmd->add_flag("--full-width", args->c.full_width, "Accept |dt| <= tau_w instead of tau_w / 2");
  cmd->add_option("--marginal", args->c.marginal, "Also write the x-marginal G(x1, x2)");
  cmd->add_option("--cross-section", args->c.cross_sections, "Right pixel x,y for a cross-section image");
  cmd->add_option("--manifest", args->manifest, "Append this stage to a manifest");
  cmd->callback([args, &global] {
    Stopwatch clock;
    StageResult r = run_correlate(args->stream, args->c, args->out, global.thread_count());
    json stage_args = args->c.to_json();
    stage_args["stream"] = args->stream;
    stage_args["out"] = args->out;
    record_stage(args->manifest, "correlate", stage_args, r, clock.seconds());
    print_json(r.summary);
  });
}

} // namespace iholo::cli
