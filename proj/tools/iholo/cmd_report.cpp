#include "commands.hpp"

#include <iholo/error.hpp>
#include <iholo/events.hpp>
#include <iholo/theory.hpp>
#include <iholo/timing.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <iostream>

namespace iholo::cli {

json ReportArgs::to_json() const {
  json j = {{"tensor", tensor.string()},
            {"out", out_dir.string()},
            {"retrieve", retrieve_mode},
            {"cross_sections", cross_sections},
            {"g2_s", g2_s},
            {"g2_r", g2_r},
            {"M", mode_overlap}};
  if (stream) j["stream"] = stream->string();
  if (k0) j["k0"] = *k0;
  return j;
}

namespace {

std::vector<Pixel> default_sections(const PixelGrid &g) {
  std::vector<Pixel> out;
  for (int qy : {1, 3})
    for (int qx : {1, 3}) {
      Pixel p{g.width() * qx / 4, g.height() * qy / 4};
      if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
    }
  return out;
}

json timing_report(const fs::path &stream_path, const corr::CorrelationTensor &t,
                   const fs::path &dir, std::vector<fs::path> &files) {
  events::EventStream s = events::read_stream_file(stream_path.string());
  const std::uint64_t period = s.header.pulse_period_ps;
  auto hist = corr::timestamp_histogram(s.events, 100, 3 * period / 2, period);
  if (hist.total() == 0) return {{"status", "no herald events"}};
  std::string csv = "dt_ps,count\n";
  for (std::size_t i = 0; i < hist.counts.size(); ++i)
    csv += fmt::format("{},{}\n", csv_number(hist.bin_center_ps(i)), hist.counts[i]);
  auto path = dir / "timestamp_histogram.csv";
  write_text(path, csv);
  files.push_back(path);
  json j = {{"status", "ok"}, {"events", hist.total()}};
  try {
    auto acc = corr::accidental_fraction(hist, t.options.tau_w_ps, 2, t.options.window);
    j["accidental_fraction"] = acc.fraction;
    j["per_photon_leakage"] = acc.per_photon_leakage;
    j["fwhm_ps"] = 2.0 * std::sqrt(2.0 * std::log(2.0)) * acc.fit.sigma_ps;
    j["reduced_chi2"] = acc.fit.reduced_chi2;
  } catch (const Error &e) {
    j["accidental_fraction"] = {{"error", e.what()}};
  }
  return j;
}

} // namespace

StageResult run_report(const ReportArgs &args) {
  auto base = args.tensor;
  if (base.extension() == ".csv" || base.extension() == ".json") base.replace_extension();
  corr::CorrelationTensor t = corr::load_tensor(base);
  const fs::path dir = args.out_dir;
  StageResult r;
  json report = corr::tensor_summary(t);
  report.erase("singles_left");
  report.erase("singles_right");

  if (t.total == 0) {
    report["status"] = "no coincidences";
    auto path = dir / "report.json";
    write_json(path, report);
    std::cerr << "iholo: no coincidences in " << base.string() << '\n';
    throw Error(ErrorKind::no_data, "no coincidences");
  }
  report["status"] = "ok";

  const PixelGrid grid = t.grid;
  const double k0 = args.k0.value_or(tensor_k0(read_json(with_suffix(base, ".json"))).value_or(0.62));
  report["k0"] = k0;

  // Marginal fringe image: rows x1 (left), columns x2 (right).
  auto g = corr::normalize_gtilde_x(t);
  const int W = grid.width();
  PixelGrid square(W, W);
  std::vector<double> counts(square.size());
  std::string csv = "x1,x2,count,gtilde\n";
  for (int i = 0; i < W; ++i)
    for (int j = 0; j < W; ++j) {
      counts[square.index(j, i)] = g.counts(i, j);
      csv += fmt::format("{},{},{},{}\n", i, j, g.counts(i, j), csv_number(g.values(i, j)));
    }
  write_pgm(dir / "marginal_x.pgm", square, counts);
  write_text(dir / "marginal_x.csv", csv);
  r.outputs.insert(r.outputs.end(), {dir / "marginal_x.pgm", dir / "marginal_x.csv"});
  report["visibility"] = visibility_json(t, k0);

  std::vector<Pixel> sections;
  for (const auto &s : args.cross_sections) sections.push_back(parse_pixel(s));
  if (sections.empty()) sections = default_sections(grid);
  json gallery = json::array();
  for (const auto &p : sections) {
    if (!grid.contains(p)) throw config_error(fmt::format("cross-section {},{} is outside the grid", p.x, p.y));
    PixelMap m = corr::cross_section(t, p);
    auto path = dir / fmt::format("cross_section_{}_{}.pgm", p.x, p.y);
    write_pgm(path, grid, m.values);
    r.outputs.push_back(path);
    gallery.push_back({{"x", p.x}, {"y", p.y}, {"counts", m.total()}, {"image", path.filename().string()}});
  }
  report["cross_sections"] = gallery;

  RetrieveArgs ra;
  ra.mode = args.retrieve_mode;
  if (ra.mode == "auto") ra.mode = grid.height() > 1 && k0 == 0.0 ? "pca" : "fourier";
  ra.k0 = k0;
  try {
    Retrieved got = retrieve_phase(t, ra, k0);
    auto files = write_phase(got.result, dir / "phase");
    r.outputs.insert(r.outputs.end(), files.begin(), files.end());
    got.diagnostics.erase("visibility");
    report["retrieval"] = got.diagnostics;
  } catch (const Error &e) {
    if (e.kind() == ErrorKind::config) throw;
    report["retrieval"] = {{"method", ra.mode}, {"error", e.what()}};
  }

  std::string curve = "epsilon,V\n";
  for (const auto &p : theory::visibility_curve(args.g2_s, args.g2_r, args.mode_overlap, 0.01, 3.0, 300))
    curve += fmt::format("{},{}\n", csv_number(p.epsilon), csv_number(p.V));
  write_text(dir / "visibility_curve.csv", curve);
  r.outputs.push_back(dir / "visibility_curve.csv");
  auto opt = theory::optimal_epsilon(args.g2_s, args.g2_r);
  report["theory"] = {{"g2_s", args.g2_s},
                      {"g2_r", args.g2_r},
                      {"M", args.mode_overlap},
                      {"epsilon_opt", opt.epsilon},
                      {"epsilon_opt_is_supremum", opt.at_supremum},
                      {"V_at_opt", opt.at_supremum ? args.mode_overlap
                                                   : theory::visibility({args.g2_s, args.g2_r, opt.epsilon,
                                                                         args.mode_overlap})}};

  if (args.stream) report["timing"] = timing_report(*args.stream, t, dir, r.outputs);

  json names = json::array();
  for (const auto &f : r.outputs) names.push_back(f.filename().string());
  report["files"] = names;
  write_json(dir / "report.json", report);
  r.outputs.push_back(dir / "report.json");
  r.summary = report;
  return r;
}

void register_report(CLI::App &app, const GlobalOptions &global) {
  struct Args {
    ReportArgs r;
    std::string tensor, out;
    std::optional<std::string> stream, manifest;
    std::optional<double> g2_s, g2_r, M;
  };
  auto args = std::make_shared<Args>();
  auto *cmd = app.add_subcommand("report", "Images, curves and a JSON summary for a run");
  cmd->add_option("tensor", args->tensor, "Tensor prefix from correlate")->required();
  cmd->add_option("-o,--out", args->out, "Output directory")->required();
  cmd->add_option("--stream", args->stream, "Event stream, for the herald timing histogram");
  cmd->add_option("--retrieve", args->r.retrieve_mode, "auto, fourier or pca")
      ->check(CLI::IsMember({"auto", "fourier", "pca"}))
      ->capture_default_str();
  cmd->add_option("--k0", args->r.k0, "Shear carrier in rad/px");
  cmd->add_option("--cross-section", args->r.cross_sections, "Right pixel x,y for the gallery");
  cmd->add_option("--g2-s", args->g2_s, "Signal g2 for the visibility curve (default: --config, else 1)");
  cmd->add_option("--g2-r", args->g2_r, "Reference g2 for the visibility curve");
  cmd->add_option("--M", args->M, "Mode-match factor for the visibility curve");
  cmd->add_option("--manifest", args->manifest, "Append this stage to a manifest");
  cmd->callback([args, &global] {
    Stopwatch clock;
    ReportArgs ra = args->r;
    ra.tensor = args->tensor;
    ra.out_dir = args->out;
    if (args->stream) ra.stream = *args->stream;
    if (global.config) {
      const ExperimentConfig cfg = load_experiment(*global.config, global).config;
      ra.g2_s = cfg.signal.g2();
      ra.g2_r = cfg.reference.g2();
      ra.mode_overlap = cfg.mode_overlap;
    }
    ra.g2_s = args->g2_s.value_or(ra.g2_s);
    ra.g2_r = args->g2_r.value_or(ra.g2_r);
    ra.mode_overlap = args->M.value_or(ra.mode_overlap);
    StageResult r = run_report(ra);
    record_stage(args->manifest, "report", ra.to_json(), r, clock.seconds());
    print_json(r.summary);
  });
}

} // namespace iholo::cli
