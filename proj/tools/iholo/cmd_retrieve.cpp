#include "commands.hpp"

#include <iholo/error.hpp>

#include <fmt/format.h>

#include <cmath>
#include <limits>

namespace iholo::cli {

json RetrieveArgs::to_json() const {
  json j = {{"mode", mode}, {"amplitude_floor", amplitude_floor}, {"min_count", min_count}};
  if (k0) j["k0"] = *k0;
  if (window_sigma) j["window_sigma"] = *window_sigma;
  return j;
}

json visibility_json(const corr::CorrelationTensor &t, double k0) {
  try {
    auto g = corr::normalize_gtilde_x(t);
    retrieval::VisibilityFitOptions vo;
    vo.k0_hint = k0;
    return retrieval::to_json(retrieval::fit_visibility(g.values, vo, &g.counts));
  } catch (const Error &e) {
    return {{"error", e.what()}};
  }
}

Retrieved retrieve_phase(const corr::CorrelationTensor &t, const RetrieveArgs &args, double k0) {
  if (t.total == 0) throw Error(ErrorKind::no_data, "no coincidences");
  Retrieved out;
  json d = json::object();
  if (args.mode == "fourier") {
    retrieval::FourierOptions o;
    o.k0 = k0;
    o.window_sigma = args.window_sigma;
    o.amplitude_floor = args.amplitude_floor;
    out.result = retrieval::fourier_retrieve_1d(corr::marginal_x(t), o);
    std::vector<double> w(out.result.phase.size());
    for (std::size_t i = 0; i < w.size(); ++i)
      w[i] = out.result.valid[i] ? out.result.amplitude[i] * out.result.amplitude[i] : 0.0;
    try {
      double center = (t.grid.width() - 1) / 2.0;
      auto q = retrieval::fit_quadratic(out.result.phase, w, center);
      d["quadratic_fit"] = {{"a", q.a},          {"a_stderr", q.a_stderr}, {"b", q.b},
                            {"c", q.c},          {"center", center},       {"points", q.points},
                            {"rms_residual", q.rms_residual}};
    } catch (const Error &e) {
      d["quadratic_fit"] = {{"error", e.what()}};
    }
  } else if (args.mode == "pca") {
    retrieval::PcaOptions o;
    o.min_count = args.min_count;
    o.amplitude_floor = args.amplitude_floor;
    out.result = retrieval::pca_retrieve_2d(t, o);
  } else {
    throw config_error("--mode must be fourier or pca");
  }
  d["method"] = args.mode;
  d["k0"] = k0;
  d["N"] = t.total;
  d["singular_values"] = out.result.singular_values;
  d["gauge"] = {{"sign", out.result.gauge.sign}, {"offset", out.result.gauge.offset}};
  d["retrieval"] = out.result.diagnostics;

  d["visibility"] = visibility_json(t, k0);
  out.diagnostics = std::move(d);
  return out;
}

std::vector<fs::path> write_phase(const retrieval::RetrievalResult &r, const fs::path &prefix) {
  std::vector<double> shown(r.phase.size());
  for (std::size_t i = 0; i < shown.size(); ++i)
    shown[i] = r.valid[i] ? r.phase[i] : std::numeric_limits<double>::quiet_NaN();
  auto pgm = with_suffix(prefix, ".pgm");
  write_pgm(pgm, r.grid, shown);
  std::string csv = "x,y,phase,amplitude,valid\n";
  for (std::size_t i = 0; i < r.phase.size(); ++i) {
    Pixel p = r.grid.pixel(i);
    csv += fmt::format("{},{},{},{},{}\n", p.x, p.y, csv_number(r.phase[i]),
                       csv_number(r.amplitude[i]), int(r.valid[i]));
  }
  auto csv_path = with_suffix(prefix, ".csv");
  write_text(csv_path, csv);
  return {pgm, csv_path};
}

StageResult run_retrieve(const fs::path &tensor, const RetrieveArgs &args, const fs::path &prefix) {
  auto base = tensor;
  if (base.extension() == ".csv" || base.extension() == ".json") base.replace_extension();
  corr::CorrelationTensor t = corr::load_tensor(base);
  double k0 = args.k0.value_or(tensor_k0(read_json(with_suffix(base, ".json"))).value_or(0.62));
  Retrieved got = retrieve_phase(t, args, k0);

  StageResult r;
  r.outputs = write_phase(got.result, with_suffix(prefix, "_phase"));
  auto diag = with_suffix(prefix, "_diagnostics.json");
  write_json(diag, got.diagnostics);
  r.outputs.push_back(diag);
  r.summary = got.diagnostics;
  r.summary.erase("retrieval");
  return r;
}

void register_retrieve(CLI::App &app, const GlobalOptions &) {
  struct Args {
    std::string tensor;
    std::string out;
    RetrieveArgs r;
    std::optional<std::string> manifest;
  };
  auto args = std::make_shared<Args>();
  auto *cmd = app.add_subcommand("retrieve", "Phase retrieval from a coincidence tensor");
  cmd->add_option("tensor", args->tensor, "Tensor prefix (or its .csv / .json)")->required();
  cmd->add_option("-o,--out", args->out, "Output prefix")->required();
  cmd->add_option("--mode", args->r.mode, "fourier (1-D marginal) or pca (2-D)")
      ->check(CLI::IsMember({"fourier", "pca"}))
      ->capture_default_str();
  cmd->add_option("--k0", args->r.k0, "Shear carrier in rad/px (default: from the simulation, else 0.62)");
  cmd->add_option("--window-sigma", args->r.window_sigma, "Fourier window width in rad/px (default k0/4)");
  cmd->add_option("--amplitude-floor", args->r.amplitude_floor, "Pixels below this fraction of the peak amplitude are invalid")
      ->capture_default_str();
  cmd->add_option("--min-count", args->r.min_count, "PCA: drop cross-sections with fewer counts")
      ->capture_default_str();
  cmd->add_option("--manifest", args->manifest, "Append this stage to a manifest");
  cmd->callback([args] {
    Stopwatch clock;
    StageResult r = run_retrieve(args->tensor, args->r, args->out);
    json stage_args = args->r.to_json();
    stage_args["tensor"] = args->tensor;
    stage_args["out"] = args->out;
    record_stage(args->manifest, "retrieve", stage_args, r, clock.seconds());
    print_json(r.summary);
  });
}

} // namespace iholo::cli
