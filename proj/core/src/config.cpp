#include <iholo/config.hpp>
#include <iholo/digest.hpp>
#include <iholo/error.hpp>
#include <iholo/mask_io.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

namespace iholo {

using nlohmann::json;

namespace {

/// Typed access to one JSON object, with errors naming the full path.
class Fields {
public:
  Fields(const json &obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string &path, const std::string &what) {
    throw config_error(path + ": " + what);
  }

  std::string at(const std::string &key) const { return path_ + "." + key; }
  bool has(const std::string &key) const { return obj_.contains(key) && !obj_[key].is_null(); }
  const json &raw(const std::string &key) const { return obj_.at(key); }

  double number(const std::string &key, double fallback) const {
    seen_.insert(key);
    if (!has(key)) return fallback;
    if (!obj_[key].is_number()) fail(at(key), "expected a number");
    double v = obj_[key].get<double>();
    if (!std::isfinite(v)) fail(at(key), "must be finite");
    return v;
  }

  std::uint64_t count(const std::string &key, std::uint64_t fallback) const {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const json &v = obj_[key];
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
    if (v.is_number_float()) {
      double d = v.get<double>();
      if (d >= 0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
    }
    fail(at(key), "expected a non-negative integer");
  }

  std::string text(const std::string &key, const std::string &fallback) const {
    seen_.insert(key);
    if (!has(key)) return fallback;
    if (!obj_[key].is_string()) fail(at(key), "expected a string");
    return obj_[key].get<std::string>();
  }

  std::optional<Fields> object(const std::string &key) const {
    seen_.insert(key);
    if (!has(key)) return std::nullopt;
    return Fields(obj_[key], at(key));
  }

  void mark(const std::string &key) const { seen_.insert(key); }

  /// Rejects keys that were never queried.
  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) fail(at(it.key()), "unknown field");
  }

  const std::string &path() const { return path_; }

private:
  const json &obj_;
  std::string path_;
  mutable std::set<std::string> seen_;
};

void require(bool ok, const std::string &path, const std::string &what) {
  if (!ok) Fields::fail(path, what);
}

SourceSpec parse_source(const Fields &f, bool is_reference) {
  SourceSpec s;
  s.kind = [&] {
    try {
      return parse_source_kind(f.text("kind", "coherent"));
    } catch (const Error &e) {
      Fields::fail(f.at("kind"), e.what());
    }
  }();
  s.mean_photons = f.number("mean_photons", 1.0);
  require(s.mean_photons > 0.0, f.at("mean_photons"), "must be positive");
  if (f.has("g2_override")) s.g2_override = f.number("g2_override", 1.0);
  f.mark("g2_override");
  f.finish();

  if (is_reference && s.kind == SourceKind::heralded_single_photon)
    Fields::fail(f.at("kind"), "the reference must be coherent or thermal");
  if (s.g2_override) {
    double g = *s.g2_override;
    switch (s.kind) {
    case SourceKind::coherent:
      require(g == 1.0, f.at("g2_override"), "a coherent source has g2 = 1");
      break;
    case SourceKind::thermal:
      require(g >= 1.0, f.at("g2_override"), "thermal-like sources need g2 >= 1");
      break;
    case SourceKind::heralded_single_photon:
      require(g == 0.0, f.at("g2_override"),
              "the heralded backend models an ideal single photon (g2 = 0)");
      break;
    }
  }
  return s;
}

DetectorModel parse_detector(const json &doc, const std::string &path) {
  if (doc.is_string()) {
    auto name = doc.get<std::string>();
    if (name == "ideal") return DetectorModel::ideal();
    if (name == "tpx3cam") return DetectorModel::tpx3cam();
    Fields::fail(path, "unknown detector preset '" + name + "'");
  }
  Fields f(doc, path);
  DetectorModel d;
  std::string preset = f.text("preset", "ideal");
  if (preset == "tpx3cam")
    d = DetectorModel::tpx3cam();
  else if (preset != "ideal")
    Fields::fail(f.at("preset"), "unknown detector preset '" + preset + "'");
  d.efficiency = f.number("efficiency", d.efficiency);
  d.jitter_sigma_ns = f.number("jitter_sigma_ns", d.jitter_sigma_ns);
  d.blur_sigma_px = f.number("blur_sigma_px", d.blur_sigma_px);
  d.dark_rate_per_s = f.number("dark_rate_per_s", d.dark_rate_per_s);
  d.dead_time_ns = f.number("dead_time_ns", d.dead_time_ns);
  d.herald_efficiency = f.number("herald_efficiency", d.herald_efficiency);
  d.herald_jitter_sigma_ns = f.number("herald_jitter_sigma_ns", d.herald_jitter_sigma_ns);
  f.finish();
  require(d.efficiency >= 0.0 && d.efficiency <= 1.0, f.at("efficiency"), "must be in [0, 1]");
  require(d.herald_efficiency >= 0.0 && d.herald_efficiency <= 1.0, f.at("herald_efficiency"),
          "must be in [0, 1]");
  require(d.jitter_sigma_ns >= 0.0, f.at("jitter_sigma_ns"), "must be >= 0");
  require(d.herald_jitter_sigma_ns >= 0.0, f.at("herald_jitter_sigma_ns"), "must be >= 0");
  require(d.blur_sigma_px >= 0.0, f.at("blur_sigma_px"), "must be >= 0");
  require(d.dark_rate_per_s >= 0.0, f.at("dark_rate_per_s"), "must be >= 0");
  require(d.dead_time_ns >= 0.0, f.at("dead_time_ns"), "must be >= 0");
  return d;
}

json detector_json(const DetectorModel &d) {
  return {{"efficiency", d.efficiency},
          {"jitter_sigma_ns", d.jitter_sigma_ns},
          {"blur_sigma_px", d.blur_sigma_px},
          {"dark_rate_per_s", d.dark_rate_per_s},
          {"dead_time_ns", d.dead_time_ns},
          {"herald_efficiency", d.herald_efficiency},
          {"herald_jitter_sigma_ns", d.herald_jitter_sigma_ns}};
}

json source_json(const SourceSpec &s) {
  json j = {{"kind", to_string(s.kind)}, {"mean_photons", s.mean_photons}};
  if (s.g2_override) j["g2_override"] = *s.g2_override;
  return j;
}

} // namespace

std::string to_string(SourceKind kind) {
  switch (kind) {
  case SourceKind::coherent: return "coherent";
  case SourceKind::thermal: return "thermal";
  case SourceKind::heralded_single_photon: return "heralded_single_photon";
  }
  return "unknown";
}

SourceKind parse_source_kind(const std::string &name) {
  if (name == "coherent") return SourceKind::coherent;
  if (name == "thermal") return SourceKind::thermal;
  if (name == "heralded_single_photon" || name == "single_photon")
    return SourceKind::heralded_single_photon;
  throw config_error("unknown source kind '" + name +
                     "' (coherent, thermal, heralded_single_photon)");
}

double SourceSpec::g2() const noexcept {
  if (g2_override) return *g2_override;
  switch (kind) {
  case SourceKind::coherent: return 1.0;
  case SourceKind::thermal: return 2.0;
  case SourceKind::heralded_single_photon: return 0.0;
  }
  return 1.0;
}

DetectorModel DetectorModel::ideal() { return {}; }

DetectorModel DetectorModel::tpx3cam() {
  DetectorModel d;
  d.efficiency = 0.07;
  d.jitter_sigma_ns = 8.3 / 2.3548;
  d.blur_sigma_px = 2.0;
  d.dark_rate_per_s = 5e4;
  d.dead_time_ns = 1000.0;
  d.herald_efficiency = 0.6;
  d.herald_jitter_sigma_ns = 0.1;
  return d;
}

std::uint64_t ClockModel::pulse_period_ps() const {
  auto ps = std::llround(pulse_period_ns * 1000.0);
  if (ps < 1) throw config_error("clock.pulse_period_ns must be at least 1 ps");
  return static_cast<std::uint64_t>(ps);
}

PhaseMask ExperimentConfig::signal_phase() const {
  return shear ? apply_shear(mask, *shear) : mask;
}

double ExperimentConfig::signal_mean_photons() const noexcept {
  return signal.kind == SourceKind::heralded_single_photon ? 1.0 : signal.mean_photons;
}

double ExperimentConfig::reference_mean_photons() const noexcept {
  return epsilon * signal_mean_photons();
}

json ExperimentConfig::to_json() const {
  json beam_j = {{"waist_px", beam.waist_px}};
  if (beam.center_x || beam.center_y)
    beam_j["center"] = {beam.center_x.value_or((grid.width() - 1) / 2.0),
                        beam.center_y.value_or((grid.height() - 1) / 2.0)};
  json j = {
      {"grid", {{"width", grid.width()}, {"height", grid.height()}}},
      {"signal", source_json(signal)},
      {"reference", {{"kind", to_string(reference.kind)}}},
      {"epsilon", epsilon},
      {"mode_overlap", mode_overlap},
      {"beam", beam_j},
      {"mask", mask_spec},
      {"detector", detector_json(detector)},
      {"clock",
       {{"pulse_period_ns", clock.pulse_period_ns}, {"coherence_trials", clock.coherence_trials}}},
      {"trials", trials},
      {"rng_seed", rng_seed},
      {"three_photon_bound", three_photon_bound},
  };
  if (reference.g2_override) j["reference"]["g2_override"] = *reference.g2_override;
  if (shear) j["shear"] = {{"k0", shear->k0}, {"axis", shear->axis == Axis::x ? "x" : "y"}};
  return j;
}

std::string ExperimentConfig::digest() const { return sha256_hex(to_json().dump()); }

PhaseMask build_mask(PixelGrid grid, const json &spec, const std::filesystem::path &base_dir) {
  Fields f(spec, "config.mask");
  std::string type = f.text("type", "flat");
  if (type == "flat") {
    double value = f.number("value", 0.0);
    f.finish();
    return PhaseMask(grid, value);
  }
  if (type == "quadratic") {
    double a = f.number("a", 0.0);
    double c = f.number("center", (grid.width() - 1) / 2.0);
    f.finish();
    return make_quadratic_mask(grid, a, c);
  }
  if (type == "checkerboard") {
    auto square = f.count("square", 8);
    f.mark("levels");
    std::vector<double> levels{0.0, std::numbers::pi / 2, std::numbers::pi,
                               3 * std::numbers::pi / 2};
    if (f.has("levels")) {
      const json &l = f.raw("levels");
      if (!l.is_array() || l.empty()) Fields::fail(f.at("levels"), "expected a non-empty array");
      levels.clear();
      for (const auto &v : l) {
        if (!v.is_number()) Fields::fail(f.at("levels"), "levels must be numbers (radians)");
        levels.push_back(v.get<double>());
      }
    }
    f.finish();
    require(square >= 1 && square <= 65535, f.at("square"), "must be >= 1");
    return make_checkerboard_mask(grid, static_cast<int>(square), levels);
  }
  if (type == "file") {
    std::string p = f.text("path", "");
    f.mark("sha256");
    f.finish();
    require(!p.empty(), f.at("path"), "required for a file mask");
    std::filesystem::path path(p);
    if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
    PhaseMask m = load_mask(path);
    if (!(m.grid() == grid))
      Fields::fail(f.at("path"), "mask is " + std::to_string(m.grid().width()) + "x" +
                                     std::to_string(m.grid().height()) +
                                     " but the grid is " + std::to_string(grid.width()) + "x" +
                                     std::to_string(grid.height()));
    return m;
  }
  Fields::fail(f.at("type"), "unknown mask type '" + type + "' (flat, quadratic, checkerboard, file)");
}

ExperimentConfig parse_config(const json &doc, const std::filesystem::path &base_dir) {
  Fields f(doc, "config");
  ExperimentConfig c;

  if (auto g = f.object("grid")) {
    auto w = g->count("width", 60), h = g->count("height", 60);
    g->finish();
    require(w >= 1 && w <= 65535, g->at("width"), "must be in [1, 65535]");
    require(h >= 1 && h <= 65535, g->at("height"), "must be in [1, 65535]");
    c.grid = PixelGrid(static_cast<int>(w), static_cast<int>(h));
  }
  if (auto s = f.object("signal")) c.signal = parse_source(*s, false);
  if (auto r = f.object("reference")) c.reference = parse_source(*r, true);
  c.epsilon = f.number("epsilon", 1.0);
  require(c.epsilon > 0.0, f.at("epsilon"), "must be > 0");
  c.mode_overlap = f.number("mode_overlap", 1.0);
  require(c.mode_overlap >= 0.0 && c.mode_overlap <= 1.0, f.at("mode_overlap"),
          "must be in [0, 1]");

  if (auto b = f.object("beam")) {
    c.beam.waist_px = b->number("waist_px", 15.0);
    require(c.beam.waist_px > 0.0, b->at("waist_px"), "must be > 0");
    b->mark("center");
    if (b->has("center")) {
      const json &ctr = b->raw("center");
      if (!ctr.is_array() || ctr.size() != 2 || !ctr[0].is_number() || !ctr[1].is_number())
        Fields::fail(b->at("center"), "expected [x, y]");
      c.beam.center_x = ctr[0].get<double>();
      c.beam.center_y = ctr[1].get<double>();
    }
    b->finish();
  }

  f.mark("mask");
  if (f.has("mask")) c.mask_spec = doc["mask"];
  c.mask = build_mask(c.grid, c.mask_spec, base_dir);
  if (c.mask_spec.value("type", "") == "file") {
    std::filesystem::path p(c.mask_spec["path"].get<std::string>());
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    c.mask_spec["sha256"] = sha256_file(p);
  }

  if (auto s = f.object("shear")) {
    ShearSpec sh;
    sh.k0 = s->number("k0", 0.0);
    std::string axis = s->text("axis", "x");
    s->finish();
    if (axis == "x")
      sh.axis = Axis::x;
    else if (axis == "y")
      sh.axis = Axis::y;
    else
      Fields::fail(s->at("axis"), "must be \"x\" or \"y\"");
    c.shear = sh;
  }

  f.mark("detector");
  if (f.has("detector")) c.detector = parse_detector(doc["detector"], f.at("detector"));

  if (auto k = f.object("clock")) {
    c.clock.pulse_period_ns = k->number("pulse_period_ns", 12.5);
    c.clock.coherence_trials = k->count("coherence_trials", 1);
    k->finish();
    require(c.clock.pulse_period_ns >= 0.001, k->at("pulse_period_ns"), "must be >= 0.001");
    require(c.clock.coherence_trials >= 1, k->at("coherence_trials"), "must be >= 1");
  }
  c.trials = f.count("trials", 1);
  require(c.trials >= 1, f.at("trials"), "must be >= 1");
  c.rng_seed = f.count("rng_seed", 0);
  c.three_photon_bound = f.number("three_photon_bound", 1e-2);
  require(c.three_photon_bound > 0.0, f.at("three_photon_bound"), "must be > 0");
  f.finish();

  if (c.signal.kind == SourceKind::heralded_single_photon &&
      c.reference.kind != SourceKind::coherent)
    Fields::fail("config.reference.kind",
                 "the heralded two-photon backend needs a coherent reference");
  // Timestamps must stay representable.
  long double span = static_cast<long double>(c.trials) * c.clock.pulse_period_ps();
  require(span < 1.0e18L, "config.trials", "run too long for 64-bit picosecond timestamps");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error &e) {
    throw config_error(path.string() + ": invalid JSON: " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

} // namespace iholo
