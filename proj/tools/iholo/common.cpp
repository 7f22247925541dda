#include "common.hpp"

#include <iholo/error.hpp>
#include <iholo/mask_io.hpp>
#include <iholo/simulate.hpp>

#include <fmt/format.h>

#include <fstream>
#include <sstream>

namespace iholo::cli {

unsigned GlobalOptions::thread_count() const {
  if (threads && *threads > 0) return *threads;
  return sim::default_threads();
}

json read_json(const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error &e) {
    throw Error(ErrorKind::format, path.string() + ": " + e.what());
  }
}

void ensure_parent(const fs::path &path) {
  auto parent = path.parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw io_error("cannot create " + parent.string() + ": " + ec.message());
}

void write_text(const fs::path &path, const std::string &text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot create " + path.string());
  out << text;
  if (!out) throw io_error("failed to write " + path.string());
}

void write_json(const fs::path &path, const json &doc) { write_text(path, doc.dump(2) + "\n"); }

fs::path with_suffix(const fs::path &prefix, const std::string &suffix) {
  fs::path p = prefix;
  p += suffix;
  return p;
}

void write_pgm(const fs::path &path, const PixelGrid &grid, std::span<const double> values) {
  std::ostringstream s;
  write_image_pgm(grid, values, s);
  write_text(path, s.str());
}

std::string csv_number(double v) { return fmt::format("{:.10g}", v); }

Pixel parse_pixel(const std::string &text) {
  auto comma = text.find(',');
  try {
    if (comma == std::string::npos) throw std::invalid_argument(text);
    return {std::stoi(text.substr(0, comma)), std::stoi(text.substr(comma + 1))};
  } catch (const std::exception &) {
    throw config_error("expected a pixel as x,y but got '" + text + "'");
  }
}

LoadedConfig load_experiment(const fs::path &path, const GlobalOptions &global,
                             std::optional<std::uint64_t> trials) {
  json doc = read_json(path);
  LoadedConfig out;
  out.source = path;
  if (doc.is_object() && doc.contains("config")) {
    out.pipeline = doc.value("pipeline", json::object());
    doc = doc["config"];
  }
  if (global.seed) doc["rng_seed"] = *global.seed;
  if (trials) doc["trials"] = *trials;
  out.config = parse_config(doc, path.parent_path());
  return out;
}

} // namespace iholo::cli
