#include <iholo/error.hpp>
#include <iholo/mask_io.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

namespace iholo {
namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

Error format_error(const std::string &what) { return {ErrorKind::format, what}; }

void write_pgm_header(std::ostream &out, int w, int h) {
  out << "P5\n" << w << ' ' << h << "\n65535\n";
}

void put_u16(std::ostream &out, unsigned v) {
  char b[2] = {static_cast<char>((v >> 8) & 0xff), static_cast<char>(v & 0xff)};
  out.write(b, 2);
}

// Next header token, skipping whitespace and '#' comments.
std::string pgm_token(std::istream &in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

int pgm_int(std::istream &in, const char *what) {
  std::string tok = pgm_token(in);
  try {
    std::size_t used = 0;
    int v = std::stoi(tok, &used);
    if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception &) {
    throw format_error(std::string("PGM: bad ") + what + " '" + tok + "'");
  }
}

} // namespace

void write_mask_pgm(const PhaseMask &mask, std::ostream &out) {
  const PixelGrid &g = mask.grid();
  write_pgm_header(out, g.width(), g.height());
  for (double phi : mask.values()) {
    double u = std::fmod(phi, two_pi);
    if (u < 0) u += two_pi;
    auto v = static_cast<long>(std::lround(u * 65536.0 / two_pi)) % 65536;
    put_u16(out, static_cast<unsigned>(v));
  }
  if (!out) throw io_error("failed to write PGM mask");
}

PhaseMask read_mask_pgm(std::istream &in) {
  if (pgm_token(in) != "P5") throw format_error("PGM: expected binary P5 magic");
  int w = pgm_int(in, "width");
  int h = pgm_int(in, "height");
  int maxval = pgm_int(in, "maxval");
  PixelGrid g(w, h);
  std::vector<double> v(g.size());
  const bool wide = maxval > 255;
  for (std::size_t i = 0; i < v.size(); ++i) {
    unsigned value;
    if (wide) {
      unsigned char b[2];
      if (!in.read(reinterpret_cast<char *>(b), 2)) throw format_error("PGM: truncated pixel data");
      value = (static_cast<unsigned>(b[0]) << 8) | b[1];
    } else {
      int c = in.get();
      if (c == EOF) throw format_error("PGM: truncated pixel data");
      value = static_cast<unsigned>(c);
    }
    // 16-bit files are read with the 65536-step phase quantization the writer uses.
    double scale = wide && maxval == 65535 ? 65536.0 : maxval + 1.0;
    v[i] = wrap_phase(value * two_pi / scale);
  }
  return {g, std::move(v)};
}

void write_mask_csv(const PhaseMask &mask, std::ostream &out) {
  const PixelGrid &g = mask.grid();
  out << "x,y,radians\n";
  out.precision(17);
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) out << x << ',' << y << ',' << mask.at(x, y) << '\n';
  if (!out) throw io_error("failed to write CSV mask");
}

PhaseMask read_mask_csv(std::istream &in) {
  struct Row {
    int x, y;
    double phi;
  };
  std::vector<Row> rows;
  std::string line;
  int max_x = -1, max_y = -1;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && line.find_first_not_of("0123456789.,-+eE \r") != std::string::npos)
      continue; // header
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    Row r{};
    if (!(ss >> r.x >> r.y >> r.phi) || r.x < 0 || r.y < 0)
      throw format_error("mask CSV line " + std::to_string(lineno) + ": expected x,y,radians");
    max_x = std::max(max_x, r.x);
    max_y = std::max(max_y, r.y);
    rows.push_back(r);
  }
  if (rows.empty()) throw format_error("mask CSV has no rows");
  PixelGrid g(max_x + 1, max_y + 1);
  std::vector<double> v(g.size(), std::numeric_limits<double>::quiet_NaN());
  for (const Row &r : rows) v[g.index(r.x, r.y)] = r.phi;
  for (double p : v)
    if (std::isnan(p)) throw format_error("mask CSV does not cover every pixel of its grid");
  return {g, std::move(v)};
}

void save_mask(const PhaseMask &mask, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot create " + path.string());
  if (path.extension() == ".csv")
    write_mask_csv(mask, out);
  else
    write_mask_pgm(mask, out);
}

PhaseMask load_mask(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open mask " + path.string());
  auto ext = path.extension();
  if (ext == ".csv") return read_mask_csv(in);
  if (ext == ".pgm") return read_mask_pgm(in);
  throw Error(ErrorKind::config, "unsupported mask format '" + ext.string() + "' (use .pgm or .csv)");
}

void write_image_pgm(const PixelGrid &grid, std::span<const double> values, std::ostream &out) {
  if (values.size() != grid.size()) throw config_error("image size does not match grid");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values)
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  write_pgm_header(out, grid.width(), grid.height());
  for (double v : values) {
    unsigned q = 0;
    if (std::isfinite(v) && hi > lo) q = static_cast<unsigned>(std::lround((v - lo) / (hi - lo) * 65535.0));
    put_u16(out, q);
  }
  if (!out) throw io_error("failed to write PGM image");
}

} // namespace iholo
