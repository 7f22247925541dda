#include <iholo/correlator.hpp>
#include <iholo/error.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>
#include <unordered_set>

namespace iholo::corr {

using events::Channel;
using nlohmann::json;

namespace {

const char *mode_name(CoincidenceMode m) {
  return m == CoincidenceMode::twofold ? "twofold" : "threefold";
}
const char *pairing_name(PairingPolicy p) {
  return p == PairingPolicy::all_pairs ? "all_pairs" : "unique";
}
const char *window_name(WindowConvention w) {
  return w == WindowConvention::centered ? "centered" : "full_width";
}

Error format_error(const std::string &what) { return {ErrorKind::format, what}; }

} // namespace

CorrelationTensor::CorrelationTensor(PixelGrid g, CorrelatorOptions opts)
    : grid(g), options(opts), singles_left(g.size()), singles_right(g.size()) {}

void CorrelationTensor::add(std::size_t r1, std::size_t r2, std::uint64_t n) {
  counts[key(r1, r2)] += n;
  total += n;
}

std::uint64_t CorrelationTensor::at(Pixel r1, Pixel r2) const {
  auto it = counts.find(key(grid.index(r1), grid.index(r2)));
  return it == counts.end() ? 0 : it->second;
}

std::vector<CorrelationTensor::Entry> CorrelationTensor::sorted_entries() const {
  std::vector<Entry> out;
  out.reserve(counts.size());
  const std::size_t P = grid.size();
  for (const auto &[k, n] : counts) out.push_back({k / P, k % P, n});
  std::sort(out.begin(), out.end(), [](const Entry &a, const Entry &b) {
    return a.r1 != b.r1 ? a.r1 < b.r1 : a.r2 < b.r2;
  });
  return out;
}

std::uint64_t CorrelationTensor::singles_left_total() const {
  std::uint64_t s = 0;
  for (auto v : singles_left) s += v;
  return s;
}

std::uint64_t CorrelationTensor::singles_right_total() const {
  std::uint64_t s = 0;
  for (auto v : singles_right) s += v;
  return s;
}

void CorrelationTensor::merge(const CorrelationTensor &other) {
  if (!(other.grid == grid)) throw config_error("cannot merge tensors over different grids");
  for (const auto &[k, n] : other.counts) counts[k] += n;
  total += other.total;
  for (std::size_t i = 0; i < singles_left.size(); ++i) {
    singles_left[i] += other.singles_left[i];
    singles_right[i] += other.singles_right[i];
  }
  heralds += other.heralds;
}

CoincidenceEngine::CoincidenceEngine(PixelGrid grid, CorrelatorOptions options)
    : tensor_(grid, options), half_(options.half_width_ps()) {
  if (options.tau_w_ps == 0) throw config_error("coincidence window must be positive");
}

void CoincidenceEngine::push(std::span<const DetectionEvent> batch) {
  for (const auto &e : batch) push(e, true);
}

void CoincidenceEngine::push(const DetectionEvent &event, bool owned) {
  if (last_ && events::stream_less(event, *last_))
    throw events::StreamError(events::StreamError::Code::unordered,
                              "correlator input is not in stream order");
  last_ = event;
  if (events::is_camera(event.channel) && !tensor_.grid.contains(event.x, event.y))
    throw events::StreamError(events::StreamError::Code::out_of_bounds,
                              "event pixel outside the correlator grid");
  evict(event.t);
  if (event.channel == Channel::herald)
    on_herald(event, owned);
  else
    on_camera(event, owned);
}

void CoincidenceEngine::evict(std::uint64_t now) {
  auto stale = [&](std::uint64_t t) { return t + half_ < now; };
  while (!left_.empty() && stale(left_.front().t)) left_.pop_front();
  while (!right_.empty() && stale(right_.front().t)) right_.pop_front();
  if (tensor_.options.mode == CoincidenceMode::threefold) {
    // Every herald up to now has been seen, so pairs whose herald window has
    // closed can be decided.
    auto done = std::stable_partition(pending_.begin(), pending_.end(),
                                      [&](const PendingPair &p) { return !stale(p.t_first); });
    for (auto it = done; it != pending_.end(); ++it)
      if (herald_between(it->t_second - std::min(it->t_second, half_), it->t_first + half_))
        tensor_.add(it->left, it->right);
    pending_.erase(done, pending_.end());
    while (!heralds_.empty() && heralds_.front() + 2 * half_ < now) heralds_.pop_front();
  }
}

bool CoincidenceEngine::herald_between(std::uint64_t lo, std::uint64_t hi) const {
  auto it = std::lower_bound(heralds_.begin(), heralds_.end(), lo);
  return it != heralds_.end() && *it <= hi;
}

void CoincidenceEngine::on_herald(const DetectionEvent &event, bool owned) {
  if (owned) ++tensor_.heralds;
  if (tensor_.options.mode == CoincidenceMode::threefold) heralds_.push_back(event.t);
}

void CoincidenceEngine::emit_pair(std::uint32_t left, std::uint32_t right, std::uint64_t t_first,
                                  std::uint64_t t_second) {
  if (tensor_.options.mode == CoincidenceMode::twofold)
    tensor_.add(left, right);
  else
    pending_.push_back({t_first, t_second, left, right});
}

void CoincidenceEngine::on_camera(const DetectionEvent &event, bool owned) {
  const bool is_left = event.channel == Channel::left;
  auto pixel = static_cast<std::uint32_t>(tensor_.grid.index(event.x, event.y));
  if (owned) ++(is_left ? tensor_.singles_left : tensor_.singles_right)[pixel];
  auto &other = is_left ? right_ : left_;
  auto &mine = is_left ? left_ : right_;
  bool used = false;
  if (tensor_.options.pairing == PairingPolicy::all_pairs) {
    for (const Slot &s : other) {
      if (!s.owned) continue;
      if (is_left)
        emit_pair(pixel, s.pixel, s.t, event.t);
      else
        emit_pair(s.pixel, pixel, s.t, event.t);
    }
  } else {
    for (Slot &s : other) {
      if (s.used) continue;
      s.used = used = true;
      if (is_left)
        emit_pair(pixel, s.pixel, s.t, event.t);
      else
        emit_pair(s.pixel, pixel, s.t, event.t);
      break;
    }
  }
  mine.push_back({event.t, pixel, owned, used});
}

CorrelationTensor CoincidenceEngine::finish() {
  if (tensor_.options.mode == CoincidenceMode::threefold) {
    for (const PendingPair &p : pending_)
      if (herald_between(p.t_second - std::min(p.t_second, half_), p.t_first + half_))
        tensor_.add(p.left, p.right);
    pending_.clear();
  }
  left_.clear();
  right_.clear();
  heralds_.clear();
  return tensor_;
}

std::uint64_t trials_of(const events::StreamHeader &header, std::span<const DetectionEvent> events) {
  const json &m = header.metadata;
  if (m.is_object() && m.contains("trials") && m["trials"].is_number_unsigned())
    return m["trials"].get<std::uint64_t>();
  if (events.empty() || header.pulse_period_ps == 0) return 0;
  return (events.back().t - events.front().t) / header.pulse_period_ps + 1;
}

CorrelationTensor correlate(const events::EventStream &stream, const CorrelatorOptions &options,
                            unsigned threads) {
  const auto &ev = stream.events;
  const PixelGrid grid = stream.header.grid();
  const bool parallel = threads > 1 && options.pairing == PairingPolicy::all_pairs &&
                        options.mode == CoincidenceMode::twofold && ev.size() >= 4 * threads;
  CorrelationTensor result(grid, options);
  if (!parallel) {
    CoincidenceEngine engine(grid, options);
    for (const auto &e : ev) engine.push(e, true);
    result = engine.finish();
  } else {
    if (!std::is_sorted(ev.begin(), ev.end(), events::stream_less))
      throw events::StreamError(events::StreamError::Code::unordered,
                                "correlator input is not in stream order");
    const std::uint64_t half = options.half_width_ps();
    std::vector<CorrelationTensor> parts(threads);
    auto run = [&](unsigned k) {
      std::size_t lo = ev.size() * k / threads, hi = ev.size() * (k + 1) / threads;
      CoincidenceEngine engine(grid, options);
      if (lo < hi) {
        std::uint64_t limit = ev[hi - 1].t + half;
        for (std::size_t i = lo; i < ev.size() && (i < hi || ev[i].t <= limit); ++i)
          engine.push(ev[i], i < hi);
      }
      parts[k] = engine.finish();
    };
    {
      std::vector<std::jthread> pool;
      for (unsigned k = 0; k < threads; ++k) pool.emplace_back(run, k);
    }
    for (const auto &p : parts) result.merge(p);
  }
  result.trials = trials_of(stream.header, ev);
  return result;
}

CorrelationTensor twofold_coincidences(const events::EventStream &stream, std::uint64_t tau_w_ps,
                                       PairingPolicy pairing) {
  CorrelatorOptions o;
  o.tau_w_ps = tau_w_ps;
  o.pairing = pairing;
  return correlate(stream, o, 1);
}

CorrelationTensor threefold_coincidences(const events::EventStream &stream, std::uint64_t tau_w_ps) {
  CorrelatorOptions o;
  o.tau_w_ps = tau_w_ps;
  o.mode = CoincidenceMode::threefold;
  return correlate(stream, o, 1);
}

Eigen::MatrixXd marginal_x(const CorrelationTensor &tensor) {
  const PixelGrid &g = tensor.grid;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(g.width(), g.width());
  const std::size_t P = g.size();
  for (const auto &[k, n] : tensor.counts)
    m(g.pixel(k / P).x, g.pixel(k % P).x) += static_cast<double>(n);
  return m;
}

std::vector<double> singles_marginal_x(const PixelGrid &grid, std::span<const std::uint64_t> singles) {
  std::vector<double> out(static_cast<std::size_t>(grid.width()), 0.0);
  for (std::size_t i = 0; i < singles.size(); ++i)
    out[static_cast<std::size_t>(grid.pixel(i).x)] += static_cast<double>(singles[i]);
  return out;
}

PixelMap cross_section(const CorrelationTensor &tensor, std::span<const Pixel> region) {
  const PixelGrid &g = tensor.grid;
  std::vector<char> in(g.size(), 0);
  for (Pixel p : region) {
    if (!g.contains(p)) throw config_error("cross-section pixel outside the grid");
    in[g.index(p)] = 1;
  }
  PixelMap out(g);
  const std::size_t P = g.size();
  for (const auto &[k, n] : tensor.counts)
    if (in[k % P]) out.values[k / P] += static_cast<double>(n);
  return out;
}

PixelMap cross_section(const CorrelationTensor &tensor, Pixel r2) {
  return cross_section(tensor, std::span<const Pixel>(&r2, 1));
}

GtildeMap normalize_gtilde(const CorrelationTensor &tensor) {
  const std::size_t P = tensor.grid.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  GtildeMap g;
  g.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(P));
  for (std::size_t i = 0; i < P; ++i) {
    if (tensor.singles_left[i] == 0) g.excluded_left.push_back(i);
    if (tensor.singles_right[i] == 0) g.excluded_right.push_back(i);
  }
  if (tensor.trials == 0) throw Error(ErrorKind::no_data, "tensor records no trials");
  const double T = static_cast<double>(tensor.trials);
  for (const auto &[k, n] : tensor.counts) {
    std::size_t a = k / P, b = k % P;
    g.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
        static_cast<double>(n) * T /
        (static_cast<double>(tensor.singles_left[a]) * static_cast<double>(tensor.singles_right[b]));
  }
  for (auto i : g.excluded_left) g.values.row(static_cast<Eigen::Index>(i)).setConstant(nan);
  for (auto i : g.excluded_right) g.values.col(static_cast<Eigen::Index>(i)).setConstant(nan);
  return g;
}

GtildeX normalize_gtilde_x(const CorrelationTensor &tensor) {
  if (tensor.trials == 0) throw Error(ErrorKind::no_data, "tensor records no trials");
  const int W = tensor.grid.width();
  GtildeX g;
  g.counts = marginal_x(tensor);
  auto sl = singles_marginal_x(tensor.grid, tensor.singles_left);
  auto sr = singles_marginal_x(tensor.grid, tensor.singles_right);
  const double T = static_cast<double>(tensor.trials);
  g.values.resize(W, W);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int x = 0; x < W; ++x) {
    if (sl[x] == 0) g.excluded_left.push_back(x);
    if (sr[x] == 0) g.excluded_right.push_back(x);
  }
  for (int a = 0; a < W; ++a)
    for (int b = 0; b < W; ++b)
      g.values(a, b) = (sl[a] > 0 && sr[b] > 0) ? g.counts(a, b) * T / (sl[a] * sr[b]) : nan;
  return g;
}

void write_tensor_csv(const CorrelationTensor &tensor, std::ostream &out) {
  out << "x1,y1,x2,y2,count\n";
  for (const auto &e : tensor.sorted_entries()) {
    Pixel a = tensor.grid.pixel(e.r1), b = tensor.grid.pixel(e.r2);
    out << a.x << ',' << a.y << ',' << b.x << ',' << b.y << ',' << e.count << '\n';
  }
  if (!out) throw io_error("failed to write tensor CSV");
}

json tensor_summary(const CorrelationTensor &t) {
  return {{"N", t.total},
          {"tau_w_ps", t.options.tau_w_ps},
          {"window", window_name(t.options.window)},
          {"mode", mode_name(t.options.mode)},
          {"pairing", pairing_name(t.options.pairing)},
          {"grid", {{"width", t.grid.width()}, {"height", t.grid.height()}}},
          {"trials", t.trials},
          {"heralds", t.heralds},
          {"singles_left_total", t.singles_left_total()},
          {"singles_right_total", t.singles_right_total()},
          {"singles_left", t.singles_left},
          {"singles_right", t.singles_right}};
}

CorrelationTensor read_tensor_csv(std::istream &csv, const json &summary) {
  CorrelatorOptions o;
  PixelGrid grid(1, 1);
  CorrelationTensor t;
  try {
    grid = PixelGrid(summary.at("grid").at("width").get<int>(), summary.at("grid").at("height").get<int>());
    o.tau_w_ps = summary.at("tau_w_ps").get<std::uint64_t>();
    o.mode = summary.value("mode", "twofold") == "threefold" ? CoincidenceMode::threefold
                                                             : CoincidenceMode::twofold;
    o.pairing = summary.value("pairing", "all_pairs") == "unique" ? PairingPolicy::unique
                                                                   : PairingPolicy::all_pairs;
    o.window = summary.value("window", "centered") == "full_width" ? WindowConvention::full_width
                                                                    : WindowConvention::centered;
    t = CorrelationTensor(grid, o);
    t.trials = summary.value("trials", std::uint64_t{0});
    t.heralds = summary.value("heralds", std::uint64_t{0});
    if (summary.contains("singles_left")) {
      t.singles_left = summary["singles_left"].get<std::vector<std::uint64_t>>();
      t.singles_right = summary.at("singles_right").get<std::vector<std::uint64_t>>();
    }
  } catch (const json::exception &e) {
    throw format_error(std::string("tensor summary: ") + e.what());
  }
  if (t.singles_left.size() != grid.size() || t.singles_right.size() != grid.size())
    throw format_error("tensor summary singles maps do not match the grid");

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(csv, line)) {
    ++lineno;
    if (line.empty() || line.rfind("x1", 0) == 0) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    long x1, y1, x2, y2;
    std::uint64_t n;
    if (!(ss >> x1 >> y1 >> x2 >> y2 >> n) || !grid.contains(static_cast<int>(x1), static_cast<int>(y1)) ||
        !grid.contains(static_cast<int>(x2), static_cast<int>(y2)))
      throw format_error("tensor CSV line " + std::to_string(lineno) + ": bad row");
    t.add(grid.index(static_cast<int>(x1), static_cast<int>(y1)),
          grid.index(static_cast<int>(x2), static_cast<int>(y2)), n);
  }
  if (summary.contains("N") && summary["N"].get<std::uint64_t>() != t.total)
    throw format_error("tensor CSV total does not match the summary N");
  return t;
}

void save_tensor(const CorrelationTensor &tensor, const std::filesystem::path &prefix) {
  auto csv_path = prefix;
  csv_path += ".csv";
  auto json_path = prefix;
  json_path += ".json";
  std::ofstream csv(csv_path);
  if (!csv) throw io_error("cannot create " + csv_path.string());
  write_tensor_csv(tensor, csv);
  std::ofstream js(json_path);
  if (!js) throw io_error("cannot create " + json_path.string());
  js << tensor_summary(tensor).dump(2) << '\n';
  if (!js) throw io_error("failed to write " + json_path.string());
}

CorrelationTensor load_tensor(const std::filesystem::path &prefix) {
  auto base = prefix;
  if (base.extension() == ".csv" || base.extension() == ".json") base.replace_extension();
  auto csv_path = base;
  csv_path += ".csv";
  auto json_path = base;
  json_path += ".json";
  std::ifstream js(json_path);
  if (!js) throw io_error("cannot open " + json_path.string());
  json summary;
  try {
    summary = json::parse(js);
  } catch (const json::parse_error &e) {
    throw format_error(json_path.string() + ": " + e.what());
  }
  std::ifstream csv(csv_path);
  if (!csv) throw io_error("cannot open " + csv_path.string());
  return read_tensor_csv(csv, summary);
}

} // namespace iholo::corr
