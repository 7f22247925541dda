#include <iholo/events.hpp>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <queue>

namespace iholo::events {
namespace {

constexpr std::size_t kPreamble = 4 + 2 + 2 + 8 + 4;
constexpr std::size_t kBufferRecords = 4096;

template <typename T> void put_le(char *p, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) p[i] = static_cast<char>((v >> (8 * i)) & 0xff);
}

template <typename T> T get_le(const char *p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<T>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

void encode(const DetectionEvent &e, char *p) {
  p[0] = static_cast<char>(e.channel);
  put_le<std::uint16_t>(p + 1, e.x);
  put_le<std::uint16_t>(p + 3, e.y);
  put_le<std::uint64_t>(p + 5, e.t);
}

std::string describe(std::uint64_t record) { return " at record " + std::to_string(record); }

void validate(const DetectionEvent &e, const StreamHeader &h, const std::optional<DetectionEvent> &last,
              std::uint64_t record) {
  if (static_cast<std::uint8_t>(e.channel) > 2)
    throw StreamError(StreamError::Code::bad_channel,
                      "channel " + std::to_string(static_cast<int>(e.channel)) + " is not 0, 1 or 2" +
                          describe(record),
                      record);
  if (is_camera(e.channel) ? (e.x >= h.width || e.y >= h.height) : (e.x != 0 || e.y != 0))
    throw StreamError(StreamError::Code::out_of_bounds,
                      "pixel (" + std::to_string(e.x) + ", " + std::to_string(e.y) +
                          ") outside " + std::to_string(h.width) + "x" + std::to_string(h.height) +
                          describe(record),
                      record);
  if (last && stream_less(e, *last))
    throw StreamError(StreamError::Code::unordered,
                      "event at t=" + std::to_string(e.t) + " ps precedes t=" +
                          std::to_string(last->t) + " ps" + describe(record),
                      record);
}

} // namespace

StreamWriter::StreamWriter(std::ostream &out, const StreamHeader &header)
    : out_(out), header_(header) {
  if (header.width == 0 || header.height == 0)
    throw StreamError(StreamError::Code::bad_header, "stream grid must be at least 1x1");
  std::string meta = header.metadata.dump();
  std::vector<char> pre(kPreamble);
  std::memcpy(pre.data(), kMagic.data(), 4);
  put_le<std::uint16_t>(pre.data() + 4, header.width);
  put_le<std::uint16_t>(pre.data() + 6, header.height);
  put_le<std::uint64_t>(pre.data() + 8, header.pulse_period_ps);
  put_le<std::uint32_t>(pre.data() + 16, static_cast<std::uint32_t>(meta.size()));
  out_.write(pre.data(), static_cast<std::streamsize>(pre.size()));
  out_.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  if (!out_) throw StreamError(StreamError::Code::io, "failed to write stream header");
  bytes_ = pre.size() + meta.size();
  buffer_.reserve(kBufferRecords * kRecordSize);
}

void StreamWriter::write(const DetectionEvent &event) {
  validate(event, header_, last_, records_);
  last_ = event;
  std::size_t at = buffer_.size();
  buffer_.resize(at + kRecordSize);
  encode(event, buffer_.data() + at);
  ++records_;
  bytes_ += kRecordSize;
  if (buffer_.size() >= kBufferRecords * kRecordSize) flush();
}

void StreamWriter::flush() {
  if (!buffer_.empty()) {
    out_.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
    buffer_.clear();
  }
  out_.flush();
  if (!out_) throw StreamError(StreamError::Code::io, "failed to write event records");
}

std::uint64_t write_stream(const EventStream &stream, std::ostream &out) {
  StreamWriter w(out, stream.header);
  for (const auto &e : stream.events) w.write(e);
  w.flush();
  return w.bytes_written();
}

StreamReader::StreamReader(std::istream &in) : in_(in), buffer_(kBufferRecords * kRecordSize) {
  char pre[kPreamble];
  in_.read(pre, kPreamble);
  auto got = static_cast<std::size_t>(in_.gcount());
  if (got >= 4 && std::memcmp(pre, kMagic.data(), 4) != 0)
    throw StreamError(StreamError::Code::bad_magic, "not an event stream (bad magic)");
  if (got < kPreamble) throw StreamError(StreamError::Code::truncated, "truncated stream header");
  header_.width = get_le<std::uint16_t>(pre + 4);
  header_.height = get_le<std::uint16_t>(pre + 6);
  header_.pulse_period_ps = get_le<std::uint64_t>(pre + 8);
  auto n = get_le<std::uint32_t>(pre + 16);
  if (header_.width == 0 || header_.height == 0)
    throw StreamError(StreamError::Code::bad_header, "stream grid must be at least 1x1");
  std::string meta(n, '\0');
  in_.read(meta.data(), n);
  if (static_cast<std::uint32_t>(in_.gcount()) != n)
    throw StreamError(StreamError::Code::truncated, "truncated stream metadata");
  try {
    header_.metadata = n == 0 ? nlohmann::json::object() : nlohmann::json::parse(meta);
  } catch (const nlohmann::json::parse_error &e) {
    throw StreamError(StreamError::Code::bad_header, std::string("stream metadata is not JSON: ") + e.what());
  }
}

bool StreamReader::fill(std::size_t need) {
  if (end_ - pos_ >= need) return true;
  std::memmove(buffer_.data(), buffer_.data() + pos_, end_ - pos_);
  end_ -= pos_;
  pos_ = 0;
  while (end_ < buffer_.size() && in_) {
    in_.read(buffer_.data() + end_, static_cast<std::streamsize>(buffer_.size() - end_));
    end_ += static_cast<std::size_t>(in_.gcount());
  }
  if (in_.bad()) throw StreamError(StreamError::Code::io, "read error", index_);
  return end_ - pos_ >= need;
}

std::optional<DetectionEvent> StreamReader::next() {
  if (!fill(kRecordSize)) {
    if (end_ != pos_)
      throw StreamError(StreamError::Code::truncated,
                        "stream ends inside a record" + describe(index_), index_);
    return std::nullopt;
  }
  const char *p = buffer_.data() + pos_;
  auto ch = static_cast<std::uint8_t>(p[0]);
  DetectionEvent e{get_le<std::uint64_t>(p + 5), get_le<std::uint16_t>(p + 1),
                   get_le<std::uint16_t>(p + 3), static_cast<Channel>(ch)};
  validate(e, header_, last_, index_);
  pos_ += kRecordSize;
  last_ = e;
  ++index_;
  return e;
}

EventStream read_stream(std::istream &in) {
  StreamReader r(in);
  EventStream s{r.header(), {}};
  while (auto e = r.next()) s.events.push_back(*e);
  return s;
}

EventStream read_stream_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StreamError(StreamError::Code::io, "cannot open " + path);
  return read_stream(in);
}

std::uint64_t write_stream_file(const EventStream &stream, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StreamError(StreamError::Code::io, "cannot create " + path);
  return write_stream(stream, out);
}

std::vector<DetectionEvent> merge_sorted(std::vector<std::vector<DetectionEvent>> parts) {
  std::size_t total = 0;
  for (const auto &p : parts) total += p.size();
  std::vector<DetectionEvent> out;
  out.reserve(total);
  using Head = std::pair<std::size_t, std::size_t>; // (part, position)
  auto greater = [&](const Head &a, const Head &b) {
    const auto &ea = parts[a.first][a.second];
    const auto &eb = parts[b.first][b.second];
    if (stream_less(eb, ea)) return true;
    if (stream_less(ea, eb)) return false;
    return a.first > b.first;
  };
  std::priority_queue<Head, std::vector<Head>, decltype(greater)> heap(greater);
  for (std::size_t i = 0; i < parts.size(); ++i)
    if (!parts[i].empty()) heap.push({i, 0});
  while (!heap.empty()) {
    auto [part, pos] = heap.top();
    heap.pop();
    out.push_back(parts[part][pos]);
    if (pos + 1 < parts[part].size()) heap.push({part, pos + 1});
  }
  return out;
}

EventStream merge_streams(std::span<const EventStream> streams) {
  if (streams.empty()) return {};
  const StreamHeader &h = streams.front().header;
  std::vector<std::vector<DetectionEvent>> parts;
  for (const auto &s : streams) {
    if (s.header.width != h.width || s.header.height != h.height ||
        s.header.pulse_period_ps != h.pulse_period_ps)
      throw StreamError(StreamError::Code::header_mismatch,
                        "cannot merge streams with different grids or pulse periods");
    if (!std::is_sorted(s.events.begin(), s.events.end(), stream_less))
      throw StreamError(StreamError::Code::unordered, "merge input is not in stream order");
    parts.push_back(s.events);
  }
  return {h, merge_sorted(std::move(parts))};
}

void export_csv(const EventStream &stream, std::ostream &out) {
  out << "channel,x,y,t_ps\n";
  for (const auto &e : stream.events)
    out << static_cast<int>(e.channel) << ',' << e.x << ',' << e.y << ',' << e.t << '\n';
  if (!out) throw StreamError(StreamError::Code::io, "failed to write CSV");
}

StreamSummary summarize(std::istream &in) {
  StreamReader r(in);
  StreamSummary s{r.header(), {}, 0, 0};
  bool first = true;
  while (auto e = r.next()) {
    ++s.counts[static_cast<std::size_t>(e->channel)];
    if (first) s.first_t = e->t;
    first = false;
    s.last_t = e->t;
  }
  return s;
}

nlohmann::json to_json(const StreamSummary &s) {
  return {{"width", s.header.width},
          {"height", s.header.height},
          {"pulse_period_ps", s.header.pulse_period_ps},
          {"events", s.counts[0] + s.counts[1] + s.counts[2]},
          {"left", s.counts[0]},
          {"right", s.counts[1]},
          {"herald", s.counts[2]},
          {"first_t_ps", s.first_t},
          {"last_t_ps", s.last_t},
          {"metadata", s.header.metadata}};
}

} // namespace iholo::events
