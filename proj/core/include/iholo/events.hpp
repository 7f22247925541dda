#pragma once

#include <iholo/error.hpp>
#include <iholo/grid.hpp>

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace iholo::events {

enum class Channel : std::uint8_t { left = 0, right = 1, herald = 2 };

/// One time-tagged detection. Herald events carry x = y = 0.
struct DetectionEvent {
  std::uint64_t t{0}; ///< picoseconds since run start
  std::uint16_t x{0};
  std::uint16_t y{0};
  Channel channel{Channel::left};

  friend bool operator==(const DetectionEvent &, const DetectionEvent &) = default;
};

/// Stream order: by time, ties broken by (channel, x, y).
inline bool stream_less(const DetectionEvent &a, const DetectionEvent &b) noexcept {
  if (a.t != b.t) return a.t < b.t;
  if (a.channel != b.channel) return a.channel < b.channel;
  if (a.x != b.x) return a.x < b.x;
  return a.y < b.y;
}

inline bool is_camera(Channel c) noexcept { return c != Channel::herald; }

struct StreamHeader {
  std::uint16_t width{60};
  std::uint16_t height{60};
  std::uint64_t pulse_period_ps{12500};
  nlohmann::json metadata = nlohmann::json::object();

  PixelGrid grid() const { return {width, height}; }
  friend bool operator==(const StreamHeader &, const StreamHeader &) = default;
};

struct EventStream {
  StreamHeader header;
  std::vector<DetectionEvent> events;
};

inline constexpr std::array<char, 4> kMagic{'I', 'I', 'H', '1'};
inline constexpr std::size_t kRecordSize = 13;

class StreamError : public Error {
public:
  enum class Code { bad_magic, bad_header, truncated, out_of_bounds, unordered, bad_channel, header_mismatch, io };

  StreamError(Code code, const std::string &what, std::optional<std::uint64_t> record = {})
      : Error(code == Code::io ? ErrorKind::io : ErrorKind::format, what),
        code_(code), record_(record) {}

  Code code() const noexcept { return code_; }
  /// Zero-based index of the offending record, when the error concerns one.
  std::optional<std::uint64_t> record() const noexcept { return record_; }

private:
  Code code_;
  std::optional<std::uint64_t> record_;
};

/// Incremental writer of the binary format:
///   "IIH1" | u16 width | u16 height | u64 pulse_period_ps | u32 n | n bytes JSON
///   then 13-byte records: u8 channel | u16 x | u16 y | u64 t
/// All integers little-endian.
class StreamWriter {
public:
  StreamWriter(std::ostream &out, const StreamHeader &header);

  /// Rejects out-of-order or out-of-bounds events.
  void write(const DetectionEvent &event);
  void flush();

  std::uint64_t bytes_written() const noexcept { return bytes_; }
  std::uint64_t records_written() const noexcept { return records_; }

private:
  std::ostream &out_;
  StreamHeader header_;
  std::vector<char> buffer_;
  std::optional<DetectionEvent> last_;
  std::uint64_t bytes_{0};
  std::uint64_t records_{0};
};

/// Writes header and records; returns the byte count.
std::uint64_t write_stream(const EventStream &stream, std::ostream &out);

/// Constant-memory reader. Validates magic, bounds, channel and ordering.
class StreamReader {
public:
  explicit StreamReader(std::istream &in);

  const StreamHeader &header() const noexcept { return header_; }
  /// Next record, or nullopt at a clean end of stream.
  std::optional<DetectionEvent> next();
  std::uint64_t records_read() const noexcept { return index_; }

private:
  bool fill(std::size_t need);

  std::istream &in_;
  StreamHeader header_;
  std::vector<char> buffer_;
  std::size_t pos_{0};
  std::size_t end_{0};
  std::uint64_t index_{0};
  std::optional<DetectionEvent> last_;
};

EventStream read_stream(std::istream &in);
EventStream read_stream_file(const std::string &path);
std::uint64_t write_stream_file(const EventStream &stream, const std::string &path);

/// k-way merge by stream order. Headers must agree on grid and pulse period;
/// the first header's metadata is kept.
EventStream merge_streams(std::span<const EventStream> streams);

/// Sorted vectors merged in stream order.
std::vector<DetectionEvent> merge_sorted(std::vector<std::vector<DetectionEvent>> parts);

/// "channel,x,y,t_ps" rows.
void export_csv(const EventStream &stream, std::ostream &out);

struct StreamSummary {
  StreamHeader header;
  std::array<std::uint64_t, 3> counts{};
  std::uint64_t first_t{0};
  std::uint64_t last_t{0};
};

StreamSummary summarize(std::istream &in);
nlohmann::json to_json(const StreamSummary &summary);

} // namespace iholo::events
