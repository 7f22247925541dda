#pragma once

#include <iholo/events.hpp>
#include <iholo/grid.hpp>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <iosfwd>
#include <span>
#include <unordered_map>
#include <vector>

/// Windowed coincidence engine producing the intensity-correlation tensor
/// G(r1, r2) between the left and right camera regions.
namespace iholo::corr {

using events::DetectionEvent;

enum class PairingPolicy { all_pairs, unique };
enum class CoincidenceMode { twofold, threefold };
/// centered: |dt| <= tau_w / 2.  full_width: |dt| <= tau_w.
enum class WindowConvention { centered, full_width };

struct CorrelatorOptions {
  std::uint64_t tau_w_ps{5000};
  CoincidenceMode mode{CoincidenceMode::twofold};
  PairingPolicy pairing{PairingPolicy::all_pairs};
  WindowConvention window{WindowConvention::centered};

  std::uint64_t half_width_ps() const noexcept {
    return window == WindowConvention::centered ? tau_w_ps / 2 : tau_w_ps;
  }
};

/// Sparse 4-D coincidence histogram with singles marginals.
struct CorrelationTensor {
  struct Entry {
    std::size_t r1;
    std::size_t r2;
    std::uint64_t count;
  };

  PixelGrid grid{1, 1};
  CorrelatorOptions options{};
  std::unordered_map<std::uint64_t, std::uint64_t> counts; ///< key r1 * P + r2
  std::uint64_t total{0};
  std::vector<std::uint64_t> singles_left;
  std::vector<std::uint64_t> singles_right;
  std::uint64_t heralds{0};
  std::uint64_t trials{0}; ///< pulses covered, for rate normalization

  CorrelationTensor() = default;
  CorrelationTensor(PixelGrid g, CorrelatorOptions opts);

  std::uint64_t key(std::size_t r1, std::size_t r2) const noexcept {
    return static_cast<std::uint64_t>(r1) * grid.size() + r2;
  }
  void add(std::size_t r1, std::size_t r2, std::uint64_t n = 1);
  std::uint64_t at(Pixel r1, Pixel r2) const;
  /// Entries ordered by (r1, r2).
  std::vector<Entry> sorted_entries() const;
  std::uint64_t singles_left_total() const;
  std::uint64_t singles_right_total() const;
  /// Adds counts and singles of another tensor over the same grid.
  void merge(const CorrelationTensor &other);
};

/// Streaming engine. Events must arrive in stream order; memory is bounded by
/// the number of events inside one window.
class CoincidenceEngine {
public:
  CoincidenceEngine(PixelGrid grid, CorrelatorOptions options);

  /// `owned` marks events whose pairs this engine is responsible for: a pair
  /// is counted only if its earlier event is owned, singles only for owned
  /// events. Used to partition a stream across workers.
  void push(const DetectionEvent &event, bool owned = true);
  void push(std::span<const DetectionEvent> batch);

  /// Current tensor; threefold pairs still awaiting a herald are not included.
  const CorrelationTensor &tensor() const noexcept { return tensor_; }
  CorrelationTensor finish();

private:
  struct Slot {
    std::uint64_t t;
    std::uint32_t pixel;
    bool owned;
    bool used;
  };
  struct PendingPair {
    std::uint64_t t_first;
    std::uint64_t t_second;
    std::uint32_t left;
    std::uint32_t right;
  };

  void on_camera(const DetectionEvent &event, bool owned);
  void on_herald(const DetectionEvent &event, bool owned);
  void evict(std::uint64_t now);
  void emit_pair(std::uint32_t left, std::uint32_t right, std::uint64_t t_first,
                 std::uint64_t t_second);
  bool herald_between(std::uint64_t lo, std::uint64_t hi) const;

  CorrelationTensor tensor_;
  std::uint64_t half_;
  std::deque<Slot> left_;
  std::deque<Slot> right_;
  std::deque<std::uint64_t> heralds_;
  std::vector<PendingPair> pending_;
  std::optional<DetectionEvent> last_;
};

/// Correlates an in-memory stream. With threads > 1 (all-pairs only) the
/// stream is cut into time chunks overlapping by one window; each pair is owned
/// by the chunk holding its earlier event, so the result equals threads == 1.
CorrelationTensor correlate(const events::EventStream &stream, const CorrelatorOptions &options,
                            unsigned threads = 1);

CorrelationTensor twofold_coincidences(const events::EventStream &stream, std::uint64_t tau_w_ps,
                                       PairingPolicy pairing = PairingPolicy::all_pairs);
CorrelationTensor threefold_coincidences(const events::EventStream &stream,
                                         std::uint64_t tau_w_ps);

/// Number of trials recorded in the stream metadata, else the pulse count
/// spanned by the events.
std::uint64_t trials_of(const events::StreamHeader &header,
                        std::span<const DetectionEvent> events);

/// G(x1, x2) = sum over y1, y2. Rows x1 (left), columns x2 (right).
Eigen::MatrixXd marginal_x(const CorrelationTensor &tensor);
std::vector<double> singles_marginal_x(const PixelGrid &grid,
                                       std::span<const std::uint64_t> singles);

/// Image over r1 summed over r2 in `region` (right-camera pixels).
PixelMap cross_section(const CorrelationTensor &tensor, std::span<const Pixel> region);
PixelMap cross_section(const CorrelationTensor &tensor, Pixel r2);

struct GtildeMap {
  Eigen::MatrixXd values; ///< P x P (left pixel, right pixel); NaN where excluded
  std::vector<std::size_t> excluded_left;
  std::vector<std::size_t> excluded_right;
};

/// G~(r1, r2) = C(r1, r2) T / (S_L(r1) S_R(r2)); pixels with zero singles are
/// excluded rather than divided by.
GtildeMap normalize_gtilde(const CorrelationTensor &tensor);

struct GtildeX {
  Eigen::MatrixXd values; ///< W x W; NaN where excluded
  Eigen::MatrixXd counts; ///< raw marginal counts
  std::vector<int> excluded_left;
  std::vector<int> excluded_right;
};

/// Same normalization on the x-marginal.
GtildeX normalize_gtilde_x(const CorrelationTensor &tensor);

/// Sorted "x1,y1,x2,y2,count" rows with a header line.
void write_tensor_csv(const CorrelationTensor &tensor, std::ostream &out);
CorrelationTensor read_tensor_csv(std::istream &csv, const nlohmann::json &summary);
/// {N, tau_w_ps, singles totals, grid, trials, mode, singles maps}.
nlohmann::json tensor_summary(const CorrelationTensor &tensor);

/// Writes <prefix>.csv and <prefix>.json.
void save_tensor(const CorrelationTensor &tensor, const std::filesystem::path &prefix);
CorrelationTensor load_tensor(const std::filesystem::path &prefix);

} // namespace iholo::corr
