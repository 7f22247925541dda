#pragma once

#include <cstddef>
#include <vector>

namespace iholo {

struct Pixel {
  int x{0};
  int y{0};

  friend bool operator==(const Pixel &, const Pixel &) = default;
};

/// Rectangular camera region measured in pixels.
class PixelGrid {
public:
  PixelGrid(int width, int height);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  bool contains(Pixel p) const noexcept { return contains(p.x, p.y); }

  /// Row-major linear index (y * width + x).
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }
  std::size_t index(Pixel p) const noexcept { return index(p.x, p.y); }
  Pixel pixel(std::size_t index) const noexcept {
    return {static_cast<int>(index % static_cast<std::size_t>(width_)),
            static_cast<int>(index / static_cast<std::size_t>(width_))};
  }

  friend bool operator==(const PixelGrid &, const PixelGrid &) = default;

private:
  int width_;
  int height_;
};

/// A real-valued image over a grid, row-major.
struct PixelMap {
  PixelGrid grid;
  std::vector<double> values;

  explicit PixelMap(PixelGrid g, double fill = 0.0)
      : grid(g), values(g.size(), fill) {}

  double &operator()(int x, int y) { return values[grid.index(x, y)]; }
  double operator()(int x, int y) const { return values[grid.index(x, y)]; }
  double total() const;
};

} // namespace iholo
