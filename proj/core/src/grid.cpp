#include <iholo/error.hpp>
#include <iholo/grid.hpp>

#include <numeric>
#include <string>

namespace iholo {

PixelGrid::PixelGrid(int width, int height) : width_(width), height_(height) {
  if (width <= 0 || height <= 0 || width > 65535 || height > 65535)
    throw config_error("grid dimensions must be in [1, 65535], got " + std::to_string(width) +
                       "x" + std::to_string(height));
}

double PixelMap::total() const { return std::accumulate(values.begin(), values.end(), 0.0); }

} // namespace iholo
