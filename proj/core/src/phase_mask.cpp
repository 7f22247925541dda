#include <iholo/error.hpp>
#include <iholo/phase_mask.hpp>

#include <cmath>
#include <limits>
#include <numbers>

namespace iholo {

double wrap_phase(double phase) noexcept {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::remainder(phase, two_pi);
  if (w <= -std::numbers::pi) w += two_pi;
  return w;
}

PhaseMask::PhaseMask(PixelGrid grid, double fill) : grid_(grid), values_(grid.size(), fill) {}

PhaseMask::PhaseMask(PixelGrid grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size())
    throw config_error("phase mask has " + std::to_string(values_.size()) +
                       " values for a grid of " + std::to_string(grid_.size()) + " pixels");
  for (double v : values_)
    if (!std::isfinite(v)) throw config_error("phase mask contains a non-finite value");
}

PhaseMask PhaseMask::canonicalized() const {
  std::vector<double> out(values_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = wrap_phase(values_[i]);
  return {grid_, std::move(out)};
}

double ShearSpec::fringe_period() const noexcept {
  if (k0 == 0.0) return std::numeric_limits<double>::infinity();
  return 2.0 * std::numbers::pi / std::abs(k0);
}

PhaseMask make_quadratic_mask(PixelGrid grid, double a, double center_x) {
  std::vector<double> v(grid.size());
  for (int y = 0; y < grid.height(); ++y)
    for (int x = 0; x < grid.width(); ++x) {
      double d = x - center_x;
      v[grid.index(x, y)] = a * d * d;
    }
  return {grid, std::move(v)};
}

PhaseMask make_checkerboard_mask(PixelGrid grid, int square_size,
                                 std::span<const double> phase_levels) {
  if (square_size <= 0) throw config_error("checkerboard square size must be positive");
  if (phase_levels.empty()) throw config_error("checkerboard needs at least one phase level");
  std::vector<double> v(grid.size());
  const std::size_t n = phase_levels.size();
  for (int y = 0; y < grid.height(); ++y)
    for (int x = 0; x < grid.width(); ++x) {
      auto i = static_cast<std::size_t>(x / square_size);
      auto j = static_cast<std::size_t>(y / square_size);
      v[grid.index(x, y)] = phase_levels[(i + j) % n];
    }
  return {grid, std::move(v)};
}

PhaseMask apply_shear(const PhaseMask &mask, const ShearSpec &shear) {
  const PixelGrid &g = mask.grid();
  std::vector<double> v(mask.values().begin(), mask.values().end());
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x)
      v[g.index(x, y)] += shear.k0 * (shear.axis == Axis::x ? x : y);
  return {g, std::move(v)};
}

} // namespace iholo
