#pragma once

#include <iholo/grid.hpp>

#include <span>
#include <vector>

namespace iholo {

/// Wraps a phase onto the canonical branch (-pi, pi].
double wrap_phase(double phase) noexcept;

/// Phase distribution phi(r) imparted on the signal, in radians per pixel.
/// Immutable once built.
class PhaseMask {
public:
  explicit PhaseMask(PixelGrid grid, double fill = 0.0);
  PhaseMask(PixelGrid grid, std::vector<double> values);

  const PixelGrid &grid() const noexcept { return grid_; }
  double at(int x, int y) const { return values_[grid_.index(x, y)]; }
  double at(Pixel p) const { return values_[grid_.index(p)]; }
  std::span<const double> values() const noexcept { return values_; }

  PhaseMask canonicalized() const;

private:
  PixelGrid grid_;
  std::vector<double> values_;
};

enum class Axis { x, y };

/// Linear phase tilt between signal and reference (off-axis carrier).
struct ShearSpec {
  double k0{0.0}; ///< radians per pixel
  Axis axis{Axis::x};

  /// 2 pi / |k0|; infinite when k0 == 0.
  double fringe_period() const noexcept;
};

/// phi(x, y) = a (x - center_x)^2, independent of y.
PhaseMask make_quadratic_mask(PixelGrid grid, double a, double center_x);

/// Square tiles of side `square_size`; tile (i, j) takes
/// levels[(i + j) mod levels.size()].
PhaseMask make_checkerboard_mask(PixelGrid grid, int square_size,
                                 std::span<const double> phase_levels);

/// Adds k0 times the pixel coordinate along the shear axis.
PhaseMask apply_shear(const PhaseMask &mask, const ShearSpec &shear);

} // namespace iholo
