#pragma once

#include <iholo/grid.hpp>
#include <iholo/phase_mask.hpp>

#include <complex>
#include <optional>
#include <span>
#include <vector>

namespace iholo {

using Complex = std::complex<double>;

/// Complex mode amplitude over a pixel grid (psi_s, psi_r).
class ComplexField {
public:
  explicit ComplexField(PixelGrid grid);
  ComplexField(PixelGrid grid, std::vector<Complex> amplitudes);

  const PixelGrid &grid() const noexcept { return grid_; }
  Complex at(int x, int y) const { return amp_[grid_.index(x, y)]; }
  Complex at(Pixel p) const { return amp_[grid_.index(p)]; }
  std::span<const Complex> amplitudes() const noexcept { return amp_; }

  /// Sum over pixels of |psi|^2.
  double norm_squared() const noexcept;
  /// Scaled so that norm_squared() == 1. Throws on a zero field.
  ComplexField normalized() const;
  /// Multiplies every pixel by exp(i phi(r)).
  ComplexField with_phase(const PhaseMask &mask) const;
  std::vector<double> intensity() const;

private:
  PixelGrid grid_;
  std::vector<Complex> amp_;
};

/// Gaussian beam profile: intensity ~ exp(-2 r^2 / waist^2).
struct BeamSpec {
  double waist_px{15.0};
  std::optional<double> center_x; ///< defaults to the grid centre
  std::optional<double> center_y;
};

/// Normalized real-valued Gaussian mode sampled at pixel centres.
ComplexField gaussian_beam(PixelGrid grid, const BeamSpec &beam);

/// Normalized first-order coherence of a single-mode field:
/// g1(r1, r2) = psi*(r1) psi(r2) / (|psi(r1)| |psi(r2)|).
Complex first_order_coherence(const ComplexField &field, Pixel r1, Pixel r2);

/// Builds sqrt(I) exp(i phi) over a width x 1 grid.
ComplexField field_from_profile(std::span<const double> intensity,
                                std::span<const double> phase);

} // namespace iholo
