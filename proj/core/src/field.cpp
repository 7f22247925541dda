#include <iholo/error.hpp>
#include <iholo/field.hpp>

#include <cmath>

namespace iholo {

ComplexField::ComplexField(PixelGrid grid) : grid_(grid), amp_(grid.size()) {}

ComplexField::ComplexField(PixelGrid grid, std::vector<Complex> amplitudes)
    : grid_(grid), amp_(std::move(amplitudes)) {
  if (amp_.size() != grid_.size()) throw config_error("field size does not match its grid");
}

double ComplexField::norm_squared() const noexcept {
  double s = 0.0;
  for (const Complex &a : amp_) s += std::norm(a);
  return s;
}

ComplexField ComplexField::normalized() const {
  double n = norm_squared();
  if (!(n > 0.0)) throw numeric_error("cannot normalize a zero field");
  double scale = 1.0 / std::sqrt(n);
  std::vector<Complex> out(amp_.size());
  for (std::size_t i = 0; i < amp_.size(); ++i) out[i] = amp_[i] * scale;
  return {grid_, std::move(out)};
}

ComplexField ComplexField::with_phase(const PhaseMask &mask) const {
  if (!(mask.grid() == grid_)) throw config_error("mask grid does not match field grid");
  std::vector<Complex> out(amp_.size());
  auto phi = mask.values();
  for (std::size_t i = 0; i < amp_.size(); ++i) out[i] = amp_[i] * std::polar(1.0, phi[i]);
  return {grid_, std::move(out)};
}

std::vector<double> ComplexField::intensity() const {
  std::vector<double> out(amp_.size());
  for (std::size_t i = 0; i < amp_.size(); ++i) out[i] = std::norm(amp_[i]);
  return out;
}

ComplexField gaussian_beam(PixelGrid grid, const BeamSpec &beam) {
  if (!(beam.waist_px > 0.0)) throw config_error("beam waist must be positive");
  double cx = beam.center_x.value_or((grid.width() - 1) / 2.0);
  double cy = beam.center_y.value_or((grid.height() - 1) / 2.0);
  std::vector<Complex> amp(grid.size());
  double w2 = beam.waist_px * beam.waist_px;
  for (int y = 0; y < grid.height(); ++y)
    for (int x = 0; x < grid.width(); ++x) {
      double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      // amplitude exp(-r^2/w^2) gives intensity exp(-2 r^2/w^2)
      amp[grid.index(x, y)] = std::exp(-r2 / w2);
    }
  return ComplexField(grid, std::move(amp)).normalized();
}

Complex first_order_coherence(const ComplexField &field, Pixel r1, Pixel r2) {
  Complex a = field.at(r1);
  Complex b = field.at(r2);
  double n = std::abs(a) * std::abs(b);
  if (!(n > 0.0)) throw numeric_error("first-order coherence undefined at zero amplitude");
  return std::conj(a) * b / n;
}

ComplexField field_from_profile(std::span<const double> intensity,
                                std::span<const double> phase) {
  if (intensity.size() != phase.size() || intensity.empty())
    throw config_error("intensity and phase profiles must be non-empty and equally long");
  PixelGrid g(static_cast<int>(intensity.size()), 1);
  std::vector<Complex> amp(intensity.size());
  for (std::size_t i = 0; i < amp.size(); ++i) {
    if (intensity[i] < 0.0) throw config_error("negative intensity in profile");
    amp[i] = std::polar(std::sqrt(intensity[i]), phase[i]);
  }
  return {g, std::move(amp)};
}

} // namespace iholo
