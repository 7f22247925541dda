#pragma once

#include <iholo/field.hpp>
#include <iholo/grid.hpp>
#include <iholo/phase_mask.hpp>

#include <span>
#include <vector>

/// Closed-form predictions for intensity-correlation holography. These are the
/// reference values every simulation test is checked against.
namespace iholo::theory {

/// A = 2 + g2_s / epsilon + epsilon g2_r. Throws on epsilon <= 0 or negative g2.
double background_A(double g2_s, double g2_r, double epsilon);

struct VisibilityModel {
  double g2_s{1.0};
  double g2_r{1.0};
  double epsilon{1.0};
  double M{1.0}; ///< phenomenological mode-match factor in [0, 1]
};

/// V = 2 M / A.
double visibility(const VisibilityModel &model);

struct OptimalEpsilon {
  double epsilon{0.0};
  /// True when g2_s == 0: V increases monotonically as epsilon -> 0 and the
  /// supremum V = M is approached but not attained.
  bool at_supremum{false};
};

/// Imbalance minimizing A: sqrt(g2_s / g2_r).
OptimalEpsilon optimal_epsilon(double g2_s, double g2_r);

/// General normalized correlation:
/// 1/4 (2 + g2_s/eps + eps g2_r - 2 Re[g1_s g1_r^*]).
double gtilde_from_coherence(double g2_s, double g2_r, double epsilon,
                             Complex g1_s, Complex g1_r);

/// 1/4 (A - 2 M cos[phi(r1) - phi(r2)]) for single-mode inputs.
double predict_gtilde(const PhaseMask &mask, Pixel r1, Pixel r2,
                      const VisibilityModel &model);

/// Hologram at fixed r2 (reference offset delta = phi(r2)):
/// I(r) = <I_s(r)> <I_r(r2)> (A/4 - M cos[phi(r) - delta] / 2).
std::vector<double> predict_cross_section(const PhaseMask &mask, Pixel r2,
                                          std::span<const double> mean_I_s,
                                          double mean_I_r_at_r2,
                                          const VisibilityModel &model);

/// Fringe-amplitude factor of a Gaussian blur of standard deviation dx (px)
/// on a carrier of k0 rad/px: exp(-k0^2 dx^2 / 2).
double blur_attenuation(double k0, double dx);

struct VisibilityPoint {
  double epsilon;
  double V;
};

/// V(epsilon) on a logarithmic grid of n points in [eps_min, eps_max].
std::vector<VisibilityPoint> visibility_curve(double g2_s, double g2_r, double M,
                                              double eps_min, double eps_max,
                                              std::size_t n);

} // namespace iholo::theory
