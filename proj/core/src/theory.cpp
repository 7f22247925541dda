#include <iholo/error.hpp>
#include <iholo/theory.hpp>

#include <cmath>
#include <string>

namespace iholo::theory {
namespace {

void check_g2(double g2, const char *name) {
  if (!(g2 >= 0.0) || !std::isfinite(g2))
    throw config_error(std::string(name) + " must be a finite value >= 0");
}

void check_M(double M) {
  if (!(M >= 0.0 && M <= 1.0)) throw config_error("mode-match factor M must be in [0, 1]");
}

} // namespace

double background_A(double g2_s, double g2_r, double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw config_error("epsilon must be > 0");
  check_g2(g2_s, "g2_s");
  check_g2(g2_r, "g2_r");
  return 2.0 + g2_s / epsilon + epsilon * g2_r;
}

double visibility(const VisibilityModel &model) {
  check_M(model.M);
  return 2.0 * model.M / background_A(model.g2_s, model.g2_r, model.epsilon);
}

OptimalEpsilon optimal_epsilon(double g2_s, double g2_r) {
  check_g2(g2_s, "g2_s");
  check_g2(g2_r, "g2_r");
  if (g2_r == 0.0) throw config_error("optimal epsilon undefined for a reference with g2_r = 0");
  if (g2_s == 0.0) return {0.0, true};
  return {std::sqrt(g2_s / g2_r), false};
}

double gtilde_from_coherence(double g2_s, double g2_r, double epsilon, Complex g1_s,
                             Complex g1_r) {
  double A = background_A(g2_s, g2_r, epsilon);
  return 0.25 * (A - 2.0 * (g1_s * std::conj(g1_r)).real());
}

double predict_gtilde(const PhaseMask &mask, Pixel r1, Pixel r2, const VisibilityModel &model) {
  check_M(model.M);
  double A = background_A(model.g2_s, model.g2_r, model.epsilon);
  return 0.25 * (A - 2.0 * model.M * std::cos(mask.at(r1) - mask.at(r2)));
}

std::vector<double> predict_cross_section(const PhaseMask &mask, Pixel r2,
                                          std::span<const double> mean_I_s,
                                          double mean_I_r_at_r2, const VisibilityModel &model) {
  if (mean_I_s.size() != mask.grid().size())
    throw config_error("signal intensity map does not match the mask grid");
  check_M(model.M);
  double A = background_A(model.g2_s, model.g2_r, model.epsilon);
  double delta = mask.at(r2);
  auto phi = mask.values();
  std::vector<double> out(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i)
    out[i] = mean_I_s[i] * mean_I_r_at_r2 * (A / 4.0 - model.M * std::cos(phi[i] - delta) / 2.0);
  return out;
}

double blur_attenuation(double k0, double dx) {
  if (!(dx >= 0.0)) throw config_error("blur width must be >= 0");
  return std::exp(-k0 * k0 * dx * dx / 2.0);
}

std::vector<VisibilityPoint> visibility_curve(double g2_s, double g2_r, double M, double eps_min,
                                              double eps_max, std::size_t n) {
  if (!(eps_min > 0.0) || !(eps_max >= eps_min) || n == 0)
    throw config_error("visibility curve needs 0 < eps_min <= eps_max and n >= 1");
  std::vector<VisibilityPoint> out;
  out.reserve(n);
  double l0 = std::log(eps_min), l1 = std::log(eps_max);
  for (std::size_t i = 0; i < n; ++i) {
    double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    double eps = std::exp(l0 + t * (l1 - l0));
    out.push_back({eps, visibility({g2_s, g2_r, eps, M})});
  }
  return out;
}

} // namespace iholo::theory
