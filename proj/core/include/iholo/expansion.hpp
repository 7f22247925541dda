#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

/// Symbolic expansion of the beam-splitter output correlation
/// I_c(r1) I_d(r2) in input field operators and its average over the random
/// global phase theta.
namespace iholo::theory {

enum class InputMode { s, r };
enum class Ladder { create, annihilate }; ///< E^- and E^+ respectively
enum class Position { r1, r2 };
enum class OutputPort { c, d };

struct FieldOperator {
  InputMode mode;
  Ladder ladder;
  Position position;

  friend bool operator==(const FieldOperator &, const FieldOperator &) = default;
};

struct ExpansionTerm {
  double coefficient{1.0};
  int theta_power{0}; ///< exponent n of exp(i n theta)
  std::vector<FieldOperator> ops;
};

/// The four terms of the detector-integrated output intensity
/// 1/2 (I_s + I_r +/- [E_s^- E_r^+ e^{i theta} + E_r^- E_s^+ e^{-i theta}]).
std::vector<ExpansionTerm> integrated_intensity(OutputPort port, Position pos);

/// Formal product: every pairing of terms, operators concatenated in order.
std::vector<ExpansionTerm> multiply(std::span<const ExpansionTerm> lhs,
                                    std::span<const ExpansionTerm> rhs);

/// The 16-term expansion of I_c(r1) I_d(r2).
std::vector<ExpansionTerm> output_correlation_expansion();

/// Average over theta uniform on [0, 2 pi), normalized so a constant averages
/// to itself: terms with theta_power != 0 vanish. Survivors are ordered as
/// mixed intensities, signal fluctuation, reference fluctuation, interference.
std::vector<ExpansionTerm> ensemble_average_expansion(std::span<const ExpansionTerm> terms);

/// Classical value of a term for c-number fields alpha_s(r), alpha_r(r)
/// (E^+ -> alpha, E^- -> alpha^*) at the given theta.
std::complex<double> evaluate(const ExpansionTerm &term,
                              std::complex<double> alpha_s_r1, std::complex<double> alpha_s_r2,
                              std::complex<double> alpha_r_r1, std::complex<double> alpha_r_r2,
                              double theta);

std::string to_string(const ExpansionTerm &term);

} // namespace iholo::theory
