#include <iholo/expansion.hpp>

#include <algorithm>
#include <sstream>

namespace iholo::theory {
namespace {

FieldOperator op(InputMode m, Ladder l, Position p) { return {m, l, p}; }

// 0 mixed intensities, 1 signal fluctuation, 2 reference fluctuation, 3 interference.
int category(const ExpansionTerm &t) {
  bool has_s = false, has_r = false;
  bool pure_at[2] = {true, true};
  InputMode first_at[2] = {InputMode::s, InputMode::s};
  bool seen_at[2] = {false, false};
  for (const FieldOperator &o : t.ops) {
    (o.mode == InputMode::s ? has_s : has_r) = true;
    int p = o.position == Position::r1 ? 0 : 1;
    if (!seen_at[p]) {
      seen_at[p] = true;
      first_at[p] = o.mode;
    } else if (o.mode != first_at[p]) {
      pure_at[p] = false;
    }
  }
  if (!pure_at[0] || !pure_at[1]) return 3;
  if (has_s && has_r) return 0;
  return has_s ? 1 : 2;
}

} // namespace

std::vector<ExpansionTerm> integrated_intensity(OutputPort port, Position pos) {
  const double sign = port == OutputPort::c ? 1.0 : -1.0;
  using enum InputMode;
  using enum Ladder;
  return {
      {0.5, 0, {op(s, create, pos), op(s, annihilate, pos)}},
      {0.5, 0, {op(r, create, pos), op(r, annihilate, pos)}},
      {0.5 * sign, 1, {op(s, create, pos), op(r, annihilate, pos)}},
      {0.5 * sign, -1, {op(r, create, pos), op(s, annihilate, pos)}},
  };
}

std::vector<ExpansionTerm> multiply(std::span<const ExpansionTerm> lhs,
                                    std::span<const ExpansionTerm> rhs) {
  std::vector<ExpansionTerm> out;
  out.reserve(lhs.size() * rhs.size());
  for (const auto &a : lhs)
    for (const auto &b : rhs) {
      ExpansionTerm t{a.coefficient * b.coefficient, a.theta_power + b.theta_power, a.ops};
      t.ops.insert(t.ops.end(), b.ops.begin(), b.ops.end());
      out.push_back(std::move(t));
    }
  return out;
}

std::vector<ExpansionTerm> output_correlation_expansion() {
  auto c = integrated_intensity(OutputPort::c, Position::r1);
  auto d = integrated_intensity(OutputPort::d, Position::r2);
  return multiply(c, d);
}

std::vector<ExpansionTerm> ensemble_average_expansion(std::span<const ExpansionTerm> terms) {
  std::vector<ExpansionTerm> out;
  for (const auto &t : terms)
    if (t.theta_power == 0) out.push_back(t);
  std::stable_sort(out.begin(), out.end(), [](const ExpansionTerm &a, const ExpansionTerm &b) {
    return category(a) < category(b);
  });
  return out;
}

std::complex<double> evaluate(const ExpansionTerm &term, std::complex<double> alpha_s_r1,
                              std::complex<double> alpha_s_r2, std::complex<double> alpha_r_r1,
                              std::complex<double> alpha_r_r2, double theta) {
  std::complex<double> v = term.coefficient * std::polar(1.0, term.theta_power * theta);
  for (const FieldOperator &o : term.ops) {
    std::complex<double> a;
    if (o.mode == InputMode::s)
      a = o.position == Position::r1 ? alpha_s_r1 : alpha_s_r2;
    else
      a = o.position == Position::r1 ? alpha_r_r1 : alpha_r_r2;
    v *= o.ladder == Ladder::create ? std::conj(a) : a;
  }
  return v;
}

std::string to_string(const ExpansionTerm &term) {
  std::ostringstream s;
  s << (term.coefficient < 0 ? "- " : "+ ") << std::abs(term.coefficient);
  if (term.theta_power == 1 || term.theta_power == -1)
    s << " e^{" << (term.theta_power < 0 ? "-" : "") << "i theta}";
  else if (term.theta_power != 0)
    s << " e^{" << term.theta_power << "i theta}";
  for (const FieldOperator &o : term.ops)
    s << " E_" << (o.mode == InputMode::s ? 's' : 'r')
      << (o.ladder == Ladder::create ? '-' : '+') << "(r"
      << (o.position == Position::r1 ? 1 : 2) << ')';
  return s.str();
}

} // namespace iholo::theory
