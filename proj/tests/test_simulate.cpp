#include <iholo/config.hpp>
#include <iholo/digest.hpp>
#include <iholo/simulate.hpp>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

using namespace iholo;
using namespace iholo::sim;
using events::Channel;
using events::DetectionEvent;
using nlohmann::json;

namespace {

json small(int w, json signal) {
  return {{"grid", {{"width", w}, {"height", w}}},
          {"beam", {{"waist_px", w / 2.0}}},
          {"signal", std::move(signal)},
          {"detector", "ideal"},
          {"trials", 20000},
          {"rng_seed", 17}};
}

json coherent(double mu = 1.0) { return {{"kind", "coherent"}, {"mean_photons", mu}}; }

// Fock-space probabilities of the unordered output pair for one signal photon
// (port a) and one reference photon (port b) on a 50:50 splitter with
// c = (a + b)/sqrt2, d = (a - b)/sqrt2. Modes are indexed port * P + pixel.
std::map<std::pair<std::size_t, std::size_t>, double>
fock_pair_distribution(std::span<const Complex> psi_s, std::span<const Complex> psi_r, double overlap) {
  const std::size_t P = psi_s.size();
  const double sgn_s[2] = {1, 1}, sgn_r[2] = {1, -1};
  auto coeff = [&](std::size_t m, std::size_t n) {
    return 0.5 * sgn_s[m / P] * sgn_r[n / P] * psi_s[m % P] * psi_r[n % P];
  };
  std::map<std::pair<std::size_t, std::size_t>, double> p;
  for (std::size_t m = 0; m < 2 * P; ++m)
    for (std::size_t n = m; n < 2 * P; ++n) {
      double indist = m == n ? 2 * std::norm(coeff(m, m)) : std::norm(coeff(m, n) + coeff(n, m));
      double dist = m == n ? std::norm(coeff(m, m)) : std::norm(coeff(m, n)) + std::norm(coeff(n, m));
      p[{m, n}] = overlap * indist + (1 - overlap) * dist;
    }
  return p;
}

double chi_square_p(const std::map<std::pair<std::size_t, std::size_t>, double> &prob,
                    const std::map<std::pair<std::size_t, std::size_t>, std::uint64_t> &seen,
                    std::uint64_t total) {
  double chi2 = 0;
  int dof = -1;
  double pooled_e = 0, pooled_o = 0;
  for (const auto &[k, pk] : prob) {
    double e = pk * static_cast<double>(total);
    auto it = seen.find(k);
    double o = it == seen.end() ? 0.0 : static_cast<double>(it->second);
    if (e < 5) {
      pooled_e += e;
      pooled_o += o;
      continue;
    }
    chi2 += (o - e) * (o - e) / e;
    ++dof;
  }
  if (pooled_e > 0) {
    chi2 += (pooled_o - pooled_e) * (pooled_o - pooled_e) / std::max(pooled_e, 1e-12);
    ++dof;
  }
  boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, chi2));
}

std::string digest_of(const events::EventStream &s) {
  std::ostringstream out;
  events::write_stream(s, out);
  return sha256_hex(out.str());
}

} // namespace

class TwoPhotonSampler : public ::testing::TestWithParam<double> {};

TEST_P(TwoPhotonSampler, MatchesFockSpaceDistribution) {
  const double overlap = GetParam();
  json doc = small(2, {{"kind", "heralded_single_photon"}});
  doc["mask"] = {{"type", "checkerboard"}, {"square", 1}, {"levels", {0.0, 2.1}}};
  doc["shear"] = {{"k0", 0.4}};
  doc["beam"] = {{"waist_px", 1.3}, {"center", {0.3, 0.6}}};
  doc["epsilon"] = 1.0;
  doc["three_photon_bound"] = 10.0;
  doc["mode_overlap"] = overlap;
  SimulationModel model(parse_config(doc));
  const std::size_t P = 4;
  auto prob = fock_pair_distribution(model.signal_mode(), model.reference_mode(), overlap);
  double sum = 0;
  for (const auto &kv : prob) sum += kv.second;
  ASSERT_NEAR(sum, 1.0, 1e-12);

  Rng rng(99);
  std::map<std::pair<std::size_t, std::size_t>, std::uint64_t> seen;
  std::uint64_t n = 0;
  while (n < 100000) {
    auto o = sample_two_photon_outcome(model, rng);
    if (o.branch != TwoPhotonBranch::signal_reference) continue;
    ASSERT_EQ(o.photons.size(), 2u);
    std::size_t a = o.photons[0].port * P + o.photons[0].pixel;
    std::size_t b = o.photons[1].port * P + o.photons[1].pixel;
    ++seen[{std::min(a, b), std::max(a, b)}];
    ++n;
  }
  EXPECT_GT(chi_square_p(prob, seen, n), 0.01);
}

INSTANTIATE_TEST_SUITE_P(Overlap, TwoPhotonSampler, ::testing::Values(1.0, 0.6));

TEST(TwoPhotonSampler, BranchProbabilitiesArePoisson) {
  json doc = small(2, {{"kind", "heralded_single_photon"}});
  doc["epsilon"] = 0.7;
  doc["three_photon_bound"] = 10.0;
  SimulationModel model(parse_config(doc));
  Rng rng(4);
  std::array<int, 3> c{};
  const int N = 200000;
  for (int i = 0; i < N; ++i) ++c[static_cast<int>(sample_two_photon_outcome(model, rng).branch)];
  double p1 = 0.7 * std::exp(-0.7), p2 = 0.5 * 0.49 * std::exp(-0.7);
  EXPECT_NEAR(c[1] / double(N), p1, 5 * std::sqrt(p1 / N));
  EXPECT_NEAR(c[2] / double(N), p2, 5 * std::sqrt(p2 / N));
}

TEST(Semiclassical, OutputIntensitiesConserveEnergy) {
  json doc = small(6, coherent(1.3));
  doc["epsilon"] = 0.4;
  doc["mask"] = {{"type", "quadratic"}, {"a", 0.3}};
  SimulationModel model(parse_config(doc));
  Rng rng(1);
  for (int k = 0; k < 20; ++k) {
    auto f = sample_trial_fields(model, rng);
    auto s = f.intensity_s(), r = f.intensity_r(), c = f.intensity_c(), d = f.intensity_d();
    for (std::size_t i = 0; i < s.size(); ++i) {
      EXPECT_NEAR(c[i] + d[i], s[i] + r[i], 1e-12);
      // Oracle: beam-splitter output of the c-number fields.
      EXPECT_NEAR(c[i], 0.5 * std::norm(f.signal_amplitude(i) + f.reference_amplitude(i)), 1e-12);
    }
  }
}

TEST(Semiclassical, ThermalIntensityFactorMoments) {
  SimulationModel model(parse_config(small(2, coherent())));
  Rng rng(8);
  for (double g2 : {1.5, 2.0}) {
    double s1 = 0, s2 = 0;
    const int N = 400000;
    for (int i = 0; i < N; ++i) {
      double x = model.sample_intensity_factor(g2, rng);
      s1 += x;
      s2 += x * x;
    }
    EXPECT_NEAR(s1 / N, 1.0, 0.01);
    EXPECT_NEAR(s2 / N, g2, 0.03);
  }
  EXPECT_EQ(model.sample_intensity_factor(1.0, rng), 1.0);
}

TEST(Simulate, MeanCountsMatchPhotonNumbers) {
  json doc = small(8, coherent(1.0));
  doc["epsilon"] = 0.5;
  doc["trials"] = 40000;
  auto s = run_simulation(parse_config(doc), {1});
  double per_trial = static_cast<double>(s.events.size()) / 40000;
  EXPECT_NEAR(per_trial, 1.5, 5 * std::sqrt(1.5 / 40000));
  for (const auto &e : s.events) EXPECT_NE(e.channel, Channel::herald);
}

TEST(Simulate, DeterministicAcrossThreadsAndBatches) {
  json doc = small(8, {{"kind", "thermal"}, {"mean_photons", 1.0}});
  doc["trials"] = 30000;
  doc["clock"] = {{"coherence_trials", 7}};
  doc["detector"] = {{"jitter_sigma_ns", 2.0}, {"blur_sigma_px", 1.0}, {"dark_rate_per_s", 1e6},
                     {"dead_time_ns", 30.0}, {"efficiency", 0.8}};
  auto cfg = parse_config(doc);
  auto ref = digest_of(run_simulation(cfg, {1, 4096}));
  EXPECT_EQ(digest_of(run_simulation(cfg, {3, 4096})), ref);
  EXPECT_EQ(digest_of(run_simulation(cfg, {2, 1000})), ref);
  doc["rng_seed"] = 18;
  EXPECT_NE(digest_of(run_simulation(parse_config(doc), {1})), ref);
}

TEST(Simulate, ZeroEfficiencyLeavesOnlyDarkCounts) {
  json doc = small(4, coherent(3.0));
  doc["trials"] = 100000;
  doc["detector"] = {{"efficiency", 0.0}, {"dark_rate_per_s", 2e5}};
  auto s = run_simulation(parse_config(doc), {1});
  // Two camera regions, 12.5 ns per trial.
  double expected = 2 * 2e5 * 12.5e-9 * 100000;
  EXPECT_NEAR(static_cast<double>(s.events.size()), expected, 5 * std::sqrt(expected));
  std::array<std::size_t, 2> per_channel{};
  for (const auto &e : s.events) ++per_channel[static_cast<int>(e.channel)];
  EXPECT_NEAR(static_cast<double>(per_channel[0]), expected / 2, 5 * std::sqrt(expected / 2));
}

TEST(Simulate, JitterIsBoundedAndOrdered) {
  json doc = small(4, coherent(2.0));
  doc["trials"] = 20000;
  doc["detector"] = {{"jitter_sigma_ns", 1.0}};
  auto cfg = parse_config(doc);
  auto s = run_simulation(cfg, {1});
  SimulationModel model(cfg);
  EXPECT_EQ(s.header.metadata["start_offset_ps"], model.start_offset_ps());
  EXPECT_TRUE(std::is_sorted(s.events.begin(), s.events.end(), events::stream_less));
  // 6 sigma = 6 ns stays inside half a period, so the nearest pulse is the source.
  double sum = 0, sum2 = 0;
  for (const auto &e : s.events) {
    double rel = static_cast<double>(e.t) - static_cast<double>(model.start_offset_ps());
    double d = rel - std::round(rel / 12500) * 12500;
    EXPECT_LE(std::abs(d), 6000.0);
    sum += d;
    sum2 += d * d;
  }
  double n = static_cast<double>(s.events.size());
  EXPECT_NEAR(sum / n, 0.0, 5 * 1000 / std::sqrt(n));
  EXPECT_NEAR(std::sqrt(sum2 / n), 1000.0, 20.0);
}

TEST(Simulate, IdealTimestampsSitOnPulses) {
  json doc = small(4, coherent(2.0));
  doc["trials"] = 5000;
  auto cfg = parse_config(doc);
  SimulationModel model(cfg);
  auto s = run_simulation(cfg, {1});
  for (const auto &e : s.events) EXPECT_EQ((e.t - model.start_offset_ps()) % 12500, 0u);
}

TEST(Simulate, DeadTimeSeparatesPixelHits) {
  json doc = small(1, coherent(6.0));
  doc["trials"] = 5000;
  doc["detector"] = {{"dead_time_ns", 30.0}};
  auto s = run_simulation(parse_config(doc), {1});
  std::array<std::uint64_t, 2> last{0, 0};
  std::array<bool, 2> any{false, false};
  for (const auto &e : s.events) {
    int c = static_cast<int>(e.channel);
    if (any[c]) EXPECT_GE(e.t - last[c], 30000u);
    last[c] = e.t;
    any[c] = true;
  }
  // Without dead time there would be ~3 hits per channel per trial.
  EXPECT_LT(s.events.size(), 2u * 5000u);
}

TEST(Simulate, HeraldEfficiency) {
  json doc = small(4, {{"kind", "heralded_single_photon"}});
  doc["epsilon"] = 0.1;
  doc["detector"] = {{"herald_efficiency", 0.6}};
  doc["trials"] = 50000;
  auto s = run_simulation(parse_config(doc), {1});
  std::size_t h = 0;
  for (const auto &e : s.events) h += e.channel == Channel::herald;
  EXPECT_NEAR(h / 50000.0, 0.6, 5 * std::sqrt(0.24 / 50000));
}

TEST(Simulate, ValidityWarning) {
  json doc = small(4, {{"kind", "heralded_single_photon"}});
  doc["epsilon"] = 0.01;
  auto ok = parse_config(doc);
  EXPECT_TRUE(simulation_warnings(ok).empty());
  double mu = 0.01;
  double oracle = (1 - std::exp(-mu) - mu * std::exp(-mu)) / (mu * std::exp(-mu));
  EXPECT_NEAR(two_photon_validity(ok).three_photon_ratio, oracle, 1e-10 * oracle);
  EXPECT_NEAR(oracle, mu / 2, mu * mu);
  doc["epsilon"] = 0.5;
  auto bad = parse_config(doc);
  EXPECT_FALSE(two_photon_validity(bad).within_bound);
  ASSERT_EQ(simulation_warnings(bad).size(), 1u);
  auto s = run_simulation([&] {
    auto c = bad;
    c.trials = 10;
    return c;
  }());
  EXPECT_EQ(s.header.metadata["warnings"].size(), 1u);
}

TEST(Simulate, BlurKeepsEventsOnGrid) {
  json doc = small(5, coherent(2.0));
  doc["detector"] = {{"blur_sigma_px", 3.0}};
  doc["trials"] = 5000;
  auto s = run_simulation(parse_config(doc), {1});
  for (const auto &e : s.events) {
    EXPECT_LT(e.x, 5);
    EXPECT_LT(e.y, 5);
  }
  // Wide blur on a small grid drops a sizeable fraction of photons.
  EXPECT_LT(s.events.size(), 5000u * 2 * 3 / 4);
}
