#include <gtest/gtest.h>

#include <random>

#include "nvdnp/errors.hpp"
#include "nvdnp/pulses.hpp"
#include "oracles.hpp"

using namespace nvdnp;

namespace {

DensityMatrix pure(SpinLevel l) {
  Populations p{};
  p[static_cast<std::size_t>(level_index(l))] = 1.0;
  return DensityMatrix::diagonal(p);
}

double max_abs(const oracle::Mat9& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(IdealPulse, MatchesMatrixExponentialOnRandomStates) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> angle(0.0, 2.0);
  const std::vector<Transition> ts = {Transition::mw({0, 1}, {1, 1}), Transition::rf({-1, -1}, {-1, 0}),
                                      Transition::mw({-1, 0}, {0, 0})};
  for (int trial = 0; trial < 30; ++trial) {
    const oracle::Mat9 rho = oracle::random_state(rng);
    const Transition t = ts[static_cast<std::size_t>(trial) % ts.size()];
    const Angle a = Angle::from_pi(angle(rng));
    const oracle::Mat9 u = oracle::rotation_x(level_index(t.from), level_index(t.to), a.radians());
    const oracle::Mat9 expected = u * rho * u.adjoint();
    const DensityMatrix got = apply_ideal_pulse(oracle::to_state(rho), t, a);
    EXPECT_LT(max_abs(oracle::as_mat(got) - expected), 1e-12) << "trial " << trial;
  }
}

TEST(IdealPulse, PiPulseSwapsPopulations) {
  const DensityMatrix s = apply_ideal_pulse(pure({0, 1}), Transition::mw({0, 1}, {1, 1}), kPiPulse);
  EXPECT_NEAR(s.population({1, 1}), 1.0, 1e-15);
  EXPECT_NEAR(s.population({0, 1}), 0.0, 1e-15);
}

TEST(IdealPulse, HalfPiMakesEqualSuperposition) {
  const DensityMatrix s = apply_ideal_pulse(pure({0, 0}), Transition::rf({0, 0}, {0, 1}), kHalfPiPulse);
  EXPECT_NEAR(s.population({0, 0}), 0.5, 1e-15);
  EXPECT_NEAR(s.population({0, 1}), 0.5, 1e-15);
  EXPECT_NEAR(std::abs(s.matrix()(level_index({0, 0}), level_index({0, 1}))), 0.5, 1e-15);
}

TEST(IdealPulse, RejectsInvalidTransition) {
  EXPECT_THROW(apply_ideal_pulse(pure({0, 0}), Transition::mw({0, 0}, {0, 1}), kPiPulse), DomainError);
}

TEST(RabiFormula, ResonantPiPulseFlipsCompletely) {
  EXPECT_NEAR(rabi_flip_probability(1.0, 0.0, 0.5), 1.0, 1e-15);
  EXPECT_NEAR(rabi_flip_probability(0.05, 0.0, 10.0), 1.0, 1e-12);
  EXPECT_EQ(rabi_flip_probability(0.0, 0.0, 1.0), 0.0);
}

TEST(RabiFormula, DetunedAmplitudeIsBounded) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const double rabi = u(rng) + 0.01;
    const double det = u(rng);
    const double p = rabi_flip_probability(rabi, det, u(rng));
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, rabi * rabi / (rabi * rabi + det * det) + 1e-15);
  }
}

TEST(FinitePulse, IdealSelectivityFallsThrough) {
  DriveSpec d;
  d.transition = Transition::mw({0, 1}, {-1, 1});
  const FinitePulseResult r = apply_finite_pulse(pure({0, 1}), SpinSystem{}, d);
  EXPECT_NEAR(r.state.population({-1, 1}), 1.0, 1e-15);
  EXPECT_TRUE(r.warnings.empty());
}

TEST(FinitePulse, NeighbourLineFollowsGeneralizedRabi) {
  const SpinSystem s;
  DriveSpec d;
  d.transition = Transition::mw({0, 0}, {-1, 0});
  d.selectivity = Selectivity::kRabi;
  d.rabi_frequency_mhz = 1.0;
  const FinitePulseResult on = apply_finite_pulse(pure({0, 0}), s, d);
  EXPECT_NEAR(on.state.population({-1, 0}), 1.0, 1e-6);
  EXPECT_TRUE(on.warnings.empty());

  const FinitePulseResult off = apply_finite_pulse(pure({0, 1}), s, d);
  const double det = transition_frequency(s, d.transition) - transition_frequency(s, Transition::mw({0, 1}, {-1, 1}));
  EXPECT_NEAR(off.state.population({-1, 1}), rabi_flip_probability(1.0, det, d.duration_us()), 1e-12);
  EXPECT_GT(off.state.population({-1, 1}), 0.01);
}

TEST(FinitePulse, CarrierOffsetReducesTransfer) {
  const SpinSystem s;
  DriveSpec d;
  d.transition = Transition::rf({-1, 1}, {-1, 0});
  d.selectivity = Selectivity::kRabi;
  d.rabi_frequency_mhz = 0.05;
  d.carrier_offset_mhz = 0.03;
  const FinitePulseResult r = apply_finite_pulse(pure({-1, 1}), s, d);
  // The rf line sharing |-1,0> is ~4 MHz away; its weak off-resonant drive
  // (Omega^2/Omega_eff^2 ~ 1e-4) bounds the deviation from the two-level value.
  const double two_level = rabi_flip_probability(0.05, 0.03, d.duration_us());
  EXPECT_LT(two_level, 0.9);
  EXPECT_NEAR(r.state.population({-1, 0}), two_level, 2e-4);
}

TEST(FinitePulse, PreservesStateInvariants) {
  std::mt19937_64 rng(21);
  SpinSystem s;
  s.b_field_mt = 5.7;
  for (int trial = 0; trial < 20; ++trial) {
    DriveSpec d;
    d.transition = trial % 2 ? Transition::rf({1, 0}, {1, -1}) : Transition::mw({0, -1}, {-1, -1});
    d.selectivity = Selectivity::kRabi;
    d.rabi_frequency_mhz = trial % 2 ? 0.05 : 1.0;
    d.nominal_angle = Angle::from_pi(0.1 * trial);
    const DensityMatrix out = apply_finite_pulse(oracle::to_state(oracle::random_state(rng)), s, d).state;
    const StateDiagnostics diag = out.diagnostics();
    EXPECT_LT(diag.hermiticity_error, 1e-13);
    EXPECT_LT(diag.trace_error, 1e-12);
    EXPECT_GT(diag.min_eigenvalue, -1e-12);
  }
}

TEST(FinitePulse, WarnsWhenDrivenLinesShareALevel) {
  SpinSystem s;
  s.b_field_mt = 0.0;
  DriveSpec d;
  d.transition = Transition::mw({0, 0}, {-1, 0});
  d.selectivity = Selectivity::kRabi;
  d.rabi_frequency_mhz = 1.0;
  const FinitePulseResult r = apply_finite_pulse(pure({0, 0}), s, d);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(DriveSpec, Validation) {
  DriveSpec d;
  d.transition = Transition::mw({0, 0}, {1, 0});
  EXPECT_NO_THROW(d.validate());
  d.selectivity = Selectivity::kRabi;
  EXPECT_THROW(d.validate(), ValidationError);
  d.rabi_frequency_mhz = 2.0;
  EXPECT_NO_THROW(d.validate());
  EXPECT_DOUBLE_EQ(d.duration_us(), 0.25);
  d.nominal_angle = Angle::from_pi(2.5);
  EXPECT_THROW(d.validate(), ValidationError);
}
