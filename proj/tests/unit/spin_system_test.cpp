#include <gtest/gtest.h>

#include <random>
#include <set>

#include "nvdnp/errors.hpp"
#include "nvdnp/spin_system.hpp"
#include "oracles.hpp"

using namespace nvdnp;

TEST(SpinSystem, LevelIndexIsBijective) {
  std::set<int> seen;
  for (int ms : {1, 0, -1}) {
    for (int mi : {1, 0, -1}) {
      const int i = level_index({ms, mi});
      EXPECT_EQ(i, oracle::index_of(ms, mi));
      EXPECT_EQ(level_at(i), (SpinLevel{ms, mi}));
      seen.insert(i);
    }
  }
  EXPECT_EQ(seen.size(), 9u);
  EXPECT_THROW(level_index({2, 0}), std::exception);
  EXPECT_THROW(level_at(9), std::exception);
}

TEST(SpinSystem, EnergiesMatchIndependentFormula) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> b(0.0, 90.0);
  for (int trial = 0; trial < 50; ++trial) {
    SpinSystem s;
    s.b_field_mt = b(rng);
    for (int ms : {1, 0, -1}) {
      for (int mi : {1, 0, -1}) {
        EXPECT_NEAR(level_energy(s, {ms, mi}), oracle::energy(s, ms, mi), 1e-9);
      }
    }
  }
}

TEST(SpinSystem, CentralEsrLineAt30mT) {
  SpinSystem s;
  const double f = transition_frequency(s, Transition::mw({0, 0}, {-1, 0}));
  EXPECT_NEAR(f, 2870.0 - 840.75, 1e-9);
}

TEST(SpinSystem, RfLineInMinusManifold) {
  SpinSystem s;
  const double f = transition_frequency(s, Transition::rf({-1, 1}, {-1, 0}));
  EXPECT_NEAR(f, s.quadrupole_mhz - s.hyperfine_mhz + s.gamma_n_mhz_per_t * 0.030, 1e-12);
}

TEST(SpinSystem, HyperfineSplitsEsrTripletBy2A) {
  SpinSystem s;
  for (double b : {0.0, 5.7, 30.2, 77.7}) {
    s.b_field_mt = b;
    const double fp = transition_frequency(s, Transition::mw({0, 1}, {-1, 1}));
    const double fm = transition_frequency(s, Transition::mw({0, -1}, {-1, -1}));
    EXPECT_NEAR(std::abs(fp - fm), 2.0 * s.hyperfine_mhz, 1e-9);
  }
}

TEST(SpinSystem, MinusBranchFrequencyFallsWithField) {
  SpinSystem lo;
  SpinSystem hi;
  lo.b_field_mt = 10;
  hi.b_field_mt = 20;
  const Transition t = Transition::mw({0, 0}, {-1, 0});
  EXPECT_LT(transition_frequency(hi, t), transition_frequency(lo, t));
}

TEST(SpinSystem, TransitionFrequencyIsSymmetric) {
  SpinSystem s;
  for (const Transition& t : channel_transitions(Channel::kMw)) {
    Transition r{t.channel, t.to, t.from};
    EXPECT_DOUBLE_EQ(transition_frequency(s, t), transition_frequency(s, r));
  }
}

TEST(SpinSystem, ChannelTransitionsAreSixValidDistinctPairs) {
  for (Channel c : {Channel::kMw, Channel::kRf}) {
    const auto ts = channel_transitions(c);
    ASSERT_EQ(ts.size(), 6u);
    for (const Transition& t : ts) {
      EXPECT_TRUE(t.is_valid());
      EXPECT_EQ(t.channel, c);
    }
    for (std::size_t i = 0; i < ts.size(); ++i) {
      for (std::size_t j = i + 1; j < ts.size(); ++j) EXPECT_FALSE(ts[i] == ts[j]);
    }
  }
}

TEST(SpinSystem, TransitionSelectionRules) {
  EXPECT_TRUE(Transition::mw({0, 1}, {1, 1}).is_valid());
  EXPECT_FALSE(Transition::mw({0, 1}, {1, 0}).is_valid());
  EXPECT_FALSE(Transition::mw({1, 1}, {-1, 1}).is_valid());
  EXPECT_TRUE(Transition::rf({1, 1}, {1, 0}).is_valid());
  EXPECT_FALSE(Transition::rf({1, 1}, {1, -1}).is_valid());
  EXPECT_FALSE(Transition::rf({1, 1}, {0, 1}).is_valid());
  EXPECT_THROW(Transition::mw({0, 1}, {0, 1}).validate(), DomainError);
  EXPECT_THROW(Transition::rf({0, 2}, {0, 1}).validate(), std::exception);
}

TEST(SpinSystem, ValidationRejectsBadParameters) {
  SpinSystem s;
  s.b_field_mt = -1;
  EXPECT_THROW(s.validate(), ValidationError);
  s = SpinSystem{};
  s.hyperfine_mhz = std::nan("");
  EXPECT_THROW(s.validate(), ValidationError);
  EXPECT_NO_THROW(SpinSystem{}.validate());
}
