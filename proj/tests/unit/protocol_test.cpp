#include <gtest/gtest.h>

#include <random>

#include "nvdnp/errors.hpp"
#include "nvdnp/protocol.hpp"
#include "oracles.hpp"

using namespace nvdnp;

namespace {

using Vec9 = Eigen::Matrix<double, 9, 1>;

int idx(int ms, int mi) { return oracle::index_of(ms, mi); }

Vec9 to_vec(const Populations& p) {
  Vec9 v;
  for (int i = 0; i < 9; ++i) v(i) = p[static_cast<std::size_t>(i)];
  return v;
}

Populations random_populations(std::mt19937_64& rng, bool ms0_only) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Populations p{};
  double sum = 0;
  for (int i = 0; i < 9; ++i) {
    if (ms0_only && level_at(i).ms != 0) continue;
    p[static_cast<std::size_t>(i)] = u(rng);
    sum += p[static_cast<std::size_t>(i)];
  }
  for (double& x : p) x /= sum;
  return p;
}

// Ideal repump: every |m_S, m_I> goes to |0, m_I>.
Eigen::Matrix<double, 9, 9> repump_matrix() {
  Eigen::Matrix<double, 9, 9> r = Eigen::Matrix<double, 9, 9>::Zero();
  for (int ms : {1, 0, -1}) {
    for (int mi : {1, 0, -1}) r(idx(0, mi), idx(ms, mi)) = 1.0;
  }
  return r;
}

OpticalParams ideal_optics() {
  OpticalParams o;
  o.flip_rate_per_us = 0.0;
  return o;
}

Eigen::Matrix<double, 9, 9> pt_oracle(int m, int target, int side = 1) {
  std::vector<std::pair<int, int>> first;
  std::vector<std::pair<int, int>> second;
  if (target == 0) {
    first = {{idx(0, side), idx(m, side)}, {idx(m, side), idx(m, 0)}};
    second = {{idx(0, -side), idx(m, -side)}, {idx(m, -side), idx(m, 0)}};
  } else {
    first = {{idx(0, -target), idx(m, -target)}, {idx(m, -target), idx(m, 0)}};
    second = {{idx(0, 0), idx(m, 0)}, {idx(m, 0), idx(m, target)}};
  }
  return repump_matrix() * oracle::permutation(second) * repump_matrix() * oracle::permutation(first);
}

Transition mirror(const Transition& t) { return {t.channel, {t.from.ms, -t.from.mi}, {t.to.ms, -t.to.mi}}; }

}  // namespace

TEST(SpinExchange, MapsOpticalStateToCentralNuclearLine) {
  const SpinSystem s;
  const RunResult r = run_program(build_se_program(s), initial_state(InitialKind::kOpticallyInitialized), s);
  const SpinFractions n = r.state.nuclear_fractions();
  const SpinFractions e = r.state.electron_fractions();
  EXPECT_NEAR(n.plus, 0.0, 1e-12);
  EXPECT_NEAR(n.zero, 1.0, 1e-12);
  EXPECT_NEAR(n.minus, 0.0, 1e-12);
  EXPECT_NEAR(e.plus, 1.0 / 3, 1e-12);
  EXPECT_NEAR(e.zero, 1.0 / 3, 1e-12);
  EXPECT_NEAR(e.minus, 1.0 / 3, 1e-12);
}

TEST(SpinExchange, MatchesPermutationOracle) {
  const SpinSystem s;
  const auto perm = oracle::permutation({{idx(0, 1), idx(1, 1)},
                                         {idx(1, 1), idx(1, 0)},
                                         {idx(0, -1), idx(-1, -1)},
                                         {idx(-1, -1), idx(-1, 0)}});
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const oracle::Mat9 rho = oracle::random_state(rng);
    const RunResult r = run_program(build_se_program(s), oracle::to_state(rho), s);
    const Eigen::Matrix<double, 9, 9> expected = perm * rho.cwiseAbs() * perm.transpose();
    EXPECT_LT((r.state.matrix().cwiseAbs() - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(PopulationTrapping, AllTargetsAndBranchesMatchOracle) {
  const SpinSystem s;
  std::mt19937_64 rng(4);
  for (PtBranch branch : {PtBranch::kMinus, PtBranch::kPlus}) {
    const int m = branch == PtBranch::kMinus ? -1 : 1;
    for (int target : {-1, 0, 1}) {
      const ProtocolProgram p = build_pt_program(s, branch, target, ideal_optics());
      for (int trial = 0; trial < 5; ++trial) {
        const Populations start = random_populations(rng, trial % 2 == 0);
        const RunResult r = run_program(p, DensityMatrix::diagonal(start), s);
        const Vec9 expected = pt_oracle(m, target) * to_vec(start);
        EXPECT_LT((to_vec(r.state.populations()) - expected).cwiseAbs().maxCoeff(), 1e-12);
        if (trial % 2 == 0) EXPECT_NEAR(r.state.population({0, target}), 1.0, 1e-12);
      }
    }
  }
}

TEST(PopulationTrapping, FirstSideIsConfigurable) {
  const SpinSystem s;
  PtSpec spec;
  spec.pump = ideal_optics();
  spec.first_side = -1;
  const ProtocolProgram p = build_pt_program(s, spec);
  const auto& d = std::get<DriveSpec>(p.body()[0].node);
  EXPECT_EQ(d.transition, Transition::mw({0, -1}, {-1, -1}));
  spec.first_side = 0;
  EXPECT_THROW(build_pt_program(s, spec), ValidationError);
}

TEST(PopulationTrapping, RepumpDefaultsToHold) {
  const SpinSystem s;
  const ProtocolProgram p = build_pt_program(s, PtBranch::kMinus, 0, OpticalParams{});
  ASSERT_EQ(p.body().size(), 6u);
  const auto& p1 = std::get<LaserPulse>(p.body()[2].node);
  const auto& p2 = std::get<LaserPulse>(p.body()[5].node);
  EXPECT_EQ(p1.optics.nuclear_model, NuclearModel::kHold);
  EXPECT_EQ(p2.optics.nuclear_model, NuclearModel::kRandomWalk);

  PtSpec spec;
  OpticalParams repump;
  repump.pump_duration_us = 1.0;
  spec.repump = repump;
  const ProtocolProgram q = build_pt_program(s, spec);
  EXPECT_EQ(std::get<LaserPulse>(q.body()[2].node).optics, repump);
}

TEST(Builders, UnresolvedLinesAreBuildErrors) {
  SpinSystem s;
  s.b_field_mt = 0.0;
  EXPECT_THROW(build_se_program(s), BuildError);
  EXPECT_THROW(build_pt_program(s, PtBranch::kMinus, 0, OpticalParams{}), BuildError);
  s.b_field_mt = 5.7;
  EXPECT_NO_THROW(build_pt_program(s, PtBranch::kMinus, 0, OpticalParams{}));
  PulseTemplate coarse;
  coarse.resolution_mhz = 1.0;
  EXPECT_THROW(build_pt_program(s, PtBranch::kMinus, 0, OpticalParams{}, coarse), BuildError);
}

TEST(Builders, FiniteSelectivityStaysCloseToIdeal) {
  const SpinSystem s;
  PulseTemplate t;
  t.selectivity = Selectivity::kRabi;
  t.mw_rabi_mhz = 0.2;
  t.rf_rabi_mhz = 0.01;
  const RunResult r = run_program(build_pt_program(s, PtBranch::kMinus, 0, ideal_optics(), t),
                                  initial_state(InitialKind::kOpticallyInitialized), s);
  EXPECT_GT(r.state.nuclear_fractions().zero, 0.9);
  EXPECT_LT(r.state.nuclear_fractions().zero, 1.0);
}

TEST(Program, HoistsSingleTopLevelRepeat) {
  const Statement marker{ReadoutMarker{"x"}};
  const Statement inner{RepeatBlock{3, {marker}}};
  const ProtocolProgram p({Statement{RepeatBlock{2, {inner}}}}, 5);
  EXPECT_EQ(p.repeat_count(), 30);
  ASSERT_EQ(p.body().size(), 1u);
  EXPECT_EQ(p.executed_instruction_count(), 30u);
  EXPECT_EQ(p, ProtocolProgram({marker}, 30));
}

TEST(Program, CountsNestedInstructions) {
  const Statement laser{LaserPulse{}};
  const Statement marker{ReadoutMarker{"r"}};
  const ProtocolProgram p({laser, Statement{RepeatBlock{4, {laser, marker}}}}, 2);
  EXPECT_EQ(p.executed_instruction_count(), 2u * (1 + 8));
}

TEST(Program, Validation) {
  EXPECT_THROW(ProtocolProgram({}), ValidationError);
  EXPECT_THROW(ProtocolProgram({Statement{ReadoutMarker{"r"}}}, 0), ValidationError);
  EXPECT_THROW(ProtocolProgram({Statement{ReadoutMarker{""}}}), ValidationError);
  EXPECT_THROW(ProtocolProgram({Statement{RepeatBlock{0, {Statement{ReadoutMarker{"r"}}}}}}), ValidationError);
  DriveSpec wrong;
  wrong.transition = Transition{Channel::kRf, {0, 0}, {1, 0}};
  EXPECT_THROW(ProtocolProgram({Statement{wrong}}), ValidationError);
}

TEST(Execution, TraceHasOneEntryPerInstruction) {
  const SpinSystem s;
  std::vector<Statement> body = build_pt_program(s, PtBranch::kMinus, 0, OpticalParams{}).body();
  body.push_back({ReadoutMarker{"end"}});
  const ProtocolProgram p(body, 3);
  const RunResult r = run_program(p, initial_state(InitialKind::kOpticallyInitialized), s);
  ASSERT_EQ(r.trace.entries.size(), p.executed_instruction_count());
  ASSERT_EQ(r.trace.readouts.size(), 3u);
  for (int c = 0; c < 3; ++c) {
    EXPECT_EQ(r.trace.readouts[static_cast<std::size_t>(c)].cycle, c + 1);
    EXPECT_EQ(r.trace.readouts[static_cast<std::size_t>(c)].label, "end");
  }
  for (std::size_t i = 0; i < r.trace.entries.size(); ++i) {
    EXPECT_EQ(r.trace.entries[i].step, i);
    EXPECT_LT(r.trace.entries[i].trace_drift, 1e-12);
  }
  EXPECT_EQ(r.trace.warning_count(), 0u);
  EXPECT_EQ(r.trace.entries.back().nuclear, r.state.nuclear_fractions());
}

TEST(Execution, RecursiveSeriesMatchesRepeatedRuns) {
  const SpinSystem s;
  const ProtocolProgram p = build_pt_program(s, PtBranch::kMinus, 0, OpticalParams{});
  const DensityMatrix start = initial_state(InitialKind::kOpticallyInitialized);
  const auto series = run_recursive_series(p, start, s, 5);
  ASSERT_EQ(series.size(), 6u);
  EXPECT_EQ(series[0], start.nuclear_fractions());
  const SpinFractions five = run_program(p.with_repeat_count(5), start, s).state.nuclear_fractions();
  EXPECT_NEAR(series[5].zero, five.zero, 1e-14);
  EXPECT_THROW(run_recursive_series(p, start, s, 0), ValidationError);
}

TEST(Execution, MirrorSymmetryWithZeroBias) {
  const SpinSystem s;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto mw = channel_transitions(Channel::kMw);
  const auto rf = channel_transitions(Channel::kRf);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Statement> prog;
    std::vector<Statement> mirrored;
    for (int k = 0; k < 8; ++k) {
      if (u(rng) < 0.25) {
        OpticalParams o;
        o.pump_duration_us = u(rng);
        o.nuclear_model = static_cast<NuclearModel>(k % 3);
        prog.push_back({LaserPulse{o}});
        mirrored.push_back({LaserPulse{o}});
        continue;
      }
      const auto& pool = u(rng) < 0.5 ? mw : rf;
      DriveSpec d;
      d.transition = pool[static_cast<std::size_t>(u(rng) * 6) % 6];
      d.nominal_angle = Angle::from_pi(2 * u(rng));
      prog.push_back({d});
      d.transition = mirror(d.transition);
      mirrored.push_back({d});
    }
    Populations p = random_populations(rng, false);
    Populations q{};
    for (int i = 0; i < 9; ++i) {
      const SpinLevel l = level_at(i);
      q[static_cast<std::size_t>(level_index({l.ms, -l.mi}))] = p[static_cast<std::size_t>(i)];
    }
    const SpinFractions a = run_program(ProtocolProgram(prog), DensityMatrix::diagonal(p), s).state.nuclear_fractions();
    const SpinFractions b =
        run_program(ProtocolProgram(mirrored), DensityMatrix::diagonal(q), s).state.nuclear_fractions();
    EXPECT_NEAR(a.plus, b.minus, 1e-12);
    EXPECT_NEAR(a.zero, b.zero, 1e-12);
    EXPECT_NEAR(a.minus, b.plus, 1e-12);
  }
}

TEST(RfAngleMapping, RoundTrips) {
  for (double pa : {0.0, 0.1, 0.25, 0.5, 0.9, 1.0}) {
    EXPECT_NEAR(flip_probability_for_rf_angle(rf_angle_for_flip_probability(pa)), pa, 1e-14);
  }
  EXPECT_NEAR(flip_probability_for_rf_angle(kHalfPiPulse), 0.5, 1e-15);
  EXPECT_EQ(rf_angle_for_flip_probability(1.0), kPiPulse);
  EXPECT_THROW(rf_angle_for_flip_probability(1.2), ValidationError);
}
