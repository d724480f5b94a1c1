#include "nvdnp/protocol.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include <fmt/format.h>

#include "nvdnp/errors.hpp"

namespace nvdnp {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void validate_body(const std::vector<Statement>& body) {
  if (body.empty()) throw ValidationError("program body must contain at least one statement");
  for (const Statement& s : body) {
    std::visit(Overloaded{
                   [](const DriveSpec& d) {
                     try {
                       d.validate();
                     } catch (const DomainError& e) {
                       throw ValidationError(e.what());
                     }
                   },
                   [](const LaserPulse& l) { l.optics.validate(); },
                   [](const ReadoutMarker& m) {
                     if (m.label.empty()) throw ValidationError("readout marker needs a label");
                   },
                   [](const RepeatBlock& r) {
                     if (r.count < 1) throw ValidationError(fmt::format("repeat count must be >= 1, got {}", r.count));
                     validate_body(r.body);
                   },
               },
               s.node);
  }
}

std::size_t count_instructions(const std::vector<Statement>& body) {
  std::size_t n = 0;
  for (const Statement& s : body) {
    if (const auto* r = std::get_if<RepeatBlock>(&s.node)) {
      n += static_cast<std::size_t>(r->count) * count_instructions(r->body);
    } else {
      ++n;
    }
  }
  return n;
}

class Executor {
 public:
  Executor(const SpinSystem& system, DensityMatrix state) : system_(system), state_(std::move(state)) {}

  void run(const ProtocolProgram& program) {
    for (int c = 1; c <= program.repeat_count(); ++c) {
      cycle_ = c;
      run_body(program.body());
    }
  }

  RunResult finish() && { return {std::move(state_), std::move(trace_)}; }

 private:
  void run_body(const std::vector<Statement>& body) {
    for (const Statement& s : body) {
      if (const auto* r = std::get_if<RepeatBlock>(&s.node)) {
        for (int i = 0; i < r->count; ++i) run_body(r->body);
        continue;
      }
      std::vector<std::string> warnings;
      std::visit(Overloaded{
                     [&](const DriveSpec& d) {
                       FinitePulseResult out = apply_finite_pulse(state_, system_, d);
                       state_ = std::move(out.state);
                       warnings = std::move(out.warnings);
                     },
                     [&](const LaserPulse& l) { state_ = apply_optical_channel(state_, l.optics); },
                     [&](const ReadoutMarker& m) {
                       trace_.readouts.push_back({m.label, cycle_, state_.nuclear_fractions()});
                     },
                     [](const RepeatBlock&) {},
                 },
                 s.node);
      TraceEntry entry;
      entry.step = trace_.entries.size();
      entry.cycle = cycle_;
      entry.instruction = describe(s);
      entry.nuclear = state_.nuclear_fractions();
      entry.trace_drift = std::abs(state_.trace() - 1.0);
      entry.warnings = std::move(warnings);
      trace_.entries.push_back(std::move(entry));
    }
  }

  const SpinSystem& system_;
  DensityMatrix state_;
  RunTrace trace_;
  int cycle_ = 0;
};

DriveSpec make_drive(const Transition& t, const PulseTemplate& pulses) {
  DriveSpec d;
  d.transition = t;
  const bool mw = t.channel == Channel::kMw;
  d.nominal_angle = mw ? pulses.mw_angle : pulses.rf_angle;
  d.selectivity = pulses.selectivity;
  if (pulses.selectivity == Selectivity::kRabi) {
    d.rabi_frequency_mhz = mw ? pulses.mw_rabi_mhz : pulses.rf_rabi_mhz;
    d.carrier_offset_mhz = pulses.carrier_offset_mhz;
  }
  return d;
}

void check_resolvable(const SpinSystem& system, const std::vector<Transition>& addressed, double resolution) {
  for (const Transition& t : addressed) {
    const double f = transition_frequency(system, t);
    for (const Transition& other : channel_transitions(t.channel)) {
      const bool same = (other.from == t.from && other.to == t.to) || (other.from == t.to && other.to == t.from);
      if (same) continue;
      const double g = transition_frequency(system, other);
      if (std::abs(f - g) < resolution) {
        throw BuildError(fmt::format("{} at {:.6f} MHz collides with {} at {:.6f} MHz (resolution {} MHz)",
                                     to_string(t), f, to_string(other), g, resolution));
      }
    }
  }
}

std::vector<Statement> pulse_statements(const SpinSystem& system, const std::vector<Transition>& transitions,
                                        const PulseTemplate& pulses) {
  check_resolvable(system, transitions, pulses.resolution_mhz);
  std::vector<Statement> out;
  for (const Transition& t : transitions) out.push_back({make_drive(t, pulses)});
  return out;
}

}  // namespace

ProtocolProgram::ProtocolProgram(std::vector<Statement> body, int repeat_count)
    : body_(std::move(body)), repeat_count_(repeat_count) {
  if (repeat_count_ < 1) throw ValidationError(fmt::format("repeat_count must be >= 1, got {}", repeat_count_));
  validate_body(body_);
  while (body_.size() == 1 && std::holds_alternative<RepeatBlock>(body_.front().node)) {
    RepeatBlock inner = std::get<RepeatBlock>(std::move(body_.front().node));
    if (repeat_count_ > std::numeric_limits<int>::max() / inner.count) {
      throw ValidationError("nested repeat counts overflow");
    }
    repeat_count_ *= inner.count;
    body_ = std::move(inner.body);
  }
}

ProtocolProgram ProtocolProgram::with_repeat_count(int count) const { return ProtocolProgram(body_, count); }

std::size_t ProtocolProgram::executed_instruction_count() const {
  return static_cast<std::size_t>(repeat_count_) * count_instructions(body_);
}

std::size_t RunTrace::warning_count() const {
  std::size_t n = 0;
  for (const TraceEntry& e : entries) n += e.warnings.size();
  return n;
}

RunResult run_program(const ProtocolProgram& program, const DensityMatrix& state, const SpinSystem& system) {
  system.validate();
  Executor executor(system, state);
  executor.run(program);
  return std::move(executor).finish();
}

std::vector<SpinFractions> run_recursive_series(const ProtocolProgram& program, const DensityMatrix& state,
                                                const SpinSystem& system, int n_max) {
  if (n_max < 1) throw ValidationError(fmt::format("N_max must be >= 1, got {}", n_max));
  std::vector<SpinFractions> series{state.nuclear_fractions()};
  DensityMatrix current = state;
  for (int n = 1; n <= n_max; ++n) {
    current = run_program(program, current, system).state;
    series.push_back(current.nuclear_fractions());
  }
  return series;
}

ProtocolProgram build_se_program(const SpinSystem& system, const PulseTemplate& pulses) {
  system.validate();
  const std::vector<Transition> transitions{
      Transition::mw({0, +1}, {+1, +1}),
      Transition::rf({+1, +1}, {+1, 0}),
      Transition::mw({0, -1}, {-1, -1}),
      Transition::rf({-1, -1}, {-1, 0}),
  };
  return ProtocolProgram(pulse_statements(system, transitions, pulses));
}

ProtocolProgram build_pt_program(const SpinSystem& system, const PtSpec& spec) {
  system.validate();
  spec.pump.validate();
  const int m = spec.branch == PtBranch::kMinus ? -1 : +1;
  std::vector<Transition> first;
  std::vector<Transition> second;
  switch (spec.target_mi) {
    case 0: {
      if (spec.first_side != 1 && spec.first_side != -1) {
        throw ValidationError(fmt::format("first_side must be +1 or -1, got {}", spec.first_side));
      }
      const int s = spec.first_side;
      first = {Transition::mw({0, s}, {m, s}), Transition::rf({m, s}, {m, 0})};
      second = {Transition::mw({0, -s}, {m, -s}), Transition::rf({m, -s}, {m, 0})};
      break;
    }
    case -1:
    case +1: {
      const int t = spec.target_mi;
      first = {Transition::mw({0, -t}, {m, -t}), Transition::rf({m, -t}, {m, 0})};
      second = {Transition::mw({0, 0}, {m, 0}), Transition::rf({m, 0}, {m, t})};
      break;
    }
    default:
      throw ValidationError(fmt::format("target m_I must be -1, 0 or +1, got {}", spec.target_mi));
  }

  OpticalParams repump = spec.repump.value_or(spec.pump);
  if (!spec.repump) repump.nuclear_model = NuclearModel::kHold;
  repump.validate();

  std::vector<Statement> body = pulse_statements(system, first, spec.pulses);
  body.push_back({LaserPulse{repump}});
  for (Statement& s : pulse_statements(system, second, spec.pulses)) body.push_back(std::move(s));
  body.push_back({LaserPulse{spec.pump}});
  return ProtocolProgram(std::move(body));
}

ProtocolProgram build_pt_program(const SpinSystem& system, PtBranch branch, int target_mi,
                                 const OpticalParams& optics, const PulseTemplate& pulses) {
  PtSpec spec;
  spec.branch = branch;
  spec.target_mi = target_mi;
  spec.pump = optics;
  spec.pulses = pulses;
  return build_pt_program(system, spec);
}

double flip_probability_for_rf_angle(Angle beta) {
  const double s = std::sin(beta.radians() / 2.0);
  return s * s;
}

Angle rf_angle_for_flip_probability(double p_a) {
  if (!(p_a >= 0.0 && p_a <= 1.0)) throw ValidationError(fmt::format("p_a must lie in [0, 1], got {}", p_a));
  if (p_a == 1.0) return kPiPulse;
  return Angle::from_radians(2.0 * std::asin(std::sqrt(p_a)));
}

std::string describe(const Statement& statement) {
  return std::visit(
      Overloaded{
          [](const DriveSpec& d) {
            return fmt::format("{} {}pi", to_string(d.transition), d.nominal_angle.pi_multiple());
          },
          [](const LaserPulse& l) {
            return fmt::format("laser {}us {}", l.optics.pump_duration_us, to_string(l.optics.nuclear_model));
          },
          [](const ReadoutMarker& m) { return "readout " + m.label; },
          [](const RepeatBlock& r) { return fmt::format("repeat {}", r.count); },
      },
      statement.node);
}

}  // namespace nvdnp
