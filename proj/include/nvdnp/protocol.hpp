#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "nvdnp/density_matrix.hpp"
#include "nvdnp/optics.hpp"
#include "nvdnp/pulses.hpp"
#include "nvdnp/spin_system.hpp"

namespace nvdnp {

struct LaserPulse {
  OpticalParams optics;
  bool operator==(const LaserPulse&) const = default;
};

struct ReadoutMarker {
  std::string label;
  bool operator==(const ReadoutMarker&) const = default;
};

struct Statement;

struct RepeatBlock {
  int count = 1;
  std::vector<Statement> body;
  bool operator==(const RepeatBlock& other) const;
};

// MW and RF pulses are both DriveSpec; the channel lives in the transition.
struct Statement {
  std::variant<DriveSpec, LaserPulse, ReadoutMarker, RepeatBlock> node;
  bool operator==(const Statement& other) const;
};

inline bool RepeatBlock::operator==(const RepeatBlock& other) const {
  return count == other.count && body == other.body;
}
inline bool Statement::operator==(const Statement& other) const { return node == other.node; }

// An ordered, non-empty list of statements executed repeat_count times. A body
// consisting of a single repeat block is hoisted into repeat_count, so each
// program has one canonical shape.
class ProtocolProgram {
 public:
  // Throws ValidationError for an empty body, counts < 1 or drives whose
  // transition does not match its channel.
  explicit ProtocolProgram(std::vector<Statement> body, int repeat_count = 1);

  const std::vector<Statement>& body() const { return body_; }
  int repeat_count() const { return repeat_count_; }
  ProtocolProgram with_repeat_count(int count) const;

  // Instructions executed by one run, repeats unrolled.
  std::size_t executed_instruction_count() const;

  bool operator==(const ProtocolProgram&) const = default;

 private:
  std::vector<Statement> body_;
  int repeat_count_ = 1;
};

struct TraceEntry {
  std::size_t step = 0;  // 0-based over executed instructions
  int cycle = 0;         // 1-based top-level repetition
  std::string instruction;
  SpinFractions nuclear;
  double trace_drift = 0.0;
  std::vector<std::string> warnings;
};

struct ReadoutRecord {
  std::string label;
  int cycle = 0;
  SpinFractions nuclear;
};

struct RunTrace {
  std::vector<TraceEntry> entries;
  std::vector<ReadoutRecord> readouts;

  std::size_t warning_count() const;
};

struct RunResult {
  DensityMatrix state;
  RunTrace trace;
};

RunResult run_program(const ProtocolProgram& program, const DensityMatrix& state,
                      const SpinSystem& system);

// Fractions after n = 0..n_max applications of the program (index 0 is the
// input state).
std::vector<SpinFractions> run_recursive_series(const ProtocolProgram& program,
                                                const DensityMatrix& state,
                                                const SpinSystem& system, int n_max);

// How builders shape their drives.
struct PulseTemplate {
  Selectivity selectivity = Selectivity::kIdeal;
  double mw_rabi_mhz = 1.0;
  double rf_rabi_mhz = 0.05;
  double carrier_offset_mhz = 0.0;
  Angle mw_angle = kPiPulse;
  Angle rf_angle = kPiPulse;
  // Addressed lines closer than this to another line of the same channel
  // cannot be driven selectively.
  double resolution_mhz = 0.02;
};

// mw |0,+1>-|+1,+1>, rf |+1,+1>-|+1,0>, mw |0,-1>-|-1,-1>, rf |-1,-1>-|-1,0>.
ProtocolProgram build_se_program(const SpinSystem& system, const PulseTemplate& pulses = {});

enum class PtBranch { kMinus, kPlus };

struct PtSpec {
  PtBranch branch = PtBranch::kMinus;
  int target_mi = 0;
  OpticalParams pump;  // p2, closes the cycle
  // p1, between the two mw/rf pairs; defaults to pump with kHold.
  std::optional<OpticalParams> repump;
  PulseTemplate pulses;
  // For target 0: which side (+1 or -1) the first mw/rf pair empties.
  int first_side = +1;
};

// Six steps: mw, rf, laser p1, mw, rf, laser p2.
ProtocolProgram build_pt_program(const SpinSystem& system, const PtSpec& spec);
ProtocolProgram build_pt_program(const SpinSystem& system, PtBranch branch, int target_mi,
                                 const OpticalParams& optics, const PulseTemplate& pulses = {});

// p_a = sin^2(beta / 2) and its inverse on [0, pi].
double flip_probability_for_rf_angle(Angle beta);
Angle rf_angle_for_flip_probability(double p_a);

std::string describe(const Statement& statement);

}  // namespace nvdnp
