#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "nvdnp/config.hpp"
#include "nvdnp/density_matrix.hpp"
#include "nvdnp/optics.hpp"
#include "nvdnp/protocol.hpp"
#include "nvdnp/readout.hpp"
#include "nvdnp/spin_system.hpp"

namespace nvdnp {

inline constexpr std::string_view kToolVersion = "0.1.0";

enum class ProtocolKind { kPt, kSe, kSeq };

struct ProtocolSettings {
  ProtocolKind kind = ProtocolKind::kPt;
  PtBranch branch = PtBranch::kMinus;
  int target_mi = 0;
  int first_side = +1;
  int cycles = 1;
  PulseTemplate pulses;
  std::filesystem::path seq_file;  // resolved against the config directory
  std::string seq_source;          // file contents, read at load time
  InitialKind initial = InitialKind::kOpticallyInitialized;
};

struct OpticsSettings {
  OpticalParams pump;    // p2
  OpticalParams repump;  // p1
};

struct ReadoutSettings {
  bool esr = true;
  bool ramsey = false;
  // Also synthesize the spectrum of the same protocol with every rf angle set to 0.
  bool rf_off_reference = false;
  double esr_half_span_mhz = 5.25;
  int esr_points = 2101;
  double linewidth_mhz = 0.4;
  double contrast = 0.3;
  Lineshape lineshape = Lineshape::kLorentzian;
  RamseyConfig ramsey_config;
};

enum class SweepVariable { kCycles, kPa, kBetaPi, kPumpUs, kBMt };

struct SweepAxis {
  SweepVariable variable = SweepVariable::kCycles;
  std::vector<double> values;
};

std::string_view axis_name(SweepVariable v);

struct ExperimentConfig {
  std::string name = "experiment";
  SpinSystem system;
  OpticsSettings optics;
  ProtocolSettings protocol;
  ReadoutSettings readout;
  std::vector<SweepAxis> sweep;  // in file order; first axis varies slowest
  unsigned workers = 1;
  std::uint64_t seed = 20240101;
  std::filesystem::path output_dir = "out";

  // Throws ValidationError (or BuildError for unresolvable lines); runs
  // before any computation.
  void validate() const;
};

// Keys not understood by the schema are rejected. `base_dir` resolves seq paths.
ExperimentConfig config_from_text(std::string_view text, const std::filesystem::path& base_dir,
                                  std::string origin = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

// Sweep point overrides applied to a copy of the config.
ExperimentConfig apply_point(const ExperimentConfig& config, const std::vector<double>& point);

// One cycle of the configured protocol.
ProtocolProgram build_cycle(const ExperimentConfig& config);

struct PointResult {
  SpinFractions final_state;
  std::optional<double> target_limit;      // engine fixed point, PT only
  std::optional<double> target_limit_toy;  // toy-model limit, PT only
};

// Runs config.protocol.cycles cycles from the configured initial state.
PointResult evaluate(const ExperimentConfig& config);

struct SweepTable {
  std::vector<std::string> axes;
  std::vector<std::vector<double>> points;
  std::vector<PointResult> results;

  std::string to_csv() const;
  nlohmann::json to_json() const;
};

// Cartesian product of the axes, lexicographic in axis order.
SweepTable sweep(const ExperimentConfig& config);

struct RunOutputs {
  std::vector<std::filesystem::path> files;
  std::size_t warnings = 0;
};

// Both write their outputs plus manifest.json under config.output_dir.
RunOutputs run_experiment(const ExperimentConfig& config);
RunOutputs run_sweep(const ExperimentConfig& config);

// Every resolved parameter, including defaults that were not written in the file.
nlohmann::json manifest(const ExperimentConfig& config, std::string_view verb);

// Header and rows shared by run's result.csv and sweep.csv.
std::string result_header();
std::string result_row(const PointResult& r);

std::vector<std::string> preset_names();
// Throws ValidationError for an unknown name.
std::string_view preset_text(std::string_view name);
ExperimentConfig load_preset(std::string_view name);

}  // namespace nvdnp
