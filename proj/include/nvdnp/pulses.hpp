#pragma once

#include <string>
#include <vector>

#include "nvdnp/angle.hpp"
#include "nvdnp/density_matrix.hpp"
#include "nvdnp/spin_system.hpp"

namespace nvdnp {

enum class Selectivity { kIdeal, kRabi };

struct DriveSpec {
  Transition transition;
  Angle nominal_angle = kPiPulse;
  double rabi_frequency_mhz = 0.0;  // required > 0 for kRabi
  double carrier_offset_mhz = 0.0;  // carrier minus target line frequency
  Selectivity selectivity = Selectivity::kIdeal;

  void validate() const;
  // On-resonance duration giving nominal_angle; only meaningful for kRabi.
  double duration_us() const;

  bool operator==(const DriveSpec&) const = default;
};

// U rho U^dagger with U = exp(-i angle sigma_x / 2) on span{from, to}.
DensityMatrix apply_ideal_pulse(const DensityMatrix& state, const Transition& t, Angle angle);

// Generalized Rabi flip probability (rabi/rabi_eff)^2 sin^2(pi rabi_eff t).
double rabi_flip_probability(double rabi_mhz, double detuning_mhz, double duration_us);

struct FinitePulseResult {
  DensityMatrix state;
  std::vector<std::string> warnings;
};

// Drives every transition of the pulse's channel with its own detuning from
// the carrier. Subspace rotations are composed in ascending transition
// frequency; overlapping, non-negligibly driven subspaces produce a warning.
// kIdeal drives fall through to apply_ideal_pulse.
FinitePulseResult apply_finite_pulse(const DensityMatrix& state, const SpinSystem& system,
                                     const DriveSpec& drive);

}  // namespace nvdnp
