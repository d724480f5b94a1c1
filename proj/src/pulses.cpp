#include "nvdnp/pulses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "nvdnp/errors.hpp"
#include "nvdnp/simd/kernels.hpp"

namespace nvdnp {
namespace {

// Below this bound on the flip probability a detuned subspace does not count
// as driven when checking for overlaps.
constexpr double kDrivenThreshold = 1e-6;

// rho <- U rho U^dagger with U acting on levels a, b. Rows are contiguous in
// the row-major layout, so U rho is a row mix and (U (U rho)^dagger)^dagger
// finishes the conjugation.
void conjugate_in_subspace(Matrix9& rho, int a, int b, const simd::Mat2& u) {
  const auto row = [&rho](int i) { return std::span<Complex>(rho.data() + i * kNumLevels, kNumLevels); };
  simd::mix_rows(row(a), row(b), u);
  rho.adjointInPlace();
  simd::mix_rows(row(a), row(b), u);
  rho.adjointInPlace();
}

// exp(-i theta/2 (nx sigma_x + nz sigma_z)) in the (from, to) basis.
simd::Mat2 rotation(double theta, double nx, double nz) {
  const double c = std::cos(theta / 2.0);
  const double s = std::sin(theta / 2.0);
  return {Complex(c, -s * nz), Complex(0.0, -s * nx), Complex(0.0, -s * nx), Complex(c, s * nz)};
}

}  // namespace

void DriveSpec::validate() const {
  transition.validate();
  const double a = nominal_angle.pi_multiple();
  if (!std::isfinite(a) || a < 0.0 || a > 2.0) {
    throw ValidationError(fmt::format("nominal angle {}pi outside [0, 2pi]", a));
  }
  if (!std::isfinite(carrier_offset_mhz)) throw ValidationError("carrier offset must be finite");
  if (selectivity == Selectivity::kRabi && !(rabi_frequency_mhz > 0.0 && std::isfinite(rabi_frequency_mhz))) {
    throw ValidationError(fmt::format("Rabi-mode drive needs rabi_frequency > 0, got {}", rabi_frequency_mhz));
  }
}

double DriveSpec::duration_us() const {
  if (selectivity != Selectivity::kRabi) return 0.0;
  // 2 pi Omega t = angle
  return nominal_angle.pi_multiple() / (2.0 * rabi_frequency_mhz);
}

DensityMatrix apply_ideal_pulse(const DensityMatrix& state, const Transition& t, Angle angle) {
  t.validate();
  Matrix9 rho = state.matrix();
  conjugate_in_subspace(rho, level_index(t.from), level_index(t.to), rotation(angle.radians(), 1.0, 0.0));
  return make_density_unchecked(rho);
}

double rabi_flip_probability(double rabi_mhz, double detuning_mhz, double duration_us) {
  const double eff2 = rabi_mhz * rabi_mhz + detuning_mhz * detuning_mhz;
  if (eff2 == 0.0) return 0.0;
  const double s = std::sin(std::numbers::pi * std::sqrt(eff2) * duration_us);
  return rabi_mhz * rabi_mhz / eff2 * s * s;
}

FinitePulseResult apply_finite_pulse(const DensityMatrix& state, const SpinSystem& system,
                                     const DriveSpec& drive) {
  drive.validate();
  if (drive.selectivity == Selectivity::kIdeal) {
    return {apply_ideal_pulse(state, drive.transition, drive.nominal_angle), {}};
  }

  struct Driven {
    Transition transition;
    double frequency;
    double detuning;
  };
  const double carrier = transition_frequency(system, drive.transition) + drive.carrier_offset_mhz;
  std::vector<Driven> lines;
  for (const Transition& t : channel_transitions(drive.transition.channel)) {
    const double f = transition_frequency(system, t);
    lines.push_back({t, f, carrier - f});
  }
  std::stable_sort(lines.begin(), lines.end(),
                   [](const Driven& a, const Driven& b) { return a.frequency < b.frequency; });

  const double rabi = drive.rabi_frequency_mhz;
  const double duration = drive.duration_us();
  FinitePulseResult result{state, {}};
  Matrix9 rho = state.matrix();
  std::vector<const Driven*> significant;
  for (const Driven& line : lines) {
    const double eff = std::hypot(rabi, line.detuning);
    const double theta = 2.0 * std::numbers::pi * eff * duration;
    conjugate_in_subspace(rho, level_index(line.transition.from), level_index(line.transition.to),
                          rotation(theta, rabi / eff, line.detuning / eff));
    if (rabi * rabi / (eff * eff) >= kDrivenThreshold) significant.push_back(&line);
  }
  for (std::size_t i = 0; i < significant.size(); ++i) {
    for (std::size_t j = i + 1; j < significant.size(); ++j) {
      if (significant[i]->transition.shares_level_with(significant[j]->transition)) {
        result.warnings.push_back(fmt::format("selectivity: {} and {} share a level; composed in frequency order",
                                              to_string(significant[i]->transition),
                                              to_string(significant[j]->transition)));
      }
    }
  }
  result.state = make_density_unchecked(rho);
  return result;
}

}  // namespace nvdnp
