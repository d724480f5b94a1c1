#pragma once

#include <array>
#include <string_view>

#include <Eigen/Core>

#include "nvdnp/density_matrix.hpp"

namespace nvdnp {

// How the nitrogen spin responds to a laser pulse.
enum class NuclearModel {
  // Continuous-time walk over m_I in which every non-uniform component decays
  // at rate kappa; relaxes to uniform populations for long pulses.
  kRandomWalk,
  // At most one flip per pulse with probability p_b; from m_I = 0 the flip
  // goes up or down by the bias, from m_I = +-1 it always lands on 0.
  kSingleFlip,
  // Repump that leaves the nitrogen untouched.
  kHold,
};

std::string_view to_string(NuclearModel model);

struct OpticalParams {
  double pump_duration_us = 0.25;
  double flip_rate_per_us = 1.43;  // kappa
  double flip_bias = 0.0;          // +1 favours raising m_I
  double pump_efficiency = 1.0;    // probability m_S = +-1 -> 0
  NuclearModel nuclear_model = NuclearModel::kRandomWalk;

  void validate() const;

  bool operator==(const OpticalParams&) const = default;
};

// p_b = (2/3)(1 - exp(-kappa t)); zero for kHold.
double effective_flip_probability(const OpticalParams& optics);

// Inverse of effective_flip_probability for a given duration; p_b in [0, 2/3).
double flip_rate_for_probability(double p_b, double duration_us);

// Row-stochastic nitrogen transfer matrix T(from, to), indices ordered
// m_I = +1, 0, -1.
Eigen::Matrix3d nuclear_transfer_matrix(const OpticalParams& optics);

// Repumps m_S = +-1 into m_S = 0 with pump_efficiency while applying the
// nitrogen transfer matrix; coherences are erased.
DensityMatrix apply_optical_channel(const DensityMatrix& state, const OpticalParams& optics);

}  // namespace nvdnp
