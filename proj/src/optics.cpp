#include "nvdnp/optics.hpp"

#include <cmath>

#include <fmt/format.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "nvdnp/errors.hpp"

namespace nvdnp {

std::string_view to_string(NuclearModel model) {
  switch (model) {
    case NuclearModel::kRandomWalk: return "walk";
    case NuclearModel::kSingleFlip: return "flip";
    case NuclearModel::kHold: return "hold";
  }
  return "?";
}

void OpticalParams::validate() const {
  if (!std::isfinite(pump_duration_us) || pump_duration_us < 0.0) {
    throw ValidationError(fmt::format("pump duration must be >= 0 us, got {}", pump_duration_us));
  }
  if (!std::isfinite(flip_rate_per_us) || flip_rate_per_us < 0.0) {
    throw ValidationError(fmt::format("nuclear flip rate must be >= 0, got {}", flip_rate_per_us));
  }
  if (!(flip_bias >= -1.0 && flip_bias <= 1.0)) {
    throw ValidationError(fmt::format("flip bias must lie in [-1, 1], got {}", flip_bias));
  }
  if (!(pump_efficiency >= 0.0 && pump_efficiency <= 1.0)) {
    throw ValidationError(fmt::format("pump efficiency must lie in [0, 1], got {}", pump_efficiency));
  }
}

double effective_flip_probability(const OpticalParams& optics) {
  optics.validate();
  if (optics.nuclear_model == NuclearModel::kHold) return 0.0;
  return -(2.0 / 3.0) * std::expm1(-optics.flip_rate_per_us * optics.pump_duration_us);
}

double flip_rate_for_probability(double p_b, double duration_us) {
  if (!(p_b >= 0.0 && p_b < 2.0 / 3.0)) {
    throw ValidationError(fmt::format("optical flip probability must lie in [0, 2/3), got {}", p_b));
  }
  if (!(duration_us > 0.0)) throw ValidationError("pump duration must be > 0 to calibrate a flip rate");
  return -std::log1p(-1.5 * p_b) / duration_us;
}

Eigen::Matrix3d nuclear_transfer_matrix(const OpticalParams& optics) {
  optics.validate();
  const double b = optics.flip_bias;
  switch (optics.nuclear_model) {
    case NuclearModel::kHold:
      return Eigen::Matrix3d::Identity();
    case NuclearModel::kSingleFlip: {
      const double p = effective_flip_probability(optics);
      Eigen::Matrix3d t;
      t << 1.0 - p, p, 0.0,
           0.5 * p * (1.0 + b), 1.0 - p, 0.5 * p * (1.0 - b),
           0.0, p, 1.0 - p;
      return t;
    }
    case NuclearModel::kRandomWalk: {
      // Every pair of m_I values is linked at rate kappa/3, so at zero bias
      // all non-uniform modes decay as exp(-kappa t) and the leakage out of
      // m_I = 0 is (2/3)(1 - exp(-kappa t)). Raising jumps carry (1 + b).
      const double r = optics.flip_rate_per_us / 3.0;
      const double up = r * (1.0 + b);
      const double down = r * (1.0 - b);
      Eigen::Matrix3d generator;
      generator << -2.0 * down, down, down,
                   up, -(up + down), down,
                   up, up, -2.0 * up;
      return (generator * optics.pump_duration_us).exp();
    }
  }
  return Eigen::Matrix3d::Identity();
}

DensityMatrix apply_optical_channel(const DensityMatrix& state, const OpticalParams& optics) {
  const Eigen::Matrix3d nuclear = nuclear_transfer_matrix(optics);
  const double eta = optics.pump_efficiency;
  Eigen::Matrix3d electron;  // rows/cols ordered m_S = +1, 0, -1
  electron << 1.0 - eta, eta, 0.0,
              0.0, 1.0, 0.0,
              0.0, eta, 1.0 - eta;

  const Populations p = state.populations();
  Eigen::Matrix3d in;  // in(ms, mi)
  for (int i = 0; i < kNumLevels; ++i) in(i / 3, i % 3) = p[static_cast<std::size_t>(i)];
  const Eigen::Matrix3d out = electron.transpose() * in * nuclear;

  Matrix9 rho = Matrix9::Zero();
  for (int i = 0; i < kNumLevels; ++i) rho(i, i) = out(i / 3, i % 3);
  return make_density_unchecked(rho);
}

}  // namespace nvdnp
