#pragma once

#include <array>
#include <complex>

#include <Eigen/Core>

#include "nvdnp/spin_system.hpp"

namespace nvdnp {

using Complex = std::complex<double>;
using Matrix9 = Eigen::Matrix<Complex, kNumLevels, kNumLevels, Eigen::RowMajor>;
using Populations = std::array<double, kNumLevels>;

// Fractions over a spin-1 quantum number, indexed by m in {+1, 0, -1}.
struct SpinFractions {
  double plus = 0.0;
  double zero = 0.0;
  double minus = 0.0;

  double at(int m) const;
  double sum() const { return plus + zero + minus; }

  bool operator==(const SpinFractions&) const = default;
};

struct StateDiagnostics {
  double hermiticity_error = 0.0;  // max |rho_ij - conj(rho_ji)|
  double trace_error = 0.0;        // |tr(rho) - 1|
  double min_eigenvalue = 0.0;
};

// 9x9 density matrix over |m_S, m_I>. Instances produced by the library
// operations are valid by construction; from_matrix() checks the invariants.
class DensityMatrix {
 public:
  static constexpr double kHermiticityTolerance = 1e-12;
  static constexpr double kTraceTolerance = 1e-12;
  static constexpr double kEigenvalueTolerance = 1e-10;

  // Throws ValidationError when rho is not Hermitian, unit-trace and PSD.
  static DensityMatrix from_matrix(const Matrix9& rho);
  static DensityMatrix diagonal(const Populations& populations);

  const Matrix9& matrix() const { return rho_; }

  double population(SpinLevel level) const;
  Populations populations() const;
  SpinFractions nuclear_fractions() const;
  SpinFractions electron_fractions() const;
  double trace() const;

  StateDiagnostics diagnostics() const;

 private:
  friend DensityMatrix make_density_unchecked(const Matrix9& rho);
  explicit DensityMatrix(const Matrix9& rho) : rho_(rho) {}

  Matrix9 rho_;
};

// For operations that preserve validity by construction (unitary conjugation,
// stochastic population maps). Does not check anything.
DensityMatrix make_density_unchecked(const Matrix9& rho);

enum class InitialKind { kOpticallyInitialized, kFullyMixed };

// Optically initialized: m_S = 0 with uniform nitrogen populations.
DensityMatrix initial_state(InitialKind kind);
// Diagonal state; populations must be nonnegative and sum to 1 within 1e-9.
DensityMatrix initial_state_custom(const Populations& populations);

Populations populations(const DensityMatrix& state);
SpinFractions nuclear_fractions(const DensityMatrix& state);

}  // namespace nvdnp
