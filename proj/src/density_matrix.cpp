#include "nvdnp/density_matrix.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "nvdnp/errors.hpp"

namespace nvdnp {

double SpinFractions::at(int m) const {
  switch (m) {
    case +1: return plus;
    case 0: return zero;
    case -1: return minus;
  }
  throw DomainError(fmt::format("spin projection {} out of range", m));
}

DensityMatrix make_density_unchecked(const Matrix9& rho) { return DensityMatrix(rho); }

DensityMatrix DensityMatrix::from_matrix(const Matrix9& rho) {
  if (!rho.allFinite()) throw ValidationError("density matrix has non-finite entries");
  DensityMatrix state(rho);
  const StateDiagnostics d = state.diagnostics();
  if (d.hermiticity_error > kHermiticityTolerance) {
    throw ValidationError(fmt::format("density matrix not Hermitian (error {:.3g})", d.hermiticity_error));
  }
  if (d.trace_error > kTraceTolerance) {
    throw ValidationError(fmt::format("density matrix trace differs from 1 by {:.3g}", d.trace_error));
  }
  if (d.min_eigenvalue < -kEigenvalueTolerance) {
    throw ValidationError(fmt::format("density matrix not positive semidefinite (min eigenvalue {:.3g})",
                                      d.min_eigenvalue));
  }
  return state;
}

DensityMatrix DensityMatrix::diagonal(const Populations& p) {
  Matrix9 rho = Matrix9::Zero();
  for (int i = 0; i < kNumLevels; ++i) rho(i, i) = p[static_cast<std::size_t>(i)];
  return from_matrix(rho);
}

double DensityMatrix::population(SpinLevel level) const {
  const int i = level_index(level);
  return rho_(i, i).real();
}

Populations DensityMatrix::populations() const {
  Populations p{};
  for (int i = 0; i < kNumLevels; ++i) p[static_cast<std::size_t>(i)] = std::max(0.0, rho_(i, i).real());
  return p;
}

SpinFractions DensityMatrix::nuclear_fractions() const {
  const Populations p = populations();
  SpinFractions f;
  for (int ms = 0; ms < 3; ++ms) {
    f.plus += p[static_cast<std::size_t>(ms * 3 + 0)];
    f.zero += p[static_cast<std::size_t>(ms * 3 + 1)];
    f.minus += p[static_cast<std::size_t>(ms * 3 + 2)];
  }
  return f;
}

SpinFractions DensityMatrix::electron_fractions() const {
  const Populations p = populations();
  SpinFractions f;
  for (int mi = 0; mi < 3; ++mi) {
    f.plus += p[static_cast<std::size_t>(0 + mi)];
    f.zero += p[static_cast<std::size_t>(3 + mi)];
    f.minus += p[static_cast<std::size_t>(6 + mi)];
  }
  return f;
}

double DensityMatrix::trace() const { return rho_.trace().real(); }

StateDiagnostics DensityMatrix::diagnostics() const {
  StateDiagnostics d;
  d.hermiticity_error = (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
  d.trace_error = std::abs(rho_.trace() - Complex(1.0, 0.0));
  // The solver reads only the lower triangle; symmetrize so it sees rho.
  const Matrix9 hermitian = 0.5 * (rho_ + rho_.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix9> solver(hermitian, Eigen::EigenvaluesOnly);
  d.min_eigenvalue = solver.eigenvalues().minCoeff();
  return d;
}

DensityMatrix initial_state(InitialKind kind) {
  Populations p{};
  switch (kind) {
    case InitialKind::kOpticallyInitialized:
      for (int mi : {+1, 0, -1}) p[static_cast<std::size_t>(level_index({0, mi}))] = 1.0 / 3.0;
      break;
    case InitialKind::kFullyMixed:
      p.fill(1.0 / 9.0);
      break;
  }
  return make_density_unchecked(DensityMatrix::diagonal(p).matrix());
}

DensityMatrix initial_state_custom(const Populations& populations) {
  double sum = 0.0;
  for (double v : populations) {
    if (!std::isfinite(v) || v < 0.0) throw ValidationError(fmt::format("population {} is negative or not finite", v));
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError(fmt::format("populations sum to {}, expected 1", sum));
  // Absorb the admitted 1e-9 slack so the trace invariant holds to rounding.
  Matrix9 rho = Matrix9::Zero();
  for (int i = 0; i < kNumLevels; ++i) rho(i, i) = populations[static_cast<std::size_t>(i)] / sum;
  return make_density_unchecked(rho);
}

Populations populations(const DensityMatrix& state) { return state.populations(); }
SpinFractions nuclear_fractions(const DensityMatrix& state) { return state.nuclear_fractions(); }

}  // namespace nvdnp
