#pragma once

#include <cstdint>
#include <vector>

namespace nvdnp::toy {

// Spin-1/2 pumping model: per cycle the pulse pair moves a depleted nucleus
// to the target with probability p_a, then the optical step flips the nucleus
// with probability p_b.
struct ToyModelParams {
  double p_a = 1.0;
  double p_b = 0.0;
  double depleted_initial = 0.5;  // P_-^(0)

  // q = (1 - p_a)(1 - 2 p_b)
  double q() const { return (1.0 - p_a) * (1.0 - 2.0 * p_b); }
  void validate() const;
};

// P_-^(0) .. P_-^(n) by the affine recursion P_-^(k) = q P_-^(k-1) + p_b.
std::vector<double> iterate_populations(const ToyModelParams& params, int n);

// P_-^(N) = P_-^(0) q^N + p_b (1 - q^N) / (1 - q). For q = 1 (no drive, no
// flips) returns min(P_-^(0) + N p_b, 1).
double closed_form_depleted(const ToyModelParams& params, int n);

// P_+^lim = 1 - p_b / (p_a + 2 p_b (1 - p_a)). Throws ValidationError when
// p_a = p_b = 0.
double limit_population(double p_a, double p_b);

// Fraction of depleted spins after n cycles over `trials` independent spins.
// Trial i draws from a SplitMix64 stream seeded with the i-th output of a
// SplitMix64 stream started at `seed`, so the estimate does not depend on
// `workers`.
double monte_carlo_oracle(const ToyModelParams& params, int n, std::int64_t trials,
                          std::uint64_t seed, unsigned workers = 1);

}  // namespace nvdnp::toy
