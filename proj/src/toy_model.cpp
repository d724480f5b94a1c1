#include "nvdnp/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <fmt/format.h>

#include "nvdnp/errors.hpp"

namespace nvdnp::toy {
namespace {

void check_probability(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(fmt::format("{} must lie in [0, 1], got {}", name, v));
}

void check_cycles(int n) {
  if (n < 0) throw ValidationError(fmt::format("cycle count must be >= 0, got {}", n));
}

// SplitMix64 (Steele, Lea, Flood 2014).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

std::int64_t count_depleted(const ToyModelParams& params, int n, std::uint64_t seed, std::int64_t begin,
                            std::int64_t end) {
  // The master stream is advanced to `begin` so chunks see the same seeds.
  SplitMix64 master(seed);
  for (std::int64_t i = 0; i < begin; ++i) master.next();
  std::int64_t depleted = 0;
  for (std::int64_t i = begin; i < end; ++i) {
    SplitMix64 rng(master.next());
    bool is_depleted = rng.uniform() < params.depleted_initial;
    for (int c = 0; c < n; ++c) {
      if (is_depleted && rng.uniform() < params.p_a) is_depleted = false;
      if (rng.uniform() < params.p_b) is_depleted = !is_depleted;
    }
    depleted += is_depleted ? 1 : 0;
  }
  return depleted;
}

}  // namespace

void ToyModelParams::validate() const {
  check_probability(p_a, "p_a");
  check_probability(p_b, "p_b");
  check_probability(depleted_initial, "P_-^(0)");
}

std::vector<double> iterate_populations(const ToyModelParams& params, int n) {
  params.validate();
  check_cycles(n);
  const double q = params.q();
  std::vector<double> series{params.depleted_initial};
  series.reserve(static_cast<std::size_t>(n) + 1);
  for (int k = 1; k <= n; ++k) series.push_back(series.back() * q + params.p_b);
  return series;
}

double closed_form_depleted(const ToyModelParams& params, int n) {
  params.validate();
  check_cycles(n);
  const double q = params.q();
  if (q == 1.0) return std::min(params.depleted_initial + n * params.p_b, 1.0);
  const double qn = std::pow(q, n);
  return params.depleted_initial * qn + params.p_b * (1.0 - qn) / (1.0 - q);
}

double limit_population(double p_a, double p_b) {
  check_probability(p_a, "p_a");
  check_probability(p_b, "p_b");
  const double denom = p_a + 2.0 * p_b * (1.0 - p_a);  // 1 - q
  if (denom == 0.0) throw ValidationError("limit undefined for p_a = p_b = 0 (q = 1)");
  return 1.0 - p_b / denom;
}

double monte_carlo_oracle(const ToyModelParams& params, int n, std::int64_t trials, std::uint64_t seed,
                          unsigned workers) {
  params.validate();
  check_cycles(n);
  if (trials < 1) throw ValidationError(fmt::format("trials must be >= 1, got {}", trials));
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::min<std::int64_t>(trials, 64))));

  std::vector<std::int64_t> counts(workers, 0);
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      const std::int64_t begin = trials * w / workers;
      const std::int64_t end = trials * (w + 1) / workers;
      pool.emplace_back([&, w, begin, end] { counts[w] = count_depleted(params, n, seed, begin, end); });
    }
  }
  std::int64_t total = 0;
  for (std::int64_t c : counts) total += c;
  return static_cast<double>(total) / static_cast<double>(trials);
}

}  // namespace nvdnp::toy
