#pragma once

// Data-parallel inner loops with a scalar reference implementation and an
// AVX2/FMA variant. The active backend is picked once at startup from the CPU
// features; NVDNP_SIMD=scalar|avx2 overrides the choice.

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <string_view>

namespace nvdnp::simd {

using Complex = std::complex<double>;

// Row-major 2x2 complex matrix {u00, u01, u10, u11}.
using Mat2 = std::array<Complex, 4>;

enum class Backend { kScalar, kAvx2 };

struct KernelTable {
  // a <- u00 a + u01 b ; b <- u10 a + u11 b
  void (*mix_rows)(Complex* a, Complex* b, std::size_t n, const Mat2& u);
  // out[i] += weight / (1 + ((f[i] - center) / hwhm)^2)
  void (*add_lorentzian)(const double* f, double* out, std::size_t n,
                         double center, double hwhm, double weight);
  // out[k] += weight * cos(2 pi freq k dwell) * exp(-k dwell decay_rate)
  void (*add_damped_cosine)(double* out, std::size_t n, double dwell,
                            double freq, double decay_rate, double weight);
  // out[i] = |in[i]|
  void (*magnitude)(const Complex* in, double* out, std::size_t n);
};

const KernelTable& scalar_kernels();
// Only callable when backend_available(Backend::kAvx2).
const KernelTable& avx2_kernels();

bool backend_available(Backend backend) noexcept;
Backend active_backend() noexcept;
// Throws std::invalid_argument if the backend is unavailable on this CPU.
void set_backend(Backend backend);
std::string_view backend_name(Backend backend) noexcept;

const KernelTable& kernels() noexcept;

inline void mix_rows(std::span<Complex> a, std::span<Complex> b, const Mat2& u) {
  kernels().mix_rows(a.data(), b.data(), a.size(), u);
}

inline void add_lorentzian(std::span<const double> f, std::span<double> out,
                           double center, double hwhm, double weight) {
  kernels().add_lorentzian(f.data(), out.data(), f.size(), center, hwhm, weight);
}

inline void add_damped_cosine(std::span<double> out, double dwell, double freq,
                              double decay_rate, double weight) {
  kernels().add_damped_cosine(out.data(), out.size(), dwell, freq, decay_rate, weight);
}

inline void magnitude(std::span<const Complex> in, std::span<double> out) {
  kernels().magnitude(in.data(), out.data(), in.size());
}

}  // namespace nvdnp::simd
