// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nvdnp/simd/kernels.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

namespace nvdnp::simd {
namespace {

// Lanes hold two interleaved complex numbers [re0, im0, re1, im1].
inline __m256d complex_scale(__m256d v, Complex u) {
  const __m256d re = _mm256_set1_pd(u.real());
  const __m256d im = _mm256_set1_pd(u.imag());
  const __m256d swapped = _mm256_permute_pd(v, 0b0101);
  return _mm256_fmaddsub_pd(re, v, _mm256_mul_pd(im, swapped));
}

void mix_rows_avx2(Complex* a, Complex* b, std::size_t n, const Mat2& u) {
  auto* pa = reinterpret_cast<double*>(a);
  auto* pb = reinterpret_cast<double*>(b);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d x = _mm256_loadu_pd(pa + 2 * i);
    const __m256d y = _mm256_loadu_pd(pb + 2 * i);
    _mm256_storeu_pd(pa + 2 * i, _mm256_add_pd(complex_scale(x, u[0]), complex_scale(y, u[1])));
    _mm256_storeu_pd(pb + 2 * i, _mm256_add_pd(complex_scale(x, u[2]), complex_scale(y, u[3])));
  }
  for (; i < n; ++i) {
    const Complex x = a[i];
    const Complex y = b[i];
    a[i] = u[0] * x + u[1] * y;
    b[i] = u[2] * x + u[3] * y;
  }
}

void add_lorentzian_avx2(const double* f, double* out, std::size_t n, double center, double hwhm,
                         double weight) {
  const __m256d c = _mm256_set1_pd(center);
  const __m256d inv = _mm256_set1_pd(1.0 / hwhm);
  const __m256d w = _mm256_set1_pd(weight);
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(f + i), c), inv);
    const __m256d denom = _mm256_fmadd_pd(x, x, one);
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(out + i), _mm256_div_pd(w, denom)));
  }
  for (; i < n; ++i) {
    const double x = (f[i] - center) / hwhm;
    out[i] += weight / (1.0 + x * x);
  }
}

// z_k = exp((i omega - decay) k dwell) advanced four samples at a time by
// complex multiplication; lanes are re-seeded from libm every kReseed samples
// to bound the accumulated rounding.
void add_damped_cosine_avx2(double* out, std::size_t n, double dwell, double freq, double decay_rate,
                            double weight) {
  constexpr std::size_t kReseed = 64;
  const double omega = 2.0 * std::numbers::pi * freq;
  const double step_phase = 4.0 * omega * dwell;
  const double step_decay = std::exp(-4.0 * dwell * decay_rate);
  const __m256d step_re = _mm256_set1_pd(step_decay * std::cos(step_phase));
  const __m256d step_im = _mm256_set1_pd(step_decay * std::sin(step_phase));
  const __m256d w = _mm256_set1_pd(weight);

  std::size_t k = 0;
  while (k + 4 <= n) {
    alignas(32) double seed_re[4];
    alignas(32) double seed_im[4];
    for (std::size_t j = 0; j < 4; ++j) {
      const double t = static_cast<double>(k + j) * dwell;
      const double env = std::exp(-t * decay_rate);
      seed_re[j] = env * std::cos(omega * t);
      seed_im[j] = env * std::sin(omega * t);
    }
    __m256d re = _mm256_load_pd(seed_re);
    __m256d im = _mm256_load_pd(seed_im);
    const std::size_t block_end = std::min(n - (n - k) % 4, k + kReseed);
    for (; k < block_end; k += 4) {
      _mm256_storeu_pd(out + k, _mm256_fmadd_pd(w, re, _mm256_loadu_pd(out + k)));
      const __m256d next_re = _mm256_fmsub_pd(re, step_re, _mm256_mul_pd(im, step_im));
      const __m256d next_im = _mm256_fmadd_pd(re, step_im, _mm256_mul_pd(im, step_re));
      re = next_re;
      im = next_im;
    }
  }
  for (; k < n; ++k) {
    const double t = static_cast<double>(k) * dwell;
    out[k] += weight * std::cos(omega * t) * std::exp(-t * decay_rate);
  }
}

void magnitude_avx2(const Complex* in, double* out, std::size_t n) {
  const auto* p = reinterpret_cast<const double*>(in);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v01 = _mm256_loadu_pd(p + 2 * i);
    const __m256d v23 = _mm256_loadu_pd(p + 2 * i + 4);
    // hadd -> [|z0|^2, |z2|^2, |z1|^2, |z3|^2]
    const __m256d sums = _mm256_hadd_pd(_mm256_mul_pd(v01, v01), _mm256_mul_pd(v23, v23));
    const __m256d ordered = _mm256_permute4x64_pd(sums, 0b11011000);
    _mm256_storeu_pd(out + i, _mm256_sqrt_pd(ordered));
  }
  for (; i < n; ++i) out[i] = std::hypot(in[i].real(), in[i].imag());
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table{mix_rows_avx2, add_lorentzian_avx2, add_damped_cosine_avx2, magnitude_avx2};
  return table;
}

}  // namespace nvdnp::simd

#else

#include <stdexcept>

namespace nvdnp::simd {
const KernelTable& avx2_kernels() { throw std::logic_error("AVX2 kernels not compiled for this target"); }
}  // namespace nvdnp::simd

#endif
