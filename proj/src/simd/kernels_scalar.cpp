#include <cmath>
#include <numbers>

#include "nvdnp/simd/kernels.hpp"

namespace nvdnp::simd {
namespace {

void mix_rows_scalar(Complex* a, Complex* b, std::size_t n, const Mat2& u) {
  for (std::size_t i = 0; i < n; ++i) {
    const Complex x = a[i];
    const Complex y = b[i];
    a[i] = u[0] * x + u[1] * y;
    b[i] = u[2] * x + u[3] * y;
  }
}

void add_lorentzian_scalar(const double* f, double* out, std::size_t n, double center, double hwhm,
                           double weight) {
  for (std::size_t i = 0; i < n; ++i) {
    const double x = (f[i] - center) / hwhm;
    out[i] += weight / (1.0 + x * x);
  }
}

void add_damped_cosine_scalar(double* out, std::size_t n, double dwell, double freq, double decay_rate,
                              double weight) {
  const double omega = 2.0 * std::numbers::pi * freq;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dwell;
    out[k] += weight * std::cos(omega * t) * std::exp(-t * decay_rate);
  }
}

void magnitude_scalar(const Complex* in, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::hypot(in[i].real(), in[i].imag());
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{mix_rows_scalar, add_lorentzian_scalar, add_damped_cosine_scalar,
                                 magnitude_scalar};
  return table;
}

}  // namespace nvdnp::simd
