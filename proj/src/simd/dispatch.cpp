#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "nvdnp/simd/kernels.hpp"

namespace nvdnp::simd {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend initial_backend() noexcept {
  if (const char* env = std::getenv("NVDNP_SIMD")) {
    const std::string choice(env);
    if (choice == "scalar") return Backend::kScalar;
    if (choice == "avx2" && cpu_has_avx2()) return Backend::kAvx2;
  }
  return cpu_has_avx2() ? Backend::kAvx2 : Backend::kScalar;
}

std::atomic<Backend>& current() noexcept {
  static std::atomic<Backend> backend{initial_backend()};
  return backend;
}

}  // namespace

bool backend_available(Backend backend) noexcept {
  return backend == Backend::kScalar || cpu_has_avx2();
}

Backend active_backend() noexcept { return current().load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
  if (!backend_available(backend)) {
    throw std::invalid_argument(std::string("SIMD backend unavailable: ") + std::string(backend_name(backend)));
  }
  current().store(backend, std::memory_order_relaxed);
}

std::string_view backend_name(Backend backend) noexcept {
  return backend == Backend::kAvx2 ? "avx2" : "scalar";
}

const KernelTable& kernels() noexcept {
  return active_backend() == Backend::kAvx2 ? avx2_kernels() : scalar_kernels();
}

}  // namespace nvdnp::simd
