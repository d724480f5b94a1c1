#include "nvdnp/spin_system.hpp"

#include <cmath>
#include <cstdlib>

#include <fmt/format.h>

#include "nvdnp/errors.hpp"

namespace nvdnp {
namespace {

bool in_range(int m) { return m >= -1 && m <= 1; }

void check_level(SpinLevel level) {
  if (!in_range(level.ms) || !in_range(level.mi)) {
    throw DomainError(fmt::format("quantum numbers out of range: m_S={}, m_I={}", level.ms, level.mi));
  }
}

std::string signed_digit(int m) { return m > 0 ? fmt::format("+{}", m) : fmt::format("{}", m); }

}  // namespace

int level_index(SpinLevel level) {
  check_level(level);
  return (1 - level.ms) * 3 + (1 - level.mi);
}

SpinLevel level_at(int index) {
  if (index < 0 || index >= kNumLevels) {
    throw DomainError(fmt::format("level index {} out of range", index));
  }
  return {1 - index / 3, 1 - index % 3};
}

std::string to_string(SpinLevel level) {
  return fmt::format("|{},{}>", signed_digit(level.ms), signed_digit(level.mi));
}

bool Transition::is_valid() const noexcept {
  if (!in_range(from.ms) || !in_range(from.mi) || !in_range(to.ms) || !in_range(to.mi)) return false;
  if (from == to) return false;
  switch (channel) {
    case Channel::kMw:
      return from.mi == to.mi && std::abs(from.ms - to.ms) == 1;
    case Channel::kRf:
      return from.ms == to.ms && std::abs(from.mi - to.mi) == 1;
  }
  return false;
}

void Transition::validate() const {
  check_level(from);
  check_level(to);
  if (from == to) throw DomainError("transition connects a level to itself: " + to_string(from));
  if (!is_valid()) {
    throw DomainError(channel == Channel::kMw
                          ? "MW transition must change m_S by one and keep m_I: " + to_string(*this)
                          : "RF transition must change m_I by one and keep m_S: " + to_string(*this));
  }
}

bool Transition::shares_level_with(const Transition& other) const noexcept {
  return from == other.from || from == other.to || to == other.from || to == other.to;
}

std::string to_string(const Transition& t) {
  return fmt::format("{} {}<->{}", t.channel == Channel::kMw ? "mw" : "rf", to_string(t.from),
                     to_string(t.to));
}

void SpinSystem::validate() const {
  const auto require = [](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) throw ValidationError(fmt::format("{} must be finite and >= 0, got {}", name, v));
  };
  require(zero_field_splitting_mhz, "zero_field_splitting");
  require(quadrupole_mhz, "quadrupole");
  require(hyperfine_mhz, "hyperfine");
  require(gamma_e_ghz_per_t, "gamma_e");
  require(gamma_n_mhz_per_t, "gamma_n");
  require(b_field_mt, "b_field");
}

double level_energy(const SpinSystem& s, SpinLevel level) {
  check_level(level);
  const double ms = level.ms;
  const double mi = level.mi;
  // GHz/T * mT = MHz ; MHz/T * mT = kHz
  const double electron_zeeman = s.gamma_e_ghz_per_t * s.b_field_mt;
  const double nuclear_zeeman = s.gamma_n_mhz_per_t * s.b_field_mt * 1e-3;
  return s.zero_field_splitting_mhz * ms * ms + electron_zeeman * ms + s.quadrupole_mhz * mi * mi +
         nuclear_zeeman * mi + s.hyperfine_mhz * ms * mi;
}

double level_energy(const SpinSystem& system, int ms, int mi) { return level_energy(system, SpinLevel{ms, mi}); }

double transition_frequency(const SpinSystem& system, const Transition& t) {
  t.validate();
  return std::abs(level_energy(system, t.to) - level_energy(system, t.from));
}

std::vector<Transition> channel_transitions(Channel channel) {
  std::vector<Transition> out;
  if (channel == Channel::kMw) {
    for (int ms : {+1, -1}) {
      for (int mi : {+1, 0, -1}) out.push_back(Transition::mw({0, mi}, {ms, mi}));
    }
  } else {
    for (int ms : {+1, 0, -1}) {
      for (int mi : {+1, -1}) out.push_back(Transition::rf({ms, 0}, {ms, mi}));
    }
  }
  return out;
}

}  // namespace nvdnp
