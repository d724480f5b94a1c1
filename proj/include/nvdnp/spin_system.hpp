#pragma once

#include <array>
#include <string>
#include <vector>

namespace nvdnp {

// |m_S, m_I> with m_S, m_I in {-1, 0, +1}.
struct SpinLevel {
  int ms = 0;
  int mi = 0;

  constexpr bool operator==(const SpinLevel&) const = default;
};

inline constexpr int kNumLevels = 9;

// Basis ordering: m_S major, m_I minor, both descending (+1, 0, -1).
int level_index(SpinLevel level);
SpinLevel level_at(int index);
std::string to_string(SpinLevel level);

enum class Channel { kMw, kRf };

struct Transition {
  Channel channel = Channel::kMw;
  SpinLevel from;
  SpinLevel to;

  static Transition mw(SpinLevel from, SpinLevel to) { return {Channel::kMw, from, to}; }
  static Transition rf(SpinLevel from, SpinLevel to) { return {Channel::kRf, from, to}; }

  // MW: m_S changes by one, m_I kept. RF: m_I changes by one, m_S kept.
  // Throws DomainError otherwise.
  void validate() const;
  bool is_valid() const noexcept;
  bool shares_level_with(const Transition& other) const noexcept;

  constexpr bool operator==(const Transition&) const = default;
};

std::string to_string(const Transition& t);

// Ground-state NV-14N pair with the field along the NV axis. Frequencies in
// MHz, gyromagnetic ratios as customary (electron GHz/T, nitrogen MHz/T).
struct SpinSystem {
  double zero_field_splitting_mhz = 2870.0;
  double quadrupole_mhz = 4.945;
  double hyperfine_mhz = 2.16;
  double gamma_e_ghz_per_t = 28.025;
  double gamma_n_mhz_per_t = 3.077;
  double b_field_mt = 30.0;

  void validate() const;

  bool operator==(const SpinSystem&) const = default;
};

// E/h = D m_S^2 + gamma_e B m_S + Q m_I^2 + gamma_n B m_I + A m_S m_I  (MHz).
double level_energy(const SpinSystem& system, SpinLevel level);
double level_energy(const SpinSystem& system, int ms, int mi);

// |E(to) - E(from)| in MHz.
double transition_frequency(const SpinSystem& system, const Transition& t);

// The six allowed transitions of a channel, each listed once with `from`
// the level closer to m_S = 0 (MW) or m_I = 0 (RF).
std::vector<Transition> channel_transitions(Channel channel);

}  // namespace nvdnp
