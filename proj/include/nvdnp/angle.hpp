#pragma once

#include <compare>
#include <numbers>

namespace nvdnp {

// Rotation angle stored as a multiple of pi so that text round trips
// (`0.5pi`) are exact.
class Angle {
 public:
  constexpr Angle() = default;

  static constexpr Angle from_pi(double multiple) { return Angle(multiple); }
  static constexpr Angle from_radians(double radians) {
    return Angle(radians / std::numbers::pi);
  }

  constexpr double pi_multiple() const { return half_turns_; }
  constexpr double radians() const { return half_turns_ * std::numbers::pi; }

  constexpr auto operator<=>(const Angle&) const = default;

 private:
  constexpr explicit Angle(double half_turns) : half_turns_(half_turns) {}
  double half_turns_ = 0.0;
};

inline constexpr Angle kPiPulse = Angle::from_pi(1.0);
inline constexpr Angle kHalfPiPulse = Angle::from_pi(0.5);

}  // namespace nvdnp
