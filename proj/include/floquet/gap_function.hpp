#pragma once

// Smooth gap functions on the circle built from raised-cosine profiles.
//
//   bump  g(d) = (2/w) cos^2(pi d / w)            for |d| < w/2, 0 otherwise
//   ramp  R(d) = d/w + 1/2 + sin(2 pi d / w)/(2 pi)  (R' = g, R: 0 -> 1)
//
// d is the signed angle to the centre, taken in (-pi, pi].

#include <cmath>
#include <complex>
#include <numbers>

#include "floquet/errors.hpp"
#include "floquet/spectral.hpp"

namespace floquet {

inline double raised_cosine_bump(double d, double w) {
  if (std::abs(d) >= 0.5 * w) return 0.0;
  const double c = std::cos(std::numbers::pi * d / w);
  return 2.0 / w * c * c;
}

inline double raised_cosine_ramp(double d, double w) {
  if (d <= -0.5 * w) return 0.0;
  if (d >= 0.5 * w) return 1.0;
  return d / w + 0.5 + std::sin(two_pi * d / w) / two_pi;
}

class GapFunction {
 public:
  enum class Kind { Bump, StepPair };

  /// Bump of width w centred at theta; its ramp is G_theta.
  static GapFunction bump(double theta, double width) {
    check_width(width);
    GapFunction g;
    g.kind_ = Kind::Bump;
    g.theta_ = theta;
    g.w_ = width;
    return g;
  }

  /// G_{theta,theta'}: rises across the gap at theta, falls across the gap at
  /// theta', equal to 1 on the counterclockwise arc between them.
  static GapFunction step_pair(double theta, double width, double theta_prime, double width_prime) {
    check_width(width);
    check_width(width_prime);
    const double sep = wrap_phase(theta_prime - theta);
    if (sep < 0.5 * (width + width_prime)) throw DomainError("step-pair ramps overlap");
    GapFunction g;
    g.kind_ = Kind::StepPair;
    g.theta_ = theta;
    g.w_ = width;
    g.theta2_ = theta_prime;
    g.w2_ = width_prime;
    return g;
  }

  /// Bump at theta sized to a fraction of the room inside its host gap of s.
  static GapFunction bump_in_gap(const QuasiEnergySpectrum& s, double theta, double fraction) {
    return bump(theta, admissible_width(s, theta, fraction));
  }

  static GapFunction step_pair_in_gaps(const QuasiEnergySpectrum& s, double theta, double theta_prime, double fraction) {
    return step_pair(theta, admissible_width(s, theta, fraction), theta_prime,
                     admissible_width(s, theta_prime, fraction));
  }

  /// fraction * 2 * (distance from theta to the nearer end of its gap).
  static double admissible_width(const QuasiEnergySpectrum& s, double theta, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw DomainError("bump width fraction must lie in (0, 1)");
    const SpectralGap g = gap_at(s, theta);
    const double room = std::min(wrap_phase(theta - g.lo), g.hi - g.lo - wrap_phase(theta - g.lo));
    return fraction * 2.0 * room;
  }

  Kind kind() const noexcept { return kind_; }
  double theta() const noexcept { return theta_; }
  double width() const noexcept { return w_; }
  double theta_prime() const noexcept { return theta2_; }
  double width_prime() const noexcept { return w2_; }

  /// G(e^{i phi}). For a bump this is the ramp G_theta, defined up to an integer
  /// jump opposite the bump; only its exponential is meaningful there.
  double value(double phi) const {
    const double d1 = angle_diff(phi, theta_);
    if (kind_ == Kind::Bump) return raised_cosine_ramp(d1, w_);
    if (std::abs(d1) < 0.5 * w_) return raised_cosine_ramp(d1, w_);
    const double d2 = angle_diff(phi, theta2_);
    if (std::abs(d2) < 0.5 * w2_) return 1.0 - raised_cosine_ramp(d2, w2_);
    return wrap_phase(phi - theta_) < wrap_phase(theta2_ - theta_) ? 1.0 : 0.0;
  }

  /// G'(e^{i phi}).
  double derivative(double phi) const {
    const double g = raised_cosine_bump(angle_diff(phi, theta_), w_);
    if (kind_ == Kind::Bump) return g;
    return g - raised_cosine_bump(angle_diff(phi, theta2_), w2_);
  }

  /// e^{-2 pi i G(e^{i phi})}, continuous on the whole circle for both kinds.
  std::complex<double> exp_phase(double phi) const {
    if (kind_ == Kind::Bump) {
      const double d = angle_diff(phi, theta_);
      if (std::abs(d) >= 0.5 * w_) return 1.0;
      return std::polar(1.0, -two_pi * raised_cosine_ramp(d, w_));
    }
    return std::polar(1.0, -two_pi * value(phi));
  }

 private:
  static void check_width(double w) {
    if (!(w > 0.0 && w < two_pi)) throw DomainError("gap-function width must lie in (0, 2pi)");
  }

  Kind kind_ = Kind::Bump;
  double theta_ = 0.0;
  double w_ = 1.0;
  double theta2_ = 0.0;
  double w2_ = 1.0;
};

struct GapFunctionValue {
  double value;
  double derivative;
};

inline GapFunctionValue gap_function_eval(const GapFunction& gf, double phi) {
  return {gf.value(phi), gf.derivative(phi)};
}

}  // namespace floquet
