#pragma once

#include <cmath>
#include <limits>
#include <utility>

namespace gmc {

// Separation scales of a point pair at the given distance:
//   w = log(1/(|x-y| and 1)),  u = w and t,  v = w and log(1/eps).
struct SeparationScales {
  double w = 0.0;
  double u = 0.0;
  double v = 0.0;

  static SeparationScales make(double distance, double t, double eps) {
    SeparationScales s;
    const double d = std::min(distance, 1.0);
    s.w = d > 0.0 ? std::log(1.0 / d) : std::numeric_limits<double>::infinity();
    s.u = std::min(s.w, t);
    s.v = std::min(s.w, std::log(1.0 / eps));
    return s;
  }
};

// g_t(a) = int_0^{a_+} exp(-z^2 / 2t) dz.
double g_factor(double t, double a);

// P[ sup_{[0,t]} B_s <= a ] = sqrt(2/(pi t)) g_t(a_+), by reflection.
double bm_max_cdf(double t, double a);

// P[ Brownian bridge from a to b over [0,t] stays >= 0 ] = 1 - e^(-2ab/t),
// bounded by 1 and 2ab/t. Requires a, b >= 0.
double bridge_stay_positive(double a, double b, double t);

// P[ for all t > 0, B_t <= a t + b ] = 1 - e^(-2ab) for a, b > 0.
double drift_line_stay_below(double a, double b);

// Mean of Y(z) after an exponential tilt by Y(z0): H(z, z0).
template <typename Cov, typename Z>
double cameron_martin_mean(Cov&& h, const Z& z0, const Z& z) {
  return std::forward<Cov>(h)(z, z0);
}

// Right-hand sides of the second-moment envelopes, evaluated with a
// supplied constant c. kHipHip takes the set diameter through t_or_eps and
// equals c * varphi(diameter).
enum class EnvelopeKind { kTek1, kTek2, kTek3, kTek4, kHipHip };

double moment_envelope(EnvelopeKind kind, const SeparationScales& scales,
                       double t_or_eps, double alpha, double c, int dim);

}  // namespace gmc
