#include "gmc/analytics.hpp"

#include "gmc/errors.hpp"
#include "gmc/measures.hpp"

namespace gmc {

double g_factor(double t, double a) {
  if (!(t > 0.0)) throw ValidationError("g_factor: t must be positive");
  if (a <= 0.0) return 0.0;
  return std::sqrt(M_PI * t / 2.0) * std::erf(a / std::sqrt(2.0 * t));
}

double bm_max_cdf(double t, double a) {
  if (!(t > 0.0)) throw ValidationError("bm_max_cdf: t must be positive");
  if (a <= 0.0) return 0.0;
  return std::erf(a / std::sqrt(2.0 * t));
}

double bridge_stay_positive(double a, double b, double t) {
  if (!(t > 0.0)) throw ValidationError("bridge_stay_positive: t must be positive");
  if (a < 0.0 || b < 0.0)
    throw ValidationError("bridge_stay_positive: endpoints must be nonnegative");
  return -std::expm1(-2.0 * a * b / t);
}

double drift_line_stay_below(double a, double b) {
  if (!(a > 0.0 && b > 0.0))
    throw ValidationError("drift_line_stay_below: a and b must be positive");
  return -std::expm1(-2.0 * a * b);
}

double moment_envelope(EnvelopeKind kind, const SeparationScales& scales,
                       double t_or_eps, double alpha, double c, int dim) {
  const double d = static_cast<double>(dim);
  switch (kind) {
    case EnvelopeKind::kTek1: {
      const double t = t_or_eps;
      return c * std::exp(d * scales.u) * std::pow(scales.u + 1.0, -1.5) /
             (t - scales.u + 1.0);
    }
    case EnvelopeKind::kTek2: {
      const double teps = std::log(1.0 / t_or_eps);
      return c * std::exp(d * scales.v) * std::pow(scales.v + 1.0, -1.5) /
             (teps - scales.v + 1.0);
    }
    case EnvelopeKind::kTek3:
      return c * std::exp(d * scales.u) * std::pow(scales.u + 1.0, -1.5);
    case EnvelopeKind::kTek4: {
      const double beta = critical_alpha(dim) - alpha;
      return c * beta * beta * std::exp(d * scales.w) * std::pow(scales.w + 1.0, -1.5);
    }
    case EnvelopeKind::kHipHip:
      return c * varphi(t_or_eps, dim);
  }
  return 0.0;
}

}  // namespace gmc
