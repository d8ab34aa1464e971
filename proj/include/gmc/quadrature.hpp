#pragma once

#include <functional>

namespace gmc {

// Adaptive Gauss-Kronrod (7-15) panels to an absolute error target.
// Integrand must be finite on [a,b].
double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol);

}  // namespace gmc
