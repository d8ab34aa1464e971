#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gmc/grid.hpp"
#include "gmc/sampler.hpp"

namespace gmc {

inline double critical_alpha(int dim) { return std::sqrt(2.0 * dim); }

// Grid-aligned union of disjoint boxes inside the observation window,
// stored as cell index ranges so Riemann sums are exact integrals of the
// piecewise constant weight fields.
struct SetSpec {
  struct Box {
    std::size_t lo0 = 0, hi0 = 0;  // [lo, hi) cells, first axis
    std::size_t lo1 = 0, hi1 = 0;  // second axis (d=2)
  };
  std::string id;
  int dim = 1;
  std::vector<Box> boxes;

  static SetSpec from_unit_coords(const GridSpec& grid,
                                  const std::vector<std::array<double, 4>>& unit_boxes,
                                  std::string id);
  std::size_t cell_count() const;
  double lebesgue(const GridSpec& grid) const;
  double diameter(const GridSpec& grid) const;
  void validate(const GridSpec& grid) const;
};

// Per-cell weight fields over the observation window.
//   w: e^(alpha X_t - (alpha^2/2) sigma2), times the barrier indicator when
//      truncated at level q.
//   z: the derivative-family prefactor times w: (sqrt(2d) t + q - xbar) w
//      for the truncated critical family (exact-mean martingale form),
//      otherwise (sqrt(2d) sigma2 - X) w.
struct MeasureWeights {
  int dim = 1;
  double t = 0.0;
  double sigma2 = 0.0;  // normalization variance (exact discrete variance)
  double alpha = 0.0;
  bool truncated = false;
  double q = 0.0;
  double eps = 0.0;  // set for mollified weights
  std::size_t window = 0;
  std::vector<double> w;
  std::vector<double> z;  // populated at the critical alpha
};

MeasureWeights weight_fields(const Snapshot& snap, double alpha,
                             std::optional<double> q);

// Weights of the mollified measure M_eps^(q): the exponent uses the exact
// discrete variance of X_eps and the barrier indicator is evaluated at
// t_eps = log(1/eps).
MeasureWeights weight_fields_mollified(const MollifiedField& field,
                                       std::span<const double> barrier_at_teps,
                                       const GridSpec& grid, double sigma2_eps,
                                       double q);

enum class Family { kMAlpha, kMCrit, kD, kMEps };

// Riemann sum over the set's cells; the D family integrates z.
double integrate(const MeasureWeights& weights, const SetSpec& set, Family family,
                 const GridSpec& grid);

// Limit normalizations: sqrt(pi t / 2), sqrt(pi log(1/eps) / 2), or
// 1/(sqrt(2d) - alpha); the D family is returned unchanged.
double renormalize(double value, Family family, double param, int dim);

// Gauge functions.
double phi_modulus(double u);
double varphi(double u, int dim);

// Levy-Prokhorov distance between two cell-mass vectors on a 1-d grid of
// spacing h, restricted to unions of grid cells and to eps on grid
// multiples. Lower bound of the Borel-set metric; diagnostic only.
double levy_prokhorov_1d(std::span<const double> mu, std::span<const double> nu,
                         double h);

// Max over dyadic intervals (lengths 2^-l, l = 0..max_level) of
// interval mass / phi_modulus(length). cell_masses covers [0,1] with a
// power-of-two cell count.
double dyadic_modulus_scan_1d(std::span<const double> cell_masses, int max_level);

}  // namespace gmc
