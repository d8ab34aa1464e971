#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gmc/interp.hpp"

namespace gmc {

// Parameters of an almost star-scale invariant kernel
//   K(x,y) = k0 + int_0^inf (1 - eta1 e^(-eta2 t)) kappa(e^t (x-y)) dt,
// with kappa a smooth radial positive definite bump supported in B(0,1).
// The optional constant part k0 is the simplest Hoelder positive definite
// kernel and corresponds to a single global Gaussian mode.
struct StarScaleParams {
  double eta1 = 1.0;
  double eta2 = 1.0;
  int dim = 1;
  double k0_constant = 0.0;

  void validate() const;  // throws ValidationError
};

// Radial profile kappa = (psi * psi) / (psi * psi)(0) with psi the standard
// smooth bump of radius 1/2. kappa(0) = 1 and kappa(r) = 0 for r >= 1 hold
// exactly; positive definiteness comes from the self-convolution form.
class BumpProfile {
 public:
  static const BumpProfile& standard(int dim);

  double operator()(double r) const;
  int dim() const { return dim_; }
  std::size_t resolution() const { return table_.size(); }
  const CubicSplineTable& radial_table() const { return table_; }
  const std::string& inner_profile() const { return inner_profile_; }

 private:
  BumpProfile(int dim, std::size_t resolution);
  int dim_;
  CubicSplineTable table_;
  std::string inner_profile_;
};

double kappa(double r, const BumpProfile& profile);

// Unique positive solution t' of t' - (eta1/eta2)(1 - e^(-eta2 t')) = t.
// Always lies in [t, t + eta1/eta2].
double solve_scale_time(double t, const StarScaleParams& params);

// Covariance of the slab increment X_{s1} - X_{s0} at separation r,
// i.e. Kbar_{s1}(r) - Kbar_{s0}(r). Zero exactly for r >= e^(-s0').
double slab_covariance(double s0, double s1, double r, const StarScaleParams& params,
                       const BumpProfile& profile);

// K_t(r) = k0 + Kbar_t(r).
double k_t_value(double t, double r, const StarScaleParams& params,
                 const BumpProfile& profile);

enum class CovKind { kSlab, kKbarT, kKT, kKEps, kKbarCross };

// Radial covariance tabulation with monotone cubic interpolation. Endpoint
// nodes are pinned to their analytic values (r=0 mass and zero beyond the
// support radius).
struct CovarianceTable {
  CovKind kind = CovKind::kSlab;
  double s0 = 0.0, s1 = 0.0;  // slab parameters, when applicable
  double t = 0.0;             // scale parameter, when applicable
  double eps = 0.0;           // mollification scale, when applicable
  double support = 0.0;       // values are exactly 0 for r >= support
  double quadrature_tol = 1e-10;
  double k0 = 0.0;  // added on evaluation for the kKT kind
  PchipTable radial;

  double operator()(double r) const;
  void dump_csv(std::ostream& os) const;
};

CovarianceTable build_slab_table(double s0, double s1, const StarScaleParams& params,
                                 const BumpProfile& profile, std::size_t resolution = 4096);
CovarianceTable build_kbar_table(double t, const StarScaleParams& params,
                                 const BumpProfile& profile, std::size_t resolution = 4096);
CovarianceTable build_kt_table(double t, const StarScaleParams& params,
                               const BumpProfile& profile, std::size_t resolution = 4096);

// ---- Mollifiers ----------------------------------------------------------

// Two distinct radial C_c^inf mollifier shapes, used to exercise
// mollifier-independence of the renormalized measures.
enum class ThetaKind { kStandard, kSharp };

double theta_unnormalized(ThetaKind kind, double r);

// Lattice weights of theta_eps on spacing h, renormalized to unit sum.
// 1-d weights are indexed by offset j in [-m, m]; the 2-d variant carries
// explicit (j1, j2) offsets inside the support disk.
struct ThetaWeights1d {
  int m = 0;
  std::vector<double> w;  // size 2m+1, w[m + j] is the weight of offset j
};
struct ThetaWeights2d {
  std::vector<int> j1, j2;
  std::vector<double> w;
};
ThetaWeights1d theta_lattice_weights_1d(ThetaKind kind, double eps, double h);
ThetaWeights2d theta_lattice_weights_2d(ThetaKind kind, double eps, double h);

// Mollified covariance at separation r, computed by discrete convolution on
// a lattice of spacing h so that it matches the covariance of a lattice
// field mollified with the same weights.
//   kKbarCross: (Kbar_t * theta_eps)(r)          (single convolution)
//   kKEps:      k0 + (Kbar_t * theta_eps * theta_eps)(r)  (double convolution)
// Pass t < 0 for the infinite-scale kernel truncated at t = log(1/eps) + 4.
double mollified_covariance(double t, double eps, double r, CovKind kind,
                            ThetaKind theta, const StarScaleParams& params,
                            const BumpProfile& profile, double h);

// ---- Envelope checks -----------------------------------------------------

// Kbar_t(r) <= t AND log_+(1/r) at every table node (zero slack).
bool steak_bound_holds(const CovarianceTable& kbar_table);

// max over the given radii of |value(r) - t AND log_+(1/(r or eps))|.
double log_bound_deviation(double t, double eps, const std::vector<double>& radii,
                           const std::vector<double>& values);

// Lattice covariance sequence of Kbar_t on a periodic lattice of n points
// with spacing h (min-image distances). Used by positive definiteness
// witnesses and by the sampler-facing mollified tables.
std::vector<double> lattice_kbar_sequence(double t, std::size_t n, double h,
                                          const StarScaleParams& params,
                                          const BumpProfile& profile);

}  // namespace gmc
