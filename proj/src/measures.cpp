#include "gmc/measures.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "gmc/errors.hpp"
#include "gmc/stats.hpp"

namespace gmc {

SetSpec SetSpec::from_unit_coords(const GridSpec& grid,
                                  const std::vector<std::array<double, 4>>& unit_boxes,
                                  std::string id) {
  SetSpec s;
  s.id = std::move(id);
  s.dim = grid.dim;
  const double h = grid.spacing();
  const std::size_t wp = grid.window_points();
  auto to_cell = [&](double x) {
    const auto c = static_cast<long>(std::llround(x / h));
    return static_cast<std::size_t>(std::clamp<long>(c, 0, static_cast<long>(wp)));
  };
  for (const auto& b : unit_boxes) {
    Box box;
    box.lo0 = to_cell(b[0]);
    box.hi0 = to_cell(b[1]);
    if (grid.dim == 2) {
      box.lo1 = to_cell(b[2]);
      box.hi1 = to_cell(b[3]);
    } else {
      box.lo1 = 0;
      box.hi1 = 1;
    }
    s.boxes.push_back(box);
  }
  s.validate(grid);
  return s;
}

std::size_t SetSpec::cell_count() const {
  std::size_t n = 0;
  for (const auto& b : boxes) n += (b.hi0 - b.lo0) * (b.hi1 - b.lo1);
  return n;
}

double SetSpec::lebesgue(const GridSpec& grid) const {
  return static_cast<double>(cell_count()) * std::pow(grid.spacing(), grid.dim);
}

double SetSpec::diameter(const GridSpec& grid) const {
  if (boxes.empty()) return 0.0;
  const double h = grid.spacing();
  double lo0 = 1e300, hi0 = -1e300, lo1 = 1e300, hi1 = -1e300;
  for (const auto& b : boxes) {
    lo0 = std::min(lo0, static_cast<double>(b.lo0));
    hi0 = std::max(hi0, static_cast<double>(b.hi0));
    lo1 = std::min(lo1, static_cast<double>(b.lo1));
    hi1 = std::max(hi1, static_cast<double>(b.hi1));
  }
  if (dim == 1) return (hi0 - lo0) * h;
  return std::hypot((hi0 - lo0) * h, (hi1 - lo1) * h);
}

void SetSpec::validate(const GridSpec& grid) const {
  const std::size_t wp = grid.window_points();
  for (const auto& b : boxes) {
    if (b.hi0 < b.lo0 || b.hi0 > wp || (dim == 2 && (b.hi1 < b.lo1 || b.hi1 > wp)))
      throw ValidationError("set: box outside the observation window");
  }
  for (std::size_t i = 0; i < boxes.size(); ++i)
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      const auto& a = boxes[i];
      const auto& b = boxes[j];
      const bool over0 = a.lo0 < b.hi0 && b.lo0 < a.hi0;
      const bool over1 = dim == 1 || (a.lo1 < b.hi1 && b.lo1 < a.hi1);
      if (over0 && over1) throw ValidationError("set: boxes overlap");
    }
}

namespace {

// Copies the observation-window restriction of a torus field.
void window_restrict(std::span<const double> field, const GridSpec& grid,
                     std::vector<double>& out) {
  const std::size_t wp = grid.window_points();
  if (grid.dim == 1) {
    out.assign(field.begin(), field.begin() + static_cast<long>(wp));
    return;
  }
  const std::size_t n = grid.points_per_side;
  out.resize(wp * wp);
  for (std::size_t i = 0; i < wp; ++i)
    for (std::size_t j = 0; j < wp; ++j) out[i * wp + j] = field[i * n + j];
}

}  // namespace

MeasureWeights weight_fields(const Snapshot& snap, double alpha,
                             std::optional<double> q) {
  const GridSpec& grid = *snap.grid;
  MeasureWeights mw;
  mw.dim = grid.dim;
  mw.t = snap.t;
  mw.sigma2 = snap.sigma2;
  mw.alpha = alpha;
  mw.truncated = q.has_value();
  mw.q = q.value_or(0.0);
  mw.window = grid.window_points();
  const double crit = critical_alpha(grid.dim);
  const bool with_z = std::abs(alpha - crit) < 1e-12;
  const std::size_t n = grid.points_per_side;
  const std::size_t wp = mw.window;
  const std::size_t wtotal = grid.dim == 1 ? wp : wp * wp;
  mw.w.resize(wtotal);
  if (with_z) mw.z.resize(wtotal);
  const double half_alpha2 = 0.5 * alpha * alpha * mw.sigma2;
  for (std::size_t c = 0; c < wtotal; ++c) {
    const std::size_t idx = grid.dim == 1 ? c : (c / wp) * n + (c % wp);
    const double xbar = snap.xbar[idx];
    const double x = xbar + snap.x0;
    double w = std::exp(alpha * x - half_alpha2);
    if (mw.truncated && !(snap.barrier_max[idx] < mw.q)) w = 0.0;
    mw.w[c] = w;
    if (with_z) {
      // The truncated family carries the exact-mean martingale prefactor;
      // the untruncated one the exact -d/dalpha prefactor.
      mw.z[c] = mw.truncated ? (crit * snap.t + mw.q - xbar) * w
                             : (crit * mw.sigma2 - x) * w;
    }
  }
  return mw;
}

MeasureWeights weight_fields_mollified(const MollifiedField& field,
                                       std::span<const double> barrier_at_teps,
                                       const GridSpec& grid, double sigma2_eps,
                                       double q) {
  MeasureWeights mw;
  mw.dim = grid.dim;
  mw.t = field.source_t;
  mw.sigma2 = sigma2_eps;
  mw.alpha = critical_alpha(grid.dim);
  mw.truncated = true;
  mw.q = q;
  mw.eps = field.eps;
  mw.window = grid.window_points();
  const std::size_t n = grid.points_per_side;
  const std::size_t wp = mw.window;
  const std::size_t wtotal = grid.dim == 1 ? wp : wp * wp;
  mw.w.resize(wtotal);
  const double d = static_cast<double>(grid.dim);
  for (std::size_t c = 0; c < wtotal; ++c) {
    const std::size_t idx = grid.dim == 1 ? c : (c / wp) * n + (c % wp);
    double w = std::exp(mw.alpha * field.values[idx] - d * sigma2_eps);
    if (!(barrier_at_teps[idx] < q)) w = 0.0;
    mw.w[c] = w;
  }
  return mw;
}

double integrate(const MeasureWeights& weights, const SetSpec& set, Family family,
                 const GridSpec& grid) {
  if (set.boxes.empty() || set.cell_count() == 0) return 0.0;
  const std::vector<double>& field = (family == Family::kD) ? weights.z : weights.w;
  if (field.empty())
    throw ValidationError("integrate: weights lack the requested family");
  const double cell = std::pow(grid.spacing(), grid.dim);
  const std::size_t wp = weights.window;
  KahanSum sum;
  for (const auto& b : set.boxes) {
    for (std::size_t i0 = b.lo0; i0 < b.hi0; ++i0) {
      if (grid.dim == 1) {
        sum.add(field[i0]);
      } else {
        for (std::size_t i1 = b.lo1; i1 < b.hi1; ++i1) sum.add(field[i0 * wp + i1]);
      }
    }
  }
  return sum.value() * cell;
}

double renormalize(double value, Family family, double param, int dim) {
  switch (family) {
    case Family::kD:
      return value;
    case Family::kMCrit:
      return value * std::sqrt(M_PI * param / 2.0);
    case Family::kMEps:
      return value * std::sqrt(M_PI * std::log(1.0 / param) / 2.0);
    case Family::kMAlpha: {
      const double beta = critical_alpha(dim) - param;
      if (!(beta > 0.0))
        throw ValidationError("renormalize: alpha must be strictly subcritical");
      return value / beta;
    }
  }
  return value;
}

double phi_modulus(double u) {
  const double knee = std::exp(-std::exp(1.0));
  if (u >= knee) return std::exp(-0.25);
  const double l = std::log(1.0 / u);
  return std::log(l) * std::pow(l, -0.25);
}

double varphi(double u, int dim) {
  if (u <= 0.0) return 0.0;
  const double l = std::max(1.0, std::log(1.0 / u));
  return std::pow(u, dim) * std::sqrt(l);
}

namespace {

// max over cell subsets A of  sum_{i in A} mu_i - nu(A dilated by m cells),
// in O(n) via sliding-window maxima.
double best_violation(std::span<const double> mu, std::span<const double> nu,
                      long m) {
  const long n = static_cast<long>(mu.size());
  std::vector<double> pre(n + 1, 0.0);
  for (long i = 0; i < n; ++i) pre[i + 1] = pre[i] + nu[i];
  auto nu_range = [&](long lo, long hi) {  // inclusive, clamped
    lo = std::max(lo, 0L);
    hi = std::min(hi, n - 1);
    if (hi < lo) return 0.0;
    return pre[hi + 1] - pre[lo];
  };
  // g[i]: best value over sets whose rightmost pick is i.
  std::vector<double> g(n);
  double best = 0.0;       // empty set
  double prefix_best = 0;  // max g[j] over j <= i - 2m - 1
  std::deque<long> win;    // indices j in [i-2m, i-1], decreasing g[j]+pre[j+m+1]
  auto win_key = [&](long j) { return g[j] + pre[std::min(j + m + 1, n)]; };
  for (long i = 0; i < n; ++i) {
    const long lo = i - 2 * m;
    while (!win.empty() && win.front() < lo) {
      const long j = win.front();
      win.pop_front();
      (void)j;
    }
    // js leaving the window enter the disjoint-cover prefix.
    if (i - 2 * m - 1 >= 0) prefix_best = std::max(prefix_best, g[i - 2 * m - 1]);
    const double full_cost = nu_range(i - m, i + m);
    double val = mu[i] - full_cost;                       // first pick
    val = std::max(val, mu[i] - full_cost + prefix_best); // disjoint covers
    if (!win.empty()) {
      // Overlapping cover: pay nu only on (j+m, i+m].
      const double cand = mu[i] + win_key(win.front()) - pre[std::min(i + m + 1, n)];
      val = std::max(val, cand);
    }
    g[i] = val;
    best = std::max(best, val);
    while (!win.empty() && win_key(win.back()) <= win_key(i)) win.pop_back();
    win.push_back(i);
  }
  return best;
}

bool lp_admissible(std::span<const double> mu, std::span<const double> nu, long m,
                   double h) {
  const double delta = static_cast<double>(m) * h;
  return best_violation(mu, nu, m) <= delta + 1e-15 &&
         best_violation(nu, mu, m) <= delta + 1e-15;
}

}  // namespace

double levy_prokhorov_1d(std::span<const double> mu, std::span<const double> nu,
                         double h) {
  if (mu.size() != nu.size())
    throw ValidationError("levy_prokhorov: measures on different grids");
  const long n = static_cast<long>(mu.size());
  if (n == 0) return 0.0;
  double total = 0.0;
  for (double v : mu) total += v;
  double total_nu = 0.0;
  for (double v : nu) total_nu += v;
  // eps >= max total mass is always admissible, so the search is bracketed
  // even for measures of very different mass.
  long lo = 0;
  long hi = std::max<long>(n, static_cast<long>(
                                  std::ceil(std::max(total, total_nu) / h)) +
                                  1);
  if (lp_admissible(mu, nu, 0, h)) return 0.0;
  // Admissibility is monotone in m; find the smallest admissible multiple.
  while (hi - lo > 1) {
    const long mid = lo + (hi - lo) / 2;
    if (lp_admissible(mu, nu, mid, h))
      hi = mid;
    else
      lo = mid;
  }
  return static_cast<double>(hi) * h;
}

double dyadic_modulus_scan_1d(std::span<const double> cell_masses, int max_level) {
  const std::size_t n = cell_masses.size();
  if (n == 0) return 0.0;
  int finest = 0;
  while ((std::size_t{1} << finest) < n) ++finest;  // n is a power of two
  // Merge bottom-up; at each level the boxes have length 2^-level.
  std::vector<double> sums(cell_masses.begin(), cell_masses.end());
  double best = 0.0;
  for (int level = finest; level >= 0; --level) {
    if (max_level < 0 || level <= max_level) {
      const double gauge = phi_modulus(std::pow(2.0, -level));
      for (double s : sums) best = std::max(best, s / gauge);
    }
    if (level > 0) {
      for (std::size_t i = 0; i < sums.size() / 2; ++i)
        sums[i] = sums[2 * i] + sums[2 * i + 1];
      sums.resize(sums.size() / 2);
    }
  }
  return best;
}

}  // namespace gmc
