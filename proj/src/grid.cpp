#include "gmc/grid.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gmc/errors.hpp"

namespace gmc {

void GridSpec::validate() const {
  if (dim != 1 && dim != 2) throw ValidationError("grid: dim must be 1 or 2");
  if (points_per_side < 8 || (points_per_side & (points_per_side - 1)) != 0)
    throw ValidationError("grid: points_per_side must be a power of two >= 8");
  if (!(box_side >= 2.0)) throw ValidationError("grid: box_side must be >= 2");
}

void ScaleSchedule::validate() const {
  if (levels.size() < 2 || levels.front() != 0.0)
    throw ValidationError("schedule: levels must start at 0 and contain t_max");
  for (std::size_t i = 1; i < levels.size(); ++i) {
    const double step = levels[i] - levels[i - 1];
    if (!(step > 0.0)) throw ValidationError("schedule: levels must increase");
    if (step > 0.05 + 1e-12)
      throw ValidationError("schedule: max step exceeds 0.05 (barrier fidelity)");
  }
  for (double s : snapshots) {
    const bool found = std::any_of(levels.begin(), levels.end(),
                                   [&](double l) { return std::abs(l - s) < 1e-12; });
    if (!found) throw ValidationError("schedule: snapshot level missing from levels");
  }
}

ScaleSchedule make_schedule(double t_max, double max_step,
                            const std::vector<double>& snapshots) {
  if (!(t_max > 0.0)) throw ValidationError("schedule: t_max must be positive");
  if (!(max_step > 0.0 && max_step <= 0.05))
    throw ValidationError("schedule: max_step must lie in (0, 0.05]");
  std::set<double> knots{0.0, t_max};
  for (double s : snapshots) {
    if (!(s > 0.0 && s <= t_max + 1e-12))
      throw ValidationError("schedule: snapshots must lie in (0, t_max]");
    knots.insert(std::min(s, t_max));
  }
  ScaleSchedule sch;
  double prev = 0.0;
  bool first = true;
  for (double k : knots) {
    if (first) {
      sch.levels.push_back(0.0);
      first = false;
      prev = 0.0;
      continue;
    }
    const double span = k - prev;
    const auto steps = static_cast<std::size_t>(std::ceil(span / max_step - 1e-12));
    for (std::size_t i = 1; i <= steps; ++i)
      sch.levels.push_back(prev + span * static_cast<double>(i) / static_cast<double>(steps));
    sch.levels.back() = k;  // land on the knot exactly
    prev = k;
  }
  sch.snapshots.assign(snapshots.begin(), snapshots.end());
  std::sort(sch.snapshots.begin(), sch.snapshots.end());
  sch.validate();
  return sch;
}

void check_resolvable(const GridSpec& grid, const ScaleSchedule& schedule) {
  const double limit = std::log(1.0 / grid.spacing());
  if (schedule.t_max() > limit + 1e-9)
    throw ValidationError("schedule: t_max exceeds log(1/spacing); refine the grid");
}

}  // namespace gmc
