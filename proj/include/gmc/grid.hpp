#pragma once

#include <cstddef>
#include <vector>

namespace gmc {

// Periodic sampling lattice. The box side is at least 2 so that the
// periodized covariance agrees with the true covariance for all distances
// up to 1 (the kernel support), and the observation window [0,1]^d sits
// inside with no boundary bias.
struct GridSpec {
  int dim = 1;
  std::size_t points_per_side = 8192;  // power of two
  double box_side = 2.0;

  double spacing() const { return box_side / static_cast<double>(points_per_side); }
  std::size_t total_points() const {
    return dim == 1 ? points_per_side : points_per_side * points_per_side;
  }
  // Number of lattice cells per side of the observation window [0,1]^d.
  std::size_t window_points() const {
    return static_cast<std::size_t>(1.0 / spacing() + 0.5);
  }
  void validate() const;  // throws ValidationError
};

// Increasing scale levels 0 = s_0 < s_1 < ... < s_m = t_max with step at
// most max_step (barrier fidelity), containing every requested snapshot
// level exactly.
struct ScaleSchedule {
  std::vector<double> levels;     // includes 0 and t_max
  std::vector<double> snapshots;  // subset of levels, increasing

  double t_max() const { return levels.empty() ? 0.0 : levels.back(); }
  std::size_t slab_count() const { return levels.empty() ? 0 : levels.size() - 1; }
  void validate() const;
};

ScaleSchedule make_schedule(double t_max, double max_step,
                            const std::vector<double>& snapshots);

// Resolvable-scale rule: slabs finer than the grid are refused rather than
// aliased.
void check_resolvable(const GridSpec& grid, const ScaleSchedule& schedule);

}  // namespace gmc
