#pragma once

#include "dgame/game.hpp"

#include <string>
#include <vector>

namespace dgame {

// Grid layout for the intersection case: axes (d1, v1, d2, v2). dx refines
// the position axes; the velocity axes keep a fixed spacing.
struct DpAxes {
  double d_lo = 15.0, d_hi = 42.0, dx = 0.5;
  double v_lo = 8.0, v_hi = 30.0, dv = 1.0;
  double dt = 0.1;
};

struct DpDiagnostics {
  int clamped_feet = 0;          // foot points outside the hull
  int cycling_nodes = 0;         // best-response iteration did not settle
  double bellman_residual_p50 = 0.0;
  double bellman_residual_p95 = 0.0;
};

// Dense backward-induction value over the grid at t = 0 (reward convention,
// terminal slice seeded with -g). Constraint-violating nodes are pinned to
// unsafe_fill at every time.
struct GridValue {
  DpAxes axes;
  int nd = 0, nv = 0;
  std::pair<double, double> theta{1.0, 1.0};
  double unsafe_fill = -100.0;
  std::uint64_t game_hash = 0;
  std::vector<double> value[2];  // flattened (d1, v1, d2, v2), players 0/1

  Eigen::Index index(int i1, int j1, int i2, int j2) const {
    return ((static_cast<Eigen::Index>(i1) * nv + j1) * nd + i2) * nv + j2;
  }
  double d_at(int i) const { return axes.d_lo + i * axes.dx; }
  double v_at(int j) const { return axes.v_lo + j * axes.dv; }

  // Multilinear interpolation at a joint state. touched_unsafe reports
  // whether any corner carries the unsafe fill; outside reports hull exits.
  double interpolate(int player, const Vec& x, bool& touched_unsafe,
                     bool& outside) const;

  void save(const std::string& path) const;
  static GridValue load(const std::string& path);

  // (d1, d2) slice at fixed velocities for contour plots.
  void save_slice_csv(const std::string& path, double v1, double v2) const;
};

GridValue dp_solve(const Game& game, std::pair<double, double> theta,
                   const DpAxes& axes, DpDiagnostics* diag = nullptr);

struct CompareStats {
  double mae = 0.0;
  double max_err = 0.0;
  int used = 0;
  int skipped_outside = 0;
  int skipped_unsafe = 0;
};

// Interpolates the grid at the reference states and reports the absolute
// error statistics against the reference values, excluding points whose
// interpolation cell touches an unsafe-pinned node.
CompareStats compare_values(const GridValue& grid, int player,
                            const Mat& states, const Vec& values);

}  // namespace dgame
