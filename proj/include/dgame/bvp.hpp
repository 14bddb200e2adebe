#pragma once

#include "dgame/game.hpp"
#include "dgame/trajectory.hpp"

#include <optional>

namespace dgame {

struct BvpOptions {
  double node_dt = 0.05;      // collocation grid spacing
  double tol = 1e-6;          // scaled max-norm convergence threshold
  int max_newton_iters = 200;
  double backtrack = 0.5;
  double min_step = 1.0 / 1024.0;
  // Penalty continuation: the constraint penalty is scaled by each factor in
  // turn, warm-starting from the previous stage. The last stage must be 1.
  std::vector<double> continuation = {0.1, 1.0};
  double stage_tol = 1e-4;  // tolerance for the intermediate stages
};

struct BvpFailure {
  std::string reason;
  double residual_norm = 0.0;
  int iterations = 0;
};

struct BvpResult {
  std::optional<Trajectory> trajectory;
  BvpFailure failure;  // populated when trajectory is empty
  bool ok() const { return trajectory.has_value(); }
};

// Initial guess on the node grid; build_constant_guess integrates forward
// from x0 under fixed controls and fills the costates by backward Euler.
struct BvpGuess {
  Mat states;    // 2n x N
  Mat costates1; // 2n x N
  Mat costates2; // 2n x N
};

BvpGuess build_constant_guess(const Game& game, const Vec& x0,
                              const Vec& u1_const, const Vec& u2_const,
                              const std::pair<double, double>& theta,
                              int nodes, double dt);

// Solves the two-point boundary value problem of the open-loop equilibrium
// from x0 at time t0: state dynamics forward, costate dynamics backward,
// controls eliminated by the closed-form clamp. Direct collocation on a
// fixed grid with a damped Newton method.
BvpResult solve_bvp(const Game& game, const Vec& x0,
                    const std::pair<double, double>& theta,
                    const BvpGuess& guess, const BvpOptions& opts = {},
                    double t0 = 0.0);

// Corner-control warm starts; converged candidates are ranked by the sum of
// player values and ties resolved toward the lowest warm-start index.
BvpResult solve_multistart(const Game& game, const Vec& x0,
                           const std::pair<double, double>& theta,
                           const BvpOptions& opts = {}, double t0 = 0.0);

struct DatasetOptions {
  BvpOptions bvp;
  double dt_sample = 0.1;
  double max_failure_rate = 0.5;
  bool parallel = true;
};

// Uniformly samples initial states in [lo, hi] (joint box), solves each with
// multistart and packs the converged trajectories resampled at dt_sample.
// Sampling is per-index seeded, so results do not depend on the worker count.
SupervisedDataset generate_dataset(const Game& game,
                                   const std::pair<double, double>& theta,
                                   const Vec& lo, const Vec& hi,
                                   int n_trajectories, std::uint64_t seed,
                                   const DatasetOptions& opts = {});

// Joint ground-truth sampling box of the game.
void joint_gt_box(const Game& game, Vec& lo, Vec& hi);
void joint_hj_box(const Game& game, Vec& lo, Vec& hi);

}  // namespace dgame
