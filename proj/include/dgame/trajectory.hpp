#pragma once

#include "dgame/common.hpp"
#include "dgame/game.hpp"

#include <string>
#include <vector>

namespace dgame {

// One equilibrium trajectory on a uniform time grid. Values use the reward
// convention: v_i(t) = -(integral of penalized loss from t to T + terminal
// loss), so costate_i = d v_i / d x along the path and
// costate_i(T) = -grad g_i.
struct Trajectory {
  Vec times;                  // N
  Mat states;                 // 2n x N
  Mat controls;               // 2m x N
  Mat values;                 // 2 x N
  std::vector<Mat> costates;  // [2], each 2n x N

  bool converged = false;
  double residual_norm = 0.0;  // scaled max-norm at exit
  int warm_start = -1;
  int newton_iterations = 0;

  Eigen::Index points() const { return times.size(); }
  // Keeps every (stride)-th node starting at 0; the last node is always kept.
  Trajectory resampled(int stride) const;
};

struct DatasetMeta {
  std::string game_case;
  std::uint64_t game_hash = 0;
  double theta1 = 0, theta2 = 0;
  int n_requested = 0;
  int n_converged = 0;
  int n_failed = 0;
  std::uint64_t seed = 0;
  double dt_sample = 0.1;
  Vec lo, hi;  // joint initial-state sampling box
};

// BVP-generated supervision: trajectories resampled on the dataset grid.
// Each stored point supervises both players.
struct SupervisedDataset {
  DatasetMeta meta;
  std::vector<Trajectory> trajectories;

  Eigen::Index total_points() const;

  // Flat training views for one player: inputs (x, t) as columns, value row
  // and costate columns aligned with the inputs.
  void player_matrices(int player, Mat& X, Vec& values, Mat& costates) const;

  void save_csv(const std::string& path) const;
  void save_binary(const std::string& path) const;
  void save_manifest(const std::string& path) const;
  static SupervisedDataset load_csv(const std::string& path,
                                    const std::string& manifest_path);
  static SupervisedDataset load_binary(const std::string& path,
                                       const std::string& manifest_path);
};

// Shared quadrature: reward value of player i along a sampled path with the
// trapezoid rule, -(sum of ltilde dt + g(x_T)).
Vec path_reward_values(const Game& game, int player, double theta_i,
                       const Vec& times, const Mat& states,
                       const Mat& controls);

}  // namespace dgame
