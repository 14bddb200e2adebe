#pragma once

#include "dgame/game.hpp"
#include "dgame/net.hpp"
#include "dgame/rollout.hpp"

#include <array>
#include <memory>

namespace dgame {

// Value nets for every ordered type pair; index 0 = aggressive,
// 1 = non-aggressive, nets[t1][t2][player].
struct NetBank {
  std::array<std::array<std::array<std::shared_ptr<const Mlp>, 2>, 2>, 2> nets;

  static int type_index(double theta) {
    return theta == kTypeAggressive ? 0 : 1;
  }
  const Mlp& net(double theta1, double theta2, int player) const;
  bool complete() const;
};

struct BeliefConfig {
  double prior1 = 0.5;  // initial P(player 1 is aggressive)
  double prior2 = 0.5;
  bool empathetic = true;
  double mixing = 0.95;  // weight kept on the current belief, 1 - eps
  double dt = 0.05;
};

// Boltzmann action distribution of `player` over the discrete control grid
// under a hypothesized type pair; h = grad_x(value)^T f - penalized loss,
// the fellow control fixed at its closed-form clamp under the hypothesis.
Vec action_likelihoods(const Game& game, const NetBank& bank,
                       std::pair<double, double> hyp, int player, const Vec& x,
                       double t);

// Index of the grid control nearest to an executed one.
Eigen::Index quantize_control(const Game& game, const Vec& u_player);

// Two-hypothesis Bayes posterior on "player i is aggressive".
double bayes_update(double p, double q_aggressive, double q_nonaggressive);

// Empathetic marginal likelihood of the observed action index under
// hypothesis theta_i, averaging over the fellow's type with belief p_fellow.
double marginal_likelihood(const Game& game, const NetBank& bank, int player,
                           double theta_i, double p_fellow, const Vec& x,
                           double t, Eigen::Index action);

double mix_toward_prior(double p, double prior, double keep);

// Most likely fellow type; ties resolve to aggressive.
double map_type(double p_aggressive);

struct BeliefSimResult {
  Vec times;
  Mat states;
  Mat controls;
  Mat beliefs;        // 2 x (S+1): belief that player i is aggressive
  Mat assumed_types;  // 2 x (S+1): fellow type assumed by each player
  bool collision = false;
  double first_violation_t = std::numeric_limits<double>::quiet_NaN();

  void save_csv(const std::string& path) const;
};

// Incomplete-information interaction: per step the beliefs are mixed toward
// the prior, the previous controls are observed and Bayes-updated, each
// player picks the net matching (its true type, the fellow's MAP type) and
// the joint state advances one RK4 step under held controls.
BeliefSimResult simulate_incomplete(const Game& game, const NetBank& bank,
                                    std::pair<double, double> true_theta,
                                    const BeliefConfig& cfg, const Vec& x0);

}  // namespace dgame
