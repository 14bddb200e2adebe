#pragma once

#include "dgame/common.hpp"
#include "dgame/config.hpp"

#include <memory>
#include <string>
#include <vector>

namespace dgame {

// Joint state of both players at a time. x stacks the per-player states,
// player 1 block first.
struct JointState {
  double t = 0.0;
  Vec x;
};

// A two-player differential game instance. All members are pure functions of
// their arguments; instances are immutable after construction and safe to
// share across threads.
//
// Sign conventions: running/terminal losses are costs (players minimize).
// Everything downstream that speaks of "value" in reward form uses
// value = -(integral of penalized loss + terminal loss), so that the
// Hamiltonian maximized by the players is lambda^T f - loss.
class Game {
 public:
  virtual ~Game() = default;

  virtual std::string name() const = 0;
  virtual int state_dim() const = 0;    // per player
  virtual int control_dim() const = 0;  // per player
  int joint_state_dim() const { return 2 * state_dim(); }
  int joint_control_dim() const { return 2 * control_dim(); }
  virtual double horizon() const = 0;

  // Per-player control box (identical for both players in all cases).
  virtual Vec control_lo() const = 0;
  virtual Vec control_hi() const = 0;

  // Type parameters. Untyped games return a single placeholder type.
  virtual std::vector<double> type_set() const = 0;

  // Joint dynamics xdot = f(x, u), u stacks both players' controls.
  virtual Vec dynamics(const Vec& x, const Vec& u) const = 0;
  virtual Mat dynamics_jacobian_x(const Vec& x, const Vec& u) const = 0;

  // Instantaneous loss of `player` (0 or 1). With penalized = true this is
  // the soft-constraint loss used by the PDE and BVP machinery; with false
  // it is the bare control cost.
  virtual double running_loss(int player, const Vec& x, const Vec& u_i,
                              double theta_i, bool penalized) const = 0;
  virtual Vec running_loss_grad_x(int player, const Vec& x, const Vec& u_i,
                                  double theta_i, bool penalized) const = 0;

  virtual double terminal_loss(int player, const Vec& x_T) const = 0;
  virtual Vec terminal_loss_grad_x(int player, const Vec& x_T) const = 0;

  // Constraint indicator: c > 0 means `player` is in violation.
  virtual double constraint(int player, const Vec& x, double theta_i) const = 0;

  // Closed-form box-constrained maximizer of lambda^T f - loss over the
  // player's own control. The constraint penalty does not depend on the
  // control, so penalized and unpenalized losses share the same argmax.
  virtual Vec argmax_control(int player, const Vec& x, const Vec& lambda_i,
                             double theta_i) const = 0;

  // Sampling boxes (per player, over that player's own state block).
  virtual void gt_box(int player, Vec& lo, Vec& hi) const = 0;
  virtual void hj_box(int player, Vec& lo, Vec& hi) const = 0;

  // Auxiliary-state range for epigraphical learning (cost convention).
  virtual void z_range(double& lo, double& hi) const = 0;

  // Values are divided by this before training so targets are O(1).
  virtual double value_scale() const = 0;

  // Scale of the constraint function, used by the augmented-value nets.
  virtual double constraint_scale() const { return 1.0; }

  // Per-axis discrete control values shared by the belief engine, the grid
  // solver and the augmented Hamiltonian.
  virtual std::vector<Vec> control_axes() const;

  // Per-player constant controls used to seed boundary-value solves: the
  // acceleration-like last axis at its bounds, remaining axes at mid-box.
  virtual std::vector<Vec> warm_start_controls() const;

  virtual Config to_config() const = 0;
  std::uint64_t config_hash() const { return to_config().hash(); }

  // Convenience: joint control from per-player controls.
  Vec stack_controls(const Vec& u1, const Vec& u2) const;
  Vec player_control(const Vec& u_joint, int player) const;
  Vec player_state(const Vec& x_joint, int player) const;
};

// Enumerates the cartesian product of per-axis grids as columns (m x K).
Mat control_grid_product(const std::vector<Vec>& axes);

std::unique_ptr<Game> make_game(const Config& cfg);
std::unique_ptr<Game> make_game_by_name(const std::string& name);

// Case 1 type codes. Aggressive players use theta = 1, non-aggressive 5.
constexpr double kTypeAggressive = 1.0;
constexpr double kTypeNonAggressive = 5.0;
std::string type_label(double theta);
double type_from_label(const std::string& label);

}  // namespace dgame
