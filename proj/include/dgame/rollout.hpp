#pragma once

#include "dgame/game.hpp"
#include "dgame/net.hpp"
#include "dgame/trajectory.hpp"

#include <memory>
#include <string>
#include <vector>

namespace dgame {

// Feedback law queried by the simulator. Implementations must be reentrant;
// rollouts share controllers read-only.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string id() const = 0;
  virtual Vec player_control(int player, const Vec& x, double t) const = 0;
  // Value prediction used by the generalization metrics; NaN when the
  // controller has no value surface (open-loop replays).
  virtual double value_estimate(int /*player*/, const Vec&, double) const {
    return std::numeric_limits<double>::quiet_NaN();
  }
};

// Closed-form clamp of the Hamiltonian argmax at the player's own value
// gradient.
Vec feedback_step(const Game& game, const Mlp& net, int player, double theta_i,
                  const Vec& x, double t);

// Per-player value networks driving both players.
class NetPairController final : public Controller {
 public:
  NetPairController(const Game& game, std::pair<double, double> theta,
                    std::shared_ptr<const Mlp> net1,
                    std::shared_ptr<const Mlp> net2, std::string id_tag);
  std::string id() const override { return id_; }
  Vec player_control(int player, const Vec& x, double t) const override;
  double value_estimate(int player, const Vec& x, double t) const override;
  const Mlp& net(int player) const { return player == 0 ? *net1_ : *net2_; }

 private:
  const Game& game_;
  std::pair<double, double> theta_;
  std::shared_ptr<const Mlp> net1_, net2_;
  std::string id_;
};

// Replays a stored trajectory's controls, interpolated linearly in time.
// With hold sampling the simulator freezes the control over each step, so a
// shift of dt/2 recenters the held sample and keeps the realized integrals
// second-order accurate against the continuous signal.
class OpenLoopController final : public Controller {
 public:
  OpenLoopController(const Game& game, Trajectory traj, double sample_shift = 0.0);
  std::string id() const override { return "open-loop"; }
  Vec player_control(int player, const Vec&, double t) const override;

 private:
  const Game& game_;
  Trajectory traj_;
  double shift_;
};

struct SimOptions {
  double dt = 0.05;
  // hold: controls sampled once per step (zero-order hold).
  // stage: controller queried at every integrator stage time; used by the
  // convergence-order diagnostics.
  enum class Sampling { hold, stage } sampling = Sampling::hold;
  Vec sanity_lo, sanity_hi;  // optional; empty disables the check
  std::uint64_t seed = 0;    // recorded, not consumed
};

struct SimResult {
  Vec times;      // S+1
  Mat states;     // 2n x (S+1)
  Mat controls;   // 2m x (S+1), last column repeats the final held control
  Mat step_loss;  // 2 x (S+1), penalized running loss at the nodes
  bool collision = false;
  double first_violation_t = std::numeric_limits<double>::quiet_NaN();
  Vec realized_value;  // 2, reward convention, recomputed from the log
  std::string controller_id;
  std::uint64_t seed = 0;
  bool left_sanity_box = false;

  void save_csv(const std::string& path) const;
};

SimResult simulate(const Game& game, std::pair<double, double> theta,
                   const Controller& controller, const Vec& x0,
                   const SimOptions& opts = {});

struct EvalMetrics {
  int n_tests = 0;
  int collisions = 0;
  double col_percent = 0.0;
  double value_mae = 0.0;
  double control_mae = 0.0;
  double control_std = 0.0;
};

// Collision rate over rollouts from the test initial states plus value and
// control errors sampled along the ground-truth trajectories.
EvalMetrics evaluate(const Game& game, std::pair<double, double> theta,
                     const Controller& controller,
                     const std::vector<Trajectory>& tests,
                     const SimOptions& opts = {});

}  // namespace dgame
