#pragma once

#include "dgame/game.hpp"
#include "dgame/net.hpp"
#include "dgame/rollout.hpp"
#include "dgame/training.hpp"

#include <memory>
#include <optional>

namespace dgame {

// Augmented-state machinery, cost convention throughout: the augmented value
// V_i(x, z, t) answers "can player i keep the constraint satisfied and
// finish with total cost at most z". The networks decompose it as
//   V_i(x, z, t) = max{ A_i(x, t), B_i(x, t) - z },
// where A_i predicts the worst future constraint violation and B_i the
// unconstrained cost-to-go; the z dependence is exact by construction.
struct AugmentedValueNet {
  std::shared_ptr<Mlp> A[2], B[2];
  double z_lo = 0.0, z_hi = 0.0;

  void save(const std::string& dir) const;
  static AugmentedValueNet load(const std::string& dir);
};

// Auxiliary state rate per player: zdot_i = -l_i with the bare running loss.
Vec z_dynamics(const Game& game, const Vec& x, const Vec& u_joint);

struct AugEval {
  double value = 0.0;
  bool b_branch = false;  // true when B - z is active
  Vec grad_x;             // of the active branch, raw units
  double grad_t = 0.0;
  double grad_z = 0.0;  // 0 on the A branch, -1 on the B branch
};

AugEval aug_eval(const AugmentedValueNet& an, int player, const Vec& x,
                 double z, double t);

// max{c(x), g(x) - z} evaluated from explicit branch values; shared by the
// boundary loss and its tests.
double augmented_terminal_target(const Game& game, int player, const Vec& x,
                                 double z, double theta_i);

// Fellow-player feedback on the augmented surface at its own recovered
// budget. Per-player dynamics decouple in every case here, so this argmax
// does not depend on the ego control.
Vec epigraph_policy(const Game& game, const AugmentedValueNet& an, int player,
                    double theta_i, const Vec& x, double t);

// PDE/constraint residual of Vhat for one player at one augmented sample.
// The inner maximization runs over the discrete control grid; the fellow
// control comes from epigraph_policy.
double augmented_residual(const Game& game, const AugmentedValueNet& an,
                          int player, std::pair<double, double> theta,
                          const Vec& x, double z, double t);

// Mean L1 residual plus weighted boundary term over explicit batches; the
// columns of Xc are (x, z, t) and of Xb are (x, z).
double loss_L3(const Game& game, const AugmentedValueNet& an,
               std::pair<double, double> theta, const Mat& Xc, const Mat& Xb,
               double c3);

// Minimal feasible budget at (x, t): +infinity when A > 0, otherwise B
// clipped to the sampling range.
double recover_value(const AugmentedValueNet& an, int player, const Vec& x,
                     double t);
// Unclipped variant; exact under the max decomposition.
double optimal_budget(const AugmentedValueNet& an, int player, const Vec& x,
                      double t);
// Generic bisection on a monotone-in-z callable; smallest z with V <= 0.
double bisect_budget(const std::function<double(double)>& value_at, double z_lo,
                     double z_hi, double tol = 1e-6);

// Boolean unsafe field A(x, t) > 0 over the given states.
std::vector<bool> unsafe_set(const AugmentedValueNet& an, int player,
                             const Mat& states, double t);
void save_unsafe_csv(const AugmentedValueNet& an, const Game& game,
                     const std::string& path, double t, double v_fixed);

// One-step optimality gap of Lemma-2 form at a sample, in raw cost units:
// |V(x,z,t) - min_u max{max c over [t,t+h], V(x', z', t+h)}|.
double lemma2_residual(const Game& game, const AugmentedValueNet& an,
                       int player, std::pair<double, double> theta,
                       const Vec& x, double z, double t, double h);

// Closed-loop controller on the augmented surface.
class EpigraphController final : public Controller {
 public:
  EpigraphController(const Game& game, std::pair<double, double> theta,
                     AugmentedValueNet an, std::string id_tag);
  std::string id() const override { return id_; }
  Vec player_control(int player, const Vec& x, double t) const override;
  double value_estimate(int player, const Vec& x, double t) const override;

 private:
  const Game& game_;
  std::pair<double, double> theta_;
  AugmentedValueNet an_;
  std::string id_;
};

struct EpigraphResult {
  AugmentedValueNet net;
  std::vector<TrainLogRow> log;
  bool nan_abort = false;
};

// Boundary-anchored pretraining of A and B followed by the L3 curriculum;
// optional supervised data adds the value/costate regression on B.
EpigraphResult train_epigraph(const Game& game,
                              std::pair<double, double> theta,
                              const TrainConfig& cfg,
                              const SupervisedDataset* data = nullptr);

}  // namespace dgame
