#include "dgame/rollout.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace dgame {

Vec feedback_step(const Game& game, const Mlp& net, int player, double theta_i,
                  const Vec& x, double t) {
  const int n2 = game.joint_state_dim();
  Vec input(n2 + 1);
  input.head(n2) = x;
  input[n2] = t;
  Vec g = net.input_gradient(input);
  if (!g.allFinite())
    throw std::runtime_error("rollout: non-finite value gradient at t=" +
                             std::to_string(t));
  return game.argmax_control(player, x, g.head(n2), theta_i);
}

NetPairController::NetPairController(const Game& game,
                                     std::pair<double, double> theta,
                                     std::shared_ptr<const Mlp> net1,
                                     std::shared_ptr<const Mlp> net2,
                                     std::string id_tag)
    : game_(game), theta_(theta), net1_(std::move(net1)),
      net2_(std::move(net2)), id_(std::move(id_tag)) {}

Vec NetPairController::player_control(int player, const Vec& x,
                                      double t) const {
  return feedback_step(game_, net(player), player,
                       player == 0 ? theta_.first : theta_.second, x, t);
}

double NetPairController::value_estimate(int player, const Vec& x,
                                         double t) const {
  Vec input(x.size() + 1);
  input.head(x.size()) = x;
  input[x.size()] = t;
  return net(player).forward(input);
}

OpenLoopController::OpenLoopController(const Game& game, Trajectory traj,
                                       double sample_shift)
    : game_(game), traj_(std::move(traj)), shift_(sample_shift) {}

Vec OpenLoopController::player_control(int player, const Vec&,
                                       double t) const {
  t += shift_;
  const Vec& times = traj_.times;
  const int m = game_.control_dim();
  Eigen::Index n = times.size();
  if (t <= times[0]) return traj_.controls.col(0).segment(player * m, m);
  if (t >= times[n - 1]) return traj_.controls.col(n - 1).segment(player * m, m);
  Eigen::Index j = 0;
  while (times[j + 1] < t) ++j;
  double w = (t - times[j]) / (times[j + 1] - times[j]);
  Vec u = (1.0 - w) * traj_.controls.col(j) + w * traj_.controls.col(j + 1);
  return u.segment(player * m, m);
}

SimResult simulate(const Game& game, std::pair<double, double> theta,
                   const Controller& controller, const Vec& x0,
                   const SimOptions& opts) {
  const int n2 = game.joint_state_dim();
  const int m2 = game.joint_control_dim();
  const double T = game.horizon();
  const int steps = static_cast<int>(std::lround(T / opts.dt));
  if (std::abs(steps * opts.dt - T) > 1e-9)
    throw std::invalid_argument("rollout: dt must divide the horizon");

  SimResult out;
  out.times = Vec(steps + 1);
  out.states = Mat(n2, steps + 1);
  out.controls = Mat(m2, steps + 1);
  out.step_loss = Mat(2, steps + 1);
  out.controller_id = controller.id();
  out.seed = opts.seed;

  auto joint_at = [&](const Vec& x, double t) {
    return game.stack_controls(controller.player_control(0, x, t),
                               controller.player_control(1, x, t));
  };

  Vec x = x0;
  for (int k = 0; k <= steps; ++k) {
    double t = k * opts.dt;
    out.times[k] = t;
    out.states.col(k) = x;
    Vec u = joint_at(x, t);
    out.controls.col(k) = u;
    for (int player = 0; player < 2; ++player) {
      double th = player == 0 ? theta.first : theta.second;
      out.step_loss(player, k) = game.running_loss(
          player, x, u.segment(player * game.control_dim(), game.control_dim()),
          th, true);
      if (game.constraint(player, x, th) > 0.0 && !out.collision) {
        out.collision = true;
        out.first_violation_t = t;
      }
    }
    if (opts.sanity_lo.size() == n2 && !out.left_sanity_box) {
      for (int c = 0; c < n2; ++c)
        if (x[c] < opts.sanity_lo[c] || x[c] > opts.sanity_hi[c])
          out.left_sanity_box = true;
    }
    if (k == steps) break;

    const double h = opts.dt;
    if (opts.sampling == SimOptions::Sampling::hold) {
      Vec k1 = game.dynamics(x, u);
      Vec k2 = game.dynamics(x + 0.5 * h * k1, u);
      Vec k3 = game.dynamics(x + 0.5 * h * k2, u);
      Vec k4 = game.dynamics(x + h * k3, u);
      x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    } else {
      Vec k1 = game.dynamics(x, u);
      Vec k2 = game.dynamics(x + 0.5 * h * k1, joint_at(x + 0.5 * h * k1, t + 0.5 * h));
      Vec k3 = game.dynamics(x + 0.5 * h * k2, joint_at(x + 0.5 * h * k2, t + 0.5 * h));
      Vec k4 = game.dynamics(x + h * k3, joint_at(x + h * k3, t + h));
      x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
  }

  out.realized_value = Vec(2);
  for (int player = 0; player < 2; ++player)
    out.realized_value[player] =
        path_reward_values(game, player, player == 0 ? theta.first : theta.second,
                           out.times, out.states, out.controls)[0];
  return out;
}

void SimResult::save_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("rollout: cannot write " + path);
  f << "t";
  for (Eigen::Index i = 0; i < states.rows(); ++i) f << ",x" << i;
  for (Eigen::Index i = 0; i < controls.rows(); ++i) f << ",u" << i;
  f << ",loss1,loss2\n";
  for (Eigen::Index k = 0; k < times.size(); ++k) {
    f << format_double(times[k]);
    for (Eigen::Index i = 0; i < states.rows(); ++i)
      f << "," << format_double(states(i, k));
    for (Eigen::Index i = 0; i < controls.rows(); ++i)
      f << "," << format_double(controls(i, k));
    f << "," << format_double(step_loss(0, k)) << ","
      << format_double(step_loss(1, k)) << "\n";
  }
}

EvalMetrics evaluate(const Game& game, std::pair<double, double> theta,
                     const Controller& controller,
                     const std::vector<Trajectory>& tests,
                     const SimOptions& opts) {
  if (tests.empty()) throw std::invalid_argument("evaluate: empty test set");
  EvalMetrics m;
  m.n_tests = static_cast<int>(tests.size());

  std::vector<int> collided(tests.size(), 0);
  parallel_for(tests.size(), [&](std::size_t k) {
    SimResult r = simulate(game, theta, controller, tests[k].states.col(0), opts);
    collided[k] = r.collision ? 1 : 0;
  });
  for (int c : collided) m.collisions += c;
  m.col_percent = 100.0 * m.collisions / static_cast<double>(m.n_tests);

  // Generalization errors along the ground-truth trajectories.
  double vsum = 0, usum = 0, usq = 0;
  long long vcount = 0, ucount = 0;
  const int mdim = game.control_dim();
  for (const auto& tr : tests) {
    for (Eigen::Index j = 0; j < tr.points(); ++j) {
      const Vec x = tr.states.col(j);
      double t = tr.times[j];
      for (int player = 0; player < 2; ++player) {
        double vhat = controller.value_estimate(player, x, t);
        if (std::isfinite(vhat)) {
          vsum += std::abs(vhat - tr.values(player, j));
          ++vcount;
        }
        Vec uhat = controller.player_control(player, x, t);
        Vec ugt = tr.controls.col(j).segment(player * mdim, mdim);
        for (int a = 0; a < mdim; ++a) {
          double e = std::abs(uhat[a] - ugt[a]);
          usum += e;
          usq += e * e;
          ++ucount;
        }
      }
    }
  }
  m.value_mae = vcount ? vsum / static_cast<double>(vcount)
                       : std::numeric_limits<double>::quiet_NaN();
  if (ucount) {
    m.control_mae = usum / static_cast<double>(ucount);
    m.control_std = std::sqrt(
        std::max(0.0, usq / static_cast<double>(ucount) - m.control_mae * m.control_mae));
  }
  return m;
}

}  // namespace dgame
