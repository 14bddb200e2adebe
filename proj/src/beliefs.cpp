#include "dgame/beliefs.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace dgame {

const Mlp& NetBank::net(double theta1, double theta2, int player) const {
  const auto& ptr = nets[static_cast<std::size_t>(type_index(theta1))]
                        [static_cast<std::size_t>(type_index(theta2))]
                        [static_cast<std::size_t>(player)];
  if (!ptr)
    throw std::runtime_error("beliefs: missing net for type pair (" +
                             type_label(theta1) + "," + type_label(theta2) +
                             ")");
  return *ptr;
}

bool NetBank::complete() const {
  for (const auto& row : nets)
    for (const auto& cell : row)
      for (const auto& ptr : cell)
        if (!ptr) return false;
  return true;
}

Vec action_likelihoods(const Game& game, const NetBank& bank,
                       std::pair<double, double> hyp, int player, const Vec& x,
                       double t) {
  const int n2 = game.joint_state_dim();
  const Mlp& own = bank.net(hyp.first, hyp.second, player);
  const Mlp& fel = bank.net(hyp.first, hyp.second, 1 - player);
  const double theta_i = player == 0 ? hyp.first : hyp.second;
  const double theta_f = player == 0 ? hyp.second : hyp.first;

  Vec input(n2 + 1);
  input.head(n2) = x;
  input[n2] = t;
  Vec g_own = own.input_gradient(input).head(n2);
  Vec g_fel = fel.input_gradient(input).head(n2);
  Vec u_fel = game.argmax_control(1 - player, x, g_fel, theta_f);

  Mat grid = control_grid_product(game.control_axes());
  Vec h(grid.cols());
  for (Eigen::Index k = 0; k < grid.cols(); ++k) {
    Vec ui = grid.col(k);
    Vec u = player == 0 ? game.stack_controls(ui, u_fel)
                        : game.stack_controls(u_fel, ui);
    h[k] = g_own.dot(game.dynamics(x, u)) -
           game.running_loss(player, x, ui, theta_i, true);
  }
  h.array() -= h.maxCoeff();  // softmax shift invariance
  Vec q = h.array().exp().matrix();
  q /= q.sum();
  return q;
}

Eigen::Index quantize_control(const Game& game, const Vec& u_player) {
  Mat grid = control_grid_product(game.control_axes());
  Eigen::Index best = 0;
  double best_d = 1e300;
  for (Eigen::Index k = 0; k < grid.cols(); ++k) {
    double d = (grid.col(k) - u_player).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

double bayes_update(double p, double qa, double qna) {
  double denom = qa * p + qna * (1.0 - p);
  if (denom <= 0.0) return p;  // degenerate likelihoods observe nothing
  return qa * p / denom;
}

double marginal_likelihood(const Game& game, const NetBank& bank, int player,
                           double theta_i, double p_fellow, const Vec& x,
                           double t, Eigen::Index action) {
  auto pair_for = [&](double ti, double tf) {
    return player == 0 ? std::make_pair(ti, tf) : std::make_pair(tf, ti);
  };
  double q_a = action_likelihoods(game, bank, pair_for(theta_i, kTypeAggressive),
                                  player, x, t)[action];
  double q_na = action_likelihoods(
      game, bank, pair_for(theta_i, kTypeNonAggressive), player, x, t)[action];
  return q_a * p_fellow + q_na * (1.0 - p_fellow);
}

double mix_toward_prior(double p, double prior, double keep) {
  return keep * p + (1.0 - keep) * prior;
}

double map_type(double p_aggressive) {
  return p_aggressive >= 0.5 ? kTypeAggressive : kTypeNonAggressive;
}

BeliefSimResult simulate_incomplete(const Game& game, const NetBank& bank,
                                    std::pair<double, double> true_theta,
                                    const BeliefConfig& cfg, const Vec& x0) {
  if (!bank.complete())
    throw std::runtime_error("beliefs: all four type-pair nets are required");
  const int n2 = game.joint_state_dim();
  const int m = game.control_dim();
  const double T = game.horizon();
  const int steps = static_cast<int>(std::lround(T / cfg.dt));

  BeliefSimResult out;
  out.times = Vec(steps + 1);
  out.states = Mat(n2, steps + 1);
  out.controls = Mat(2 * m, steps + 1);
  out.beliefs = Mat(2, steps + 1);
  out.assumed_types = Mat(2, steps + 1);

  // belief[i]: probability that player i is aggressive, as tracked by its
  // fellow. Empathetic players share these; non-empathetic ones condition
  // the likelihood on their own true type instead of marginalizing.
  double prior[2] = {cfg.prior1, cfg.prior2};
  double belief[2] = {cfg.prior1, cfg.prior2};
  const double true_of[2] = {true_theta.first, true_theta.second};

  Vec x = x0;
  Vec u_prev;
  Mat grid = control_grid_product(game.control_axes());
  (void)grid;

  for (int k = 0; k <= steps; ++k) {
    double t = k * cfg.dt;
    out.times[k] = t;
    out.states.col(k) = x;

    for (int i = 0; i < 2; ++i)
      belief[i] = mix_toward_prior(belief[i], prior[i], cfg.mixing);

    if (k > 0) {
      for (int i = 0; i < 2; ++i) {
        Eigen::Index action = quantize_control(game, u_prev.segment(i * m, m));
        double qa, qna;
        double tprev = (k - 1) * cfg.dt;
        const Vec xprev = out.states.col(k - 1);
        if (cfg.empathetic) {
          qa = marginal_likelihood(game, bank, i, kTypeAggressive,
                                   belief[1 - i], xprev, tprev, action);
          qna = marginal_likelihood(game, bank, i, kTypeNonAggressive,
                                    belief[1 - i], xprev, tprev, action);
        } else {
          auto pair_for = [&](double ti) {
            return i == 0 ? std::make_pair(ti, true_of[1])
                          : std::make_pair(true_of[0], ti);
          };
          qa = action_likelihoods(game, bank, pair_for(kTypeAggressive), i,
                                  xprev, tprev)[action];
          qna = action_likelihoods(game, bank, pair_for(kTypeNonAggressive), i,
                                   xprev, tprev)[action];
        }
        belief[i] = bayes_update(belief[i], qa, qna);
      }
    }
    out.beliefs(0, k) = belief[0];
    out.beliefs(1, k) = belief[1];

    // Policy selection: own true type, fellow's MAP type.
    Vec u(2 * m);
    for (int i = 0; i < 2; ++i) {
      double fellow_map = map_type(belief[1 - i]);
      out.assumed_types(i, k) = fellow_map;
      auto pair = i == 0 ? std::make_pair(true_of[0], fellow_map)
                         : std::make_pair(fellow_map, true_of[1]);
      const Mlp& net = bank.net(pair.first, pair.second, i);
      u.segment(i * m, m) = feedback_step(game, net, i, true_of[i], x, t);
    }
    out.controls.col(k) = u;

    for (int i = 0; i < 2; ++i)
      if (game.constraint(i, x, true_of[i]) > 0.0 && !out.collision) {
        out.collision = true;
        out.first_violation_t = t;
      }
    if (k == steps) break;

    const double h = cfg.dt;
    Vec k1 = game.dynamics(x, u);
    Vec k2 = game.dynamics(x + 0.5 * h * k1, u);
    Vec k3 = game.dynamics(x + 0.5 * h * k2, u);
    Vec k4 = game.dynamics(x + h * k3, u);
    x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    u_prev = u;
  }
  return out;
}

void BeliefSimResult::save_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("beliefs: cannot write " + path);
  f << "t,p1_aggressive,p2_aggressive,assumed_fellow_1,assumed_fellow_2";
  for (Eigen::Index i = 0; i < states.rows(); ++i) f << ",x" << i;
  f << "\n";
  for (Eigen::Index k = 0; k < times.size(); ++k) {
    f << format_double(times[k]) << "," << format_double(beliefs(0, k)) << ","
      << format_double(beliefs(1, k)) << ","
      << type_label(assumed_types(0, k)) << ","
      << type_label(assumed_types(1, k));
    for (Eigen::Index i = 0; i < states.rows(); ++i)
      f << "," << format_double(states(i, k));
    f << "\n";
  }
}

}  // namespace dgame
