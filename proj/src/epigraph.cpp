#include "dgame/epigraph.hpp"

#include "dgame/bvp.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace dgame {

Vec z_dynamics(const Game& game, const Vec& x, const Vec& u_joint) {
  const int m = game.control_dim();
  Vec zdot(2);
  for (int i = 0; i < 2; ++i)
    zdot[i] = -game.running_loss(i, x, u_joint.segment(i * m, m),
                                 kTypeAggressive, false);
  return zdot;
}

AugEval aug_eval(const AugmentedValueNet& an, int player, const Vec& x,
                 double z, double t) {
  const Eigen::Index n2 = x.size();
  Vec input(n2 + 1);
  input.head(n2) = x;
  input[n2] = t;
  double a, b;
  Vec ga, gb;
  an.A[player]->forward_with_gradient(input, a, ga);
  an.B[player]->forward_with_gradient(input, b, gb);
  AugEval out;
  out.b_branch = (b - z) > a;
  if (out.b_branch) {
    out.value = b - z;
    out.grad_x = gb.head(n2);
    out.grad_t = gb[n2];
    out.grad_z = -1.0;
  } else {
    out.value = a;
    out.grad_x = ga.head(n2);
    out.grad_t = ga[n2];
    out.grad_z = 0.0;
  }
  return out;
}

double augmented_terminal_target(const Game& game, int player, const Vec& x,
                                 double z, double theta_i) {
  return std::max(game.constraint(player, x, theta_i),
                  game.terminal_loss(player, x) - z);
}

double optimal_budget(const AugmentedValueNet& an, int player, const Vec& x,
                      double t) {
  Vec input(x.size() + 1);
  input.head(x.size()) = x;
  input[x.size()] = t;
  double a = an.A[player]->forward(input);
  if (a > 0.0) return std::numeric_limits<double>::infinity();
  return an.B[player]->forward(input);
}

double recover_value(const AugmentedValueNet& an, int player, const Vec& x,
                     double t) {
  double b = optimal_budget(an, player, x, t);
  if (!std::isfinite(b)) return b;
  return clamp(b, an.z_lo, an.z_hi);
}

double bisect_budget(const std::function<double(double)>& value_at,
                     double z_lo, double z_hi, double tol) {
  if (value_at(z_hi) > 0.0) return std::numeric_limits<double>::infinity();
  if (value_at(z_lo) <= 0.0) return z_lo;
  double lo = z_lo, hi = z_hi;
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    if (value_at(mid) <= 0.0)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

Vec epigraph_policy(const Game& game, const AugmentedValueNet& an, int player,
                    double theta_i, const Vec& x, double t) {
  // At the recovered budget the active branch is B whenever the state is
  // feasible (A <= 0) and A otherwise.
  const Eigen::Index n2 = x.size();
  Vec input(n2 + 1);
  input.head(n2) = x;
  input[n2] = t;
  double a = an.A[player]->forward(input);
  bool feasible = a <= 0.0;
  Vec gx = feasible ? an.B[player]->input_gradient(input).head(n2)
                    : an.A[player]->input_gradient(input).head(n2);
  double gz = feasible ? -1.0 : 0.0;
  Mat grid = control_grid_product(game.control_axes());
  Vec mid = 0.5 * (game.control_lo() + game.control_hi());
  double best = -1e300;
  Vec best_u = mid;
  for (Eigen::Index k = 0; k < grid.cols(); ++k) {
    Vec ui = grid.col(k);
    Vec u = player == 0 ? game.stack_controls(ui, mid)
                        : game.stack_controls(mid, ui);
    double h = -gx.dot(game.dynamics(x, u)) +
               gz * game.running_loss(player, x, ui, theta_i, false);
    if (h > best) {
      best = h;
      best_u = ui;
    }
  }
  return best_u;
}

double augmented_residual(const Game& game, const AugmentedValueNet& an,
                          int player, std::pair<double, double> theta,
                          const Vec& x, double z, double t) {
  const double theta_i = player == 0 ? theta.first : theta.second;
  const double theta_f = player == 0 ? theta.second : theta.first;
  AugEval ev = aug_eval(an, player, x, z, t);
  Vec u_fel = epigraph_policy(game, an, 1 - player, theta_f, x, t);
  Mat grid = control_grid_product(game.control_axes());
  double ham = -1e300;
  for (Eigen::Index k = 0; k < grid.cols(); ++k) {
    Vec ui = grid.col(k);
    Vec u = player == 0 ? game.stack_controls(ui, u_fel)
                        : game.stack_controls(u_fel, ui);
    double h = -ev.grad_x.dot(game.dynamics(x, u)) +
               ev.grad_z * game.running_loss(player, x, ui, theta_i, false);
    ham = std::max(ham, h);
  }
  double pde = ev.grad_t - ham;
  double cons = game.constraint(player, x, theta_i) - ev.value;
  return std::max(cons, pde);
}

double loss_L3(const Game& game, const AugmentedValueNet& an,
               std::pair<double, double> theta, const Mat& Xc, const Mat& Xb,
               double c3) {
  const int n2 = game.joint_state_dim();
  const double scale = game.value_scale();
  double res = 0.0;
  for (Eigen::Index k = 0; k < Xc.cols(); ++k)
    for (int p = 0; p < 2; ++p)
      res += std::abs(augmented_residual(game, an, p, theta,
                                         Xc.col(k).head(n2), Xc(n2, k),
                                         Xc(n2 + 1, k))) /
             scale;
  if (Xc.cols()) res /= static_cast<double>(Xc.cols());
  double bnd = 0.0;
  const double T = game.horizon();
  for (Eigen::Index k = 0; k < Xb.cols(); ++k) {
    Vec x = Xb.col(k).head(n2);
    double z = Xb(n2, k);
    for (int p = 0; p < 2; ++p) {
      AugEval ev = aug_eval(an, p, x, z, T);
      double target = augmented_terminal_target(
          game, p, x, z, p == 0 ? theta.first : theta.second);
      bnd += std::abs(ev.value - target) / scale;
    }
  }
  if (Xb.cols()) bnd /= static_cast<double>(Xb.cols());
  return res + c3 * bnd;
}

std::vector<bool> unsafe_set(const AugmentedValueNet& an, int player,
                             const Mat& states, double t) {
  std::vector<bool> out(static_cast<std::size_t>(states.cols()));
  for (Eigen::Index k = 0; k < states.cols(); ++k) {
    Vec input(states.rows() + 1);
    input.head(states.rows()) = states.col(k);
    input[states.rows()] = t;
    out[static_cast<std::size_t>(k)] = an.A[player]->forward(input) > 0.0;
  }
  return out;
}

void save_unsafe_csv(const AugmentedValueNet& an, const Game& game,
                     const std::string& path, double t, double v_fixed) {
  if (game.joint_state_dim() != 4)
    throw std::invalid_argument("epigraph: slice export expects a 4D game");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("epigraph: cannot write " + path);
  out << "d1,d2,t,A1,B1,recovered1,unsafe1\n";
  Vec lo, hi;
  joint_hj_box(game, lo, hi);
  const int n = 101;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double d1 = lo[0] + (hi[0] - lo[0]) * i / (n - 1);
      double d2 = lo[2] + (hi[2] - lo[2]) * j / (n - 1);
      Vec input(5);
      input << d1, v_fixed, d2, v_fixed, t;
      double a = an.A[0]->forward(input);
      double b = an.B[0]->forward(input);
      double rec = a > 0 ? std::numeric_limits<double>::infinity()
                         : clamp(b, an.z_lo, an.z_hi);
      out << format_double(d1) << "," << format_double(d2) << ","
          << format_double(t) << "," << format_double(a) << ","
          << format_double(b) << "," << format_double(rec) << ","
          << (a > 0 ? 1 : 0) << "\n";
    }
}

double lemma2_residual(const Game& game, const AugmentedValueNet& an,
                       int player, std::pair<double, double> theta,
                       const Vec& x, double z, double t, double h) {
  const double theta_i = player == 0 ? theta.first : theta.second;
  const double theta_f = player == 0 ? theta.second : theta.first;
  double v0 = aug_eval(an, player, x, z, t).value;
  Vec u_fel = epigraph_policy(game, an, 1 - player, theta_f, x, t);
  Mat grid = control_grid_product(game.control_axes());
  double best = 1e300;
  for (Eigen::Index k = 0; k < grid.cols(); ++k) {
    Vec ui = grid.col(k);
    Vec u = player == 0 ? game.stack_controls(ui, u_fel)
                        : game.stack_controls(u_fel, ui);
    // one RK4 step of the joint state, midpoint for the running constraint
    Vec k1 = game.dynamics(x, u);
    Vec k2 = game.dynamics(x + 0.5 * h * k1, u);
    Vec k3 = game.dynamics(x + 0.5 * h * k2, u);
    Vec k4 = game.dynamics(x + h * k3, u);
    Vec x1 = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    Vec xm = x + 0.5 * h * k1;
    double cmax = std::max({game.constraint(player, x, theta_i),
                            game.constraint(player, xm, theta_i),
                            game.constraint(player, x1, theta_i)});
    double z1 = z - h * game.running_loss(player, x, ui, theta_i, false);
    double v1 = aug_eval(an, player, x1, z1, t + h).value;
    best = std::min(best, std::max(cmax, v1));
  }
  return std::abs(v0 - best);
}

EpigraphController::EpigraphController(const Game& game,
                                       std::pair<double, double> theta,
                                       AugmentedValueNet an, std::string id_tag)
    : game_(game), theta_(theta), an_(std::move(an)), id_(std::move(id_tag)) {}

Vec EpigraphController::player_control(int player, const Vec& x,
                                       double t) const {
  return epigraph_policy(game_, an_, player,
                         player == 0 ? theta_.first : theta_.second, x, t);
}

double EpigraphController::value_estimate(int player, const Vec& x,
                                          double t) const {
  double b = optimal_budget(an_, player, x, t);
  // cost convention inside, reward convention outside
  if (!std::isfinite(b)) return std::numeric_limits<double>::quiet_NaN();
  return -b;
}

void AugmentedValueNet::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  for (int p = 0; p < 2; ++p) {
    A[p]->save(dir + "/A" + std::to_string(p + 1) + ".dgm");
    B[p]->save(dir + "/B" + std::to_string(p + 1) + ".dgm");
  }
  std::ofstream meta(dir + "/zrange.txt");
  meta << format_double(z_lo) << " " << format_double(z_hi) << "\n";
}

AugmentedValueNet AugmentedValueNet::load(const std::string& dir) {
  AugmentedValueNet an;
  for (int p = 0; p < 2; ++p) {
    an.A[p] = std::make_shared<Mlp>(
        Mlp::load(dir + "/A" + std::to_string(p + 1) + ".dgm"));
    an.B[p] = std::make_shared<Mlp>(
        Mlp::load(dir + "/B" + std::to_string(p + 1) + ".dgm"));
  }
  std::ifstream meta(dir + "/zrange.txt");
  if (!meta) throw std::runtime_error("epigraph: missing zrange in " + dir);
  meta >> an.z_lo >> an.z_hi;
  return an;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

EpigraphResult train_epigraph(const Game& game,
                              std::pair<double, double> theta,
                              const TrainConfig& cfg,
                              const SupervisedDataset* data) {
  const int n2 = game.joint_state_dim();
  const double T = game.horizon();
  const double vscale = game.value_scale();
  const double cscale = game.constraint_scale();

  EpigraphResult result;
  AugmentedValueNet& an = result.net;
  game.z_range(an.z_lo, an.z_hi);

  MlpConfig mc;
  mc.input_dim = n2 + 1;
  mc.hidden = cfg.hidden;
  mc.act = cfg.act;
  mc.sin_w0 = cfg.sin_w0;
  Vec lo, hi;
  joint_hj_box(game, lo, hi);
  mc.in_lo = Vec(n2 + 1);
  mc.in_hi = Vec(n2 + 1);
  mc.in_lo << lo, 0.0;
  mc.in_hi << hi, T;
  for (int p = 0; p < 2; ++p) {
    mc.out_scale = cscale;
    an.A[p] = std::make_shared<Mlp>(mc, cfg.seed * 4 + 1 + p);
    mc.out_scale = vscale;
    an.B[p] = std::make_shared<Mlp>(mc, cfg.seed * 4 + 3 + p);
  }
  Mlp* nets[4] = {an.A[0].get(), an.B[0].get(), an.A[1].get(), an.B[1].get()};
  AdamState adam[4] = {AdamState(nets[0]->param_count()),
                       AdamState(nets[1]->param_count()),
                       AdamState(nets[2]->param_count()),
                       AdamState(nets[3]->param_count())};
  for (auto& a : adam) a.lr = cfg.lr;

  Rng rng(cfg.seed);
  Rng pool_rng(cfg.seed ^ 0xe19a7ULL);
  Mat pool(n2, cfg.collocation_pool);
  for (int k = 0; k < cfg.collocation_pool; ++k)
    pool.col(k) = uniform_in_box(lo, hi, pool_rng);

  Mat sup_X;
  Vec sup_v[2];
  Mat sup_g[2];
  if (data) {
    data->player_matrices(0, sup_X, sup_v[0], sup_g[0]);
    Mat dummy;
    data->player_matrices(1, dummy, sup_v[1], sup_g[1]);
  }

  Mat grid = control_grid_product(game.control_axes());
  const Eigen::Index nu = grid.cols();
  Vec mid = 0.5 * (game.control_lo() + game.control_hi());
  const double theta_of[2] = {theta.first, theta.second};

  const long long pre = cfg.pretrain_iterations;
  const long long total = pre + cfg.iterations;
  auto t_start = std::chrono::steady_clock::now();

  std::uniform_int_distribution<int> pick(0, cfg.collocation_pool - 1);
  std::uniform_real_distribution<double> zdist(an.z_lo, an.z_hi);

  for (long long iter = 0; iter < total; ++iter) {
    const bool pretrain = iter < pre;
    double window =
        pretrain ? 0.0
                 : T * static_cast<double>(iter - pre + 1) /
                       static_cast<double>(cfg.iterations);
    std::uniform_real_distribution<double> tdist(std::max(0.0, T - window), T);

    double loss_pde = 0, loss_bnd = 0, loss_val = 0, loss_grad = 0;
    Vec prev[4];
    for (int i = 0; i < 4; ++i) prev[i] = nets[i]->params_flat();

    if (pretrain) {
      // Direct fit of A to the constraint and B to the terminal loss at
      // uniformly sampled (x, t); anchors the boundary identity and gives
      // the curriculum a sane start.
      const int B = cfg.batch_boundary;
      Mat X(n2 + 1, B);
      for (int k = 0; k < B; ++k) {
        X.col(k).head(n2) = pool.col(pick(rng));
        X(n2, k) = tdist(rng);
      }
      BatchEval ev[4];
      parallel_for(4, [&](std::size_t i) { ev[i].run(*nets[i], X, false); });
      Vec ybar[4];
      for (int i = 0; i < 4; ++i) ybar[i] = Vec::Zero(B);
      double inv = 1.0 / B;
      for (int k = 0; k < B; ++k) {
        Vec x = X.col(k).head(n2);
        for (int p = 0; p < 2; ++p) {
          double ctgt = game.constraint(p, x, theta_of[p]);
          double gtgt = game.terminal_loss(p, x);
          double da = (ev[2 * p].y_raw[k] - ctgt) / cscale;
          double db = (ev[2 * p + 1].y_raw[k] - gtgt) / vscale;
          loss_bnd += (std::abs(da) + std::abs(db)) * inv;
          ybar[2 * p][k] = (da > 0 ? 1.0 : (da < 0 ? -1.0 : 0.0)) / cscale * inv;
          ybar[2 * p + 1][k] =
              (db > 0 ? 1.0 : (db < 0 ? -1.0 : 0.0)) / vscale * inv;
        }
      }
      parallel_for(4, [&](std::size_t i) {
        Vec grad = Vec::Zero(nets[i]->param_count());
        ev[i].backprop(*nets[i], ybar[i], Mat(), grad);
        Vec p = nets[i]->params_flat();
        adam_step(adam[i], p, grad);
        nets[i]->set_params_flat(p);
      });
    } else {
      const int Bc = cfg.batch_collocation;
      const int Bb = cfg.batch_boundary;
      Mat Xc(n2 + 2, Bc);  // (x, z, t)
      for (int k = 0; k < Bc; ++k) {
        Xc.col(k).head(n2) = pool.col(pick(rng));
        Xc(n2, k) = zdist(rng);
        Xc(n2 + 1, k) = tdist(rng);
      }
      Mat Xb(n2 + 1, Bb);  // (x, z) at t = T
      for (int k = 0; k < Bb; ++k) {
        Xb.col(k).head(n2) = pool.col(pick(rng));
        Xb(n2, k) = zdist(rng);
      }
      Mat Xs;
      int Bs = 0;
      std::vector<Eigen::Index> sup_idx;
      if (data) {
        Bs = static_cast<int>(
            std::min<Eigen::Index>(cfg.batch_supervised, sup_X.cols()));
        Xs.resize(n2 + 1, Bs);
        std::uniform_int_distribution<Eigen::Index> spick(0, sup_X.cols() - 1);
        for (int k = 0; k < Bs; ++k) {
          Eigen::Index j = Bs == sup_X.cols() ? k : spick(rng);
          sup_idx.push_back(j);
          Xs.col(k) = sup_X.col(j);
        }
      }

      // Evaluations: collocation needs gradients, boundary and supervision
      // need values (supervision of costates reuses gradients on B).
      Mat Xct(n2 + 1, Bc);
      Xct.topRows(n2) = Xc.topRows(n2);
      Xct.row(n2) = Xc.row(n2 + 1);
      Mat Xbt(n2 + 1, Bb);
      Xbt.topRows(n2) = Xb.topRows(n2);
      Xbt.row(n2).setConstant(T);
      BatchEval evc[4], evb[4], evs[2];
      parallel_for(4, [&](std::size_t i) {
        evc[i].run(*nets[i], Xct, true);
        evb[i].run(*nets[i], Xbt, false);
      });
      if (data)
        parallel_for(2, [&](std::size_t p) {
          evs[p].run(*nets[2 * p + 1], Xs, cfg.costate_loss);
        });

      Vec ybar_c[4], ybar_b[4], ybar_s[2];
      Mat gbar_c[4], gbar_s[2];
      for (int i = 0; i < 4; ++i) {
        ybar_c[i] = Vec::Zero(Bc);
        gbar_c[i] = Mat::Zero(n2 + 1, Bc);
        ybar_b[i] = Vec::Zero(Bb);
      }

      double invc = 1.0 / Bc;
      for (int k = 0; k < Bc; ++k) {
        Vec x = Xc.col(k).head(n2);
        double z = Xc(n2, k);
        double t = Xc(n2 + 1, k);
        // Branch data per player from the batched evaluations.
        for (int p = 0; p < 2; ++p) {
          double a_val = evc[2 * p].y_raw[k];
          double b_val = evc[2 * p + 1].y_raw[k];
          bool b_branch = (b_val - z) > a_val;
          int net_idx = b_branch ? 2 * p + 1 : 2 * p;
          double value = b_branch ? b_val - z : a_val;
          Vec gx = evc[net_idx].g_raw.col(k).head(n2);
          double gt = evc[net_idx].g_raw(n2, k);
          double gz = b_branch ? -1.0 : 0.0;

          // Fellow control from its own recovered budget.
          int q = 1 - p;
          double a_fel = evc[2 * q].y_raw[k];
          bool fel_b = a_fel <= 0.0;
          Vec gx_fel = evc[fel_b ? 2 * q + 1 : 2 * q].g_raw.col(k).head(n2);
          double gz_fel = fel_b ? -1.0 : 0.0;
          double fel_best = -1e300;
          Vec u_fel = mid;
          for (Eigen::Index c = 0; c < nu; ++c) {
            Vec uq = grid.col(c);
            Vec u = q == 0 ? game.stack_controls(uq, mid)
                           : game.stack_controls(mid, uq);
            double h = -gx_fel.dot(game.dynamics(x, u)) +
                       gz_fel * game.running_loss(q, x, uq, theta_of[q], false);
            if (h > fel_best) {
              fel_best = h;
              u_fel = uq;
            }
          }

          double ham = -1e300;
          Vec f_best;
          for (Eigen::Index c = 0; c < nu; ++c) {
            Vec up = grid.col(c);
            Vec u = p == 0 ? game.stack_controls(up, u_fel)
                           : game.stack_controls(u_fel, up);
            Vec f = game.dynamics(x, u);
            double h = -gx.dot(f) +
                       gz * game.running_loss(p, x, up, theta_of[p], false);
            if (h > ham) {
              ham = h;
              f_best = f;
            }
          }
          double pde = gt - ham;
          double cons = game.constraint(p, x, theta_of[p]) - value;
          double res = std::max(cons, pde);
          loss_pde += std::abs(res) / vscale * invc;
          double s = (res > 0 ? 1.0 : (res < 0 ? -1.0 : 0.0)) / vscale * invc;
          if (cons >= pde) {
            ybar_c[net_idx][k] += -s;  // d cons / d value
          } else {
            gbar_c[net_idx](n2, k) += s;
            gbar_c[net_idx].col(k).head(n2) += s * f_best;
          }
        }
      }

      double invb = 1.0 / Bb;
      for (int k = 0; k < Bb; ++k) {
        Vec x = Xb.col(k).head(n2);
        double z = Xb(n2, k);
        for (int p = 0; p < 2; ++p) {
          double a_val = evb[2 * p].y_raw[k];
          double b_val = evb[2 * p + 1].y_raw[k];
          bool b_branch = (b_val - z) > a_val;
          double value = b_branch ? b_val - z : a_val;
          double target =
              augmented_terminal_target(game, p, x, z, theta_of[p]);
          double d = (value - target) / vscale;
          loss_bnd += cfg.c3 * std::abs(d) * invb;
          double s = cfg.c3 * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) / vscale * invb;
          ybar_b[b_branch ? 2 * p + 1 : 2 * p][k] += s;
        }
      }

      if (data) {
        double invs = 1.0 / Bs;
        for (int p = 0; p < 2; ++p) {
          ybar_s[p] = Vec::Zero(Bs);
          if (cfg.costate_loss) gbar_s[p] = Mat::Zero(n2 + 1, Bs);
          for (int k = 0; k < Bs; ++k) {
            // B carries the unconstrained cost-to-go: negate the stored
            // reward values and costates.
            double tgt = -sup_v[p][sup_idx[static_cast<std::size_t>(k)]];
            double dv = (evs[p].y_raw[k] - tgt) / vscale;
            loss_val += std::abs(dv) * invs;
            ybar_s[p][k] = (dv > 0 ? 1.0 : (dv < 0 ? -1.0 : 0.0)) / vscale * invs;
            if (cfg.costate_loss) {
              for (int d = 0; d < n2; ++d) {
                double half = 1.0 / nets[2 * p + 1]->norm_inv_half[d];
                double tg = -sup_g[p](d, sup_idx[static_cast<std::size_t>(k)]);
                double dg = (evs[p].g_raw(d, k) - tg) * half / vscale;
                loss_grad += cfg.c2 * std::abs(dg) * invs;
                gbar_s[p](d, k) = cfg.c2 *
                                  (dg > 0 ? 1.0 : (dg < 0 ? -1.0 : 0.0)) *
                                  half / vscale * invs;
              }
            }
          }
        }
      }

      parallel_for(4, [&](std::size_t i) {
        Vec grad = Vec::Zero(nets[i]->param_count());
        evc[i].backprop(*nets[i], ybar_c[i], gbar_c[i], grad);
        evb[i].backprop(*nets[i], ybar_b[i], Mat(), grad);
        if (data && i % 2 == 1)
          evs[i / 2].backprop(*nets[i], ybar_s[i / 2],
                              cfg.costate_loss ? gbar_s[i / 2] : Mat(), grad);
        Vec p = nets[i]->params_flat();
        adam_step(adam[i], p, grad);
        nets[i]->set_params_flat(p);
      });
    }

    double total_loss = loss_pde + loss_bnd + loss_val + loss_grad;
    if (!std::isfinite(total_loss)) {
      for (int i = 0; i < 4; ++i) nets[i]->set_params_flat(prev[i]);
      result.nan_abort = true;
      break;
    }
    if (iter % cfg.log_every == 0 || iter + 1 == total || iter == pre) {
      TrainLogRow row;
      row.iter = iter;
      row.window = window;
      row.pde = loss_pde;
      row.boundary = loss_bnd;
      row.value_term = loss_val;
      row.grad_term = loss_grad;
      row.total = total_loss;
      row.wall_s = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - t_start)
                       .count();
      result.log.push_back(row);
    }
  }

  for (int p = 0; p < 2; ++p) {
    for (Mlp* net : {an.A[p].get(), an.B[p].get()}) {
      net->meta.game_hash = game.config_hash();
      net->meta.player = p;
      net->meta.theta_self = theta_of[p];
      net->meta.theta_fellow = theta_of[1 - p];
      net->meta.regime = "epigraph";
    }
  }
  return result;
}

}  // namespace dgame
