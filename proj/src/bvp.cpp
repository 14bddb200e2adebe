#include "dgame/bvp.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dgame {

namespace {

// Penalty-scaled running loss gradient: bare loss plus s * (penalty part).
Vec scaled_loss_grad(const Game& g, int player, const Vec& x, const Vec& ui,
                     double theta, double s) {
  Vec pen = g.running_loss_grad_x(player, x, ui, theta, true);
  if (s == 1.0) return pen;
  Vec bare = g.running_loss_grad_x(player, x, ui, theta, false);
  return bare + s * (pen - bare);
}

double scaled_loss(const Game& g, int player, const Vec& x, const Vec& ui,
                   double theta, double s) {
  double pen = g.running_loss(player, x, ui, theta, true);
  if (s == 1.0) return pen;
  double bare = g.running_loss(player, x, ui, theta, false);
  return bare + s * (pen - bare);
}

struct NodeFuncs {
  Vec F;        // joint dynamics under the clamped controls
  Vec G1, G2;   // grad_x of each player's Hamiltonian
};

// The collocation system over z = [x_j, lam1_j, lam2_j]_{j=0..N-1}.
class Collocation {
 public:
  Collocation(const Game& game, const Vec& x0,
              const std::pair<double, double>& theta, int nodes, double dt,
              double penalty_scale)
      : g_(game),
        x0_(x0),
        theta_(theta),
        N_(nodes),
        dt_(dt),
        pscale_(penalty_scale),
        n2_(game.joint_state_dim()),
        M_(3 * game.joint_state_dim()) {}

  Eigen::Index size() const { return static_cast<Eigen::Index>(N_) * M_; }

  NodeFuncs node_funcs(const Vec& z, int j) const {
    NodeFuncs nf;
    Vec x = z.segment(j * M_, n2_);
    Vec l1 = z.segment(j * M_ + n2_, n2_);
    Vec l2 = z.segment(j * M_ + 2 * n2_, n2_);
    Vec u1 = g_.argmax_control(0, x, l1, theta_.first);
    Vec u2 = g_.argmax_control(1, x, l2, theta_.second);
    Vec u = g_.stack_controls(u1, u2);
    nf.F = g_.dynamics(x, u);
    Mat Jt = g_.dynamics_jacobian_x(x, u).transpose();
    nf.G1 = Jt * l1 - scaled_loss_grad(g_, 0, x, u1, theta_.first, pscale_);
    nf.G2 = Jt * l2 - scaled_loss_grad(g_, 1, x, u2, theta_.second, pscale_);
    return nf;
  }

  // Rows for the matching conditions between nodes j and j+1.
  void interval_residual(const Vec& z, int j, const NodeFuncs& a,
                         const NodeFuncs& b, Vec& out) const {
    const double h = 0.5 * dt_;
    auto xa = z.segment(j * M_, n2_);
    auto xb = z.segment((j + 1) * M_, n2_);
    auto l1a = z.segment(j * M_ + n2_, n2_);
    auto l1b = z.segment((j + 1) * M_ + n2_, n2_);
    auto l2a = z.segment(j * M_ + 2 * n2_, n2_);
    auto l2b = z.segment((j + 1) * M_ + 2 * n2_, n2_);
    out.segment(0, n2_) = xb - xa - h * (a.F + b.F);
    out.segment(n2_, n2_) = l1b - l1a + h * (a.G1 + b.G1);
    out.segment(2 * n2_, n2_) = l2b - l2a + h * (a.G2 + b.G2);
  }

  void terminal_residual(const Vec& z, Vec& out) const {
    const int j = N_ - 1;
    Vec xT = z.segment(j * M_, n2_);
    out.segment(0, n2_) = z.segment(j * M_ + n2_, n2_) +
                          g_.terminal_loss_grad_x(0, xT);
    out.segment(n2_, n2_) = z.segment(j * M_ + 2 * n2_, n2_) +
                            g_.terminal_loss_grad_x(1, xT);
  }

  Vec residual(const Vec& z, std::vector<NodeFuncs>& funcs) const {
    funcs.resize(static_cast<std::size_t>(N_));
    for (int j = 0; j < N_; ++j) funcs[static_cast<std::size_t>(j)] = node_funcs(z, j);
    Vec r(size());
    r.segment(0, n2_) = z.segment(0, n2_) - x0_;
    Vec tmp(3 * n2_);
    for (int j = 0; j < N_ - 1; ++j) {
      interval_residual(z, j, funcs[static_cast<std::size_t>(j)],
                        funcs[static_cast<std::size_t>(j + 1)], tmp);
      r.segment(n2_ + j * 3 * n2_, 3 * n2_) = tmp;
    }
    Vec term(2 * n2_);
    terminal_residual(z, term);
    r.segment(n2_ + (N_ - 1) * 3 * n2_, 2 * n2_) = term;
    return r;
  }

  // Componentwise scale: 1 + magnitude of the node values entering the row.
  Vec row_scale(const Vec& z) const {
    Vec s = Vec::Ones(size());
    for (int j = 0; j < N_ - 1; ++j) {
      for (int c = 0; c < 3 * n2_; ++c) {
        double a = std::abs(z[j * M_ + c]);
        double b = std::abs(z[(j + 1) * M_ + c]);
        s[n2_ + j * 3 * n2_ + c] = 1.0 + std::max(a, b);
      }
    }
    for (int c = 0; c < n2_; ++c) s[c] = 1.0 + std::abs(x0_[c]);
    const int j = N_ - 1;
    for (int c = 0; c < 2 * n2_; ++c) {
      double a = std::abs(z[j * M_ + n2_ + c]);
      s[n2_ + (N_ - 1) * 3 * n2_ + c] = 1.0 + a;
    }
    return s;
  }

  // Finite-difference Jacobian exploiting the two-node band structure.
  void jacobian(const Vec& z, const Vec& r0,
                const std::vector<NodeFuncs>& funcs,
                Eigen::SparseMatrix<double>& J) const {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(size()) * 30);
    Vec zp = z;
    Vec tmp(3 * n2_);
    for (int j = 0; j < N_; ++j) {
      for (int c = 0; c < M_; ++c) {
        Eigen::Index col = j * M_ + c;
        double h = 1e-7 * std::max(1.0, std::abs(z[col]));
        zp[col] = z[col] + h;
        NodeFuncs pj = node_funcs(zp, j);
        if (j == 0) {
          // initial condition rows touch only the state block of node 0
          if (c < n2_) trips.emplace_back(c, col, 1.0);
        }
        if (j > 0) {
          interval_residual(zp, j - 1, funcs[static_cast<std::size_t>(j - 1)],
                            pj, tmp);
          Eigen::Index row0 = n2_ + (j - 1) * 3 * n2_;
          for (int rr = 0; rr < 3 * n2_; ++rr) {
            double d = (tmp[rr] - r0[row0 + rr]) / h;
            if (d != 0.0) trips.emplace_back(row0 + rr, col, d);
          }
        }
        if (j < N_ - 1) {
          interval_residual(zp, j, pj, funcs[static_cast<std::size_t>(j + 1)],
                            tmp);
          Eigen::Index row0 = n2_ + j * 3 * n2_;
          for (int rr = 0; rr < 3 * n2_; ++rr) {
            double d = (tmp[rr] - r0[row0 + rr]) / h;
            if (d != 0.0) trips.emplace_back(row0 + rr, col, d);
          }
        }
        if (j == N_ - 1) {
          Vec term(2 * n2_);
          terminal_residual(zp, term);
          Eigen::Index row0 = n2_ + (N_ - 1) * 3 * n2_;
          for (int rr = 0; rr < 2 * n2_; ++rr) {
            double d = (term[rr] - r0[row0 + rr]) / h;
            if (d != 0.0) trips.emplace_back(row0 + rr, col, d);
          }
        }
        zp[col] = z[col];
      }
    }
    J.resize(size(), size());
    J.setFromTriplets(trips.begin(), trips.end());
  }

  const Game& g_;
  Vec x0_;
  std::pair<double, double> theta_;
  int N_;
  double dt_;
  double pscale_;
  int n2_;
  int M_;
};

struct NewtonOutcome {
  bool converged = false;
  double scaled_norm = 0.0;
  int iterations = 0;
  std::string reason;
};

NewtonOutcome damped_newton(const Collocation& sys, Vec& z, double tol,
                            const BvpOptions& opts) {
  NewtonOutcome out;
  std::vector<NodeFuncs> funcs;
  Vec r = sys.residual(z, funcs);
  Eigen::SparseMatrix<double> J;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  for (int it = 0; it < opts.max_newton_iters; ++it) {
    out.iterations = it;
    Vec scale = sys.row_scale(z);
    double norm_inf = (r.cwiseQuotient(scale)).lpNorm<Eigen::Infinity>();
    out.scaled_norm = norm_inf;
    if (norm_inf < tol) {
      out.converged = true;
      return out;
    }
    sys.jacobian(z, r, funcs, J);
    lu.compute(J);
    if (lu.info() != Eigen::Success) {
      out.reason = "singular Jacobian";
      return out;
    }
    Vec step = lu.solve(-r);
    if (!step.allFinite()) {
      out.reason = "non-finite Newton step";
      return out;
    }
    double merit0 = r.cwiseQuotient(scale).norm();
    double alpha = 1.0;
    bool accepted = false;
    while (alpha >= opts.min_step) {
      Vec ztry = z + alpha * step;
      std::vector<NodeFuncs> ftry;
      Vec rtry = sys.residual(ztry, ftry);
      double merit = rtry.cwiseQuotient(scale).norm();
      if (merit <= (1.0 - 1e-4 * alpha) * merit0) {
        z = std::move(ztry);
        r = std::move(rtry);
        funcs = std::move(ftry);
        accepted = true;
        break;
      }
      alpha *= opts.backtrack;
    }
    if (!accepted) {
      out.reason = "line search stalled";
      return out;
    }
  }
  out.reason = "iteration budget exhausted";
  return out;
}

}  // namespace

BvpGuess build_constant_guess(const Game& game, const Vec& x0,
                              const Vec& u1_const, const Vec& u2_const,
                              const std::pair<double, double>& theta,
                              int nodes, double dt) {
  const int n2 = game.joint_state_dim();
  BvpGuess guess;
  guess.states = Mat(n2, nodes);
  guess.costates1 = Mat(n2, nodes);
  guess.costates2 = Mat(n2, nodes);
  Vec u = game.stack_controls(u1_const, u2_const);
  Vec x = x0;
  guess.states.col(0) = x;
  for (int j = 1; j < nodes; ++j) {
    // RK4 on the frozen controls
    Vec k1 = game.dynamics(x, u);
    Vec k2 = game.dynamics(x + 0.5 * dt * k1, u);
    Vec k3 = game.dynamics(x + 0.5 * dt * k2, u);
    Vec k4 = game.dynamics(x + dt * k3, u);
    x += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    guess.states.col(j) = x;
  }
  Vec l1 = -game.terminal_loss_grad_x(0, guess.states.col(nodes - 1));
  Vec l2 = -game.terminal_loss_grad_x(1, guess.states.col(nodes - 1));
  guess.costates1.col(nodes - 1) = l1;
  guess.costates2.col(nodes - 1) = l2;
  for (int j = nodes - 2; j >= 0; --j) {
    Vec xj = guess.states.col(j + 1);
    Mat Jt = game.dynamics_jacobian_x(xj, u).transpose();
    Vec g1 = Jt * l1 - game.running_loss_grad_x(0, xj, u1_const, theta.first, true);
    Vec g2 = Jt * l2 - game.running_loss_grad_x(1, xj, u2_const, theta.second, true);
    l1 += dt * g1;  // lamdot = -G, integrated backward in time
    l2 += dt * g2;
    guess.costates1.col(j) = l1;
    guess.costates2.col(j) = l2;
  }
  return guess;
}

BvpResult solve_bvp(const Game& game, const Vec& x0,
                    const std::pair<double, double>& theta,
                    const BvpGuess& guess, const BvpOptions& opts, double t0) {
  BvpResult res;
  const int n2 = game.joint_state_dim();
  const int m = game.control_dim();
  const double T = game.horizon();
  if (x0.size() != n2) throw std::invalid_argument("bvp: x0 dimension");
  const double span = T - t0;
  if (span < -1e-12) throw std::invalid_argument("bvp: t0 beyond horizon");

  if (span < 0.5 * opts.node_dt) {
    // Degenerate horizon: a single terminal point.
    Trajectory tr;
    tr.times = Vec::Constant(1, T);
    tr.states = x0;
    tr.costates = {-game.terminal_loss_grad_x(0, x0),
                   -game.terminal_loss_grad_x(1, x0)};
    Vec u1 = game.argmax_control(0, x0, tr.costates[0], theta.first);
    Vec u2 = game.argmax_control(1, x0, tr.costates[1], theta.second);
    tr.controls = game.stack_controls(u1, u2);
    tr.values = Mat(2, 1);
    tr.values(0, 0) = -game.terminal_loss(0, x0);
    tr.values(1, 0) = -game.terminal_loss(1, x0);
    tr.converged = true;
    res.trajectory = std::move(tr);
    return res;
  }

  const int N = static_cast<int>(std::lround(span / opts.node_dt)) + 1;
  const double dt = span / (N - 1);
  const int M = 3 * n2;

  if (guess.states.cols() != N)
    throw std::invalid_argument("bvp: guess node count mismatch");

  Vec z(static_cast<Eigen::Index>(N) * M);
  for (int j = 0; j < N; ++j) {
    z.segment(j * M, n2) = guess.states.col(j);
    z.segment(j * M + n2, n2) = guess.costates1.col(j);
    z.segment(j * M + 2 * n2, n2) = guess.costates2.col(j);
  }

  NewtonOutcome last;
  int total_iters = 0;
  for (std::size_t stage = 0; stage < opts.continuation.size(); ++stage) {
    double s = opts.continuation[stage];
    bool final_stage = stage + 1 == opts.continuation.size();
    Collocation sys(game, x0, theta, N, dt, s);
    last = damped_newton(sys, z, final_stage ? opts.tol : opts.stage_tol, opts);
    total_iters += last.iterations;
    if (!last.converged && final_stage) {
      res.failure = {last.reason.empty() ? "no convergence" : last.reason,
                     last.scaled_norm, total_iters};
      return res;
    }
    // A stalled intermediate stage is not fatal; the next stage retries
    // from whatever point it reached.
  }

  Trajectory tr;
  tr.times = Vec(N);
  tr.states = Mat(n2, N);
  tr.controls = Mat(2 * m, N);
  tr.costates = {Mat(n2, N), Mat(n2, N)};
  for (int j = 0; j < N; ++j) {
    tr.times[j] = t0 + j * dt;
    tr.states.col(j) = z.segment(j * M, n2);
    tr.costates[0].col(j) = z.segment(j * M + n2, n2);
    tr.costates[1].col(j) = z.segment(j * M + 2 * n2, n2);
    Vec u1 = game.argmax_control(0, tr.states.col(j), tr.costates[0].col(j),
                                 theta.first);
    Vec u2 = game.argmax_control(1, tr.states.col(j), tr.costates[1].col(j),
                                 theta.second);
    tr.controls.col(j) = game.stack_controls(u1, u2);
  }
  tr.values = Mat(2, N);
  tr.values.row(0) = path_reward_values(game, 0, theta.first, tr.times,
                                        tr.states, tr.controls);
  tr.values.row(1) = path_reward_values(game, 1, theta.second, tr.times,
                                        tr.states, tr.controls);
  tr.converged = true;
  tr.residual_norm = last.scaled_norm;
  tr.newton_iterations = total_iters;
  res.trajectory = std::move(tr);
  return res;
}

BvpResult solve_multistart(const Game& game, const Vec& x0,
                           const std::pair<double, double>& theta,
                           const BvpOptions& opts, double t0) {
  const double span = game.horizon() - t0;
  if (span < 0.5 * opts.node_dt)
    return solve_bvp(game, x0, theta, BvpGuess{}, opts, t0);
  const int N = static_cast<int>(std::lround(span / opts.node_dt)) + 1;
  const double dt = span / (N - 1);

  auto starts = game.warm_start_controls();
  BvpResult best;
  double best_sum = -std::numeric_limits<double>::infinity();
  int idx = 0;
  std::string reasons;
  for (const Vec& ua : starts) {
    for (const Vec& ub : starts) {
      BvpGuess guess = build_constant_guess(game, x0, ua, ub, theta, N, dt);
      BvpResult r = solve_bvp(game, x0, theta, guess, opts, t0);
      if (r.ok()) {
        double sum = r.trajectory->values(0, 0) + r.trajectory->values(1, 0);
        if (sum > best_sum) {
          best_sum = sum;
          r.trajectory->warm_start = idx;
          best = std::move(r);
        }
      } else {
        reasons += (reasons.empty() ? "" : "; ") + std::to_string(idx) + ": " +
                   r.failure.reason;
      }
      ++idx;
    }
  }
  if (!best.ok())
    best.failure = {"all warm starts failed (" + reasons + ")", 0.0, 0};
  return best;
}

void joint_gt_box(const Game& game, Vec& lo, Vec& hi) {
  const int n = game.state_dim();
  lo = Vec(2 * n);
  hi = Vec(2 * n);
  for (int i = 0; i < 2; ++i) {
    Vec l, h;
    game.gt_box(i, l, h);
    lo.segment(i * n, n) = l;
    hi.segment(i * n, n) = h;
  }
}

void joint_hj_box(const Game& game, Vec& lo, Vec& hi) {
  const int n = game.state_dim();
  lo = Vec(2 * n);
  hi = Vec(2 * n);
  for (int i = 0; i < 2; ++i) {
    Vec l, h;
    game.hj_box(i, l, h);
    lo.segment(i * n, n) = l;
    hi.segment(i * n, n) = h;
  }
}

SupervisedDataset generate_dataset(const Game& game,
                                   const std::pair<double, double>& theta,
                                   const Vec& lo, const Vec& hi,
                                   int n_trajectories, std::uint64_t seed,
                                   const DatasetOptions& opts) {
  SupervisedDataset ds;
  ds.meta.game_case = game.name();
  ds.meta.game_hash = game.config_hash();
  ds.meta.theta1 = theta.first;
  ds.meta.theta2 = theta.second;
  ds.meta.n_requested = n_trajectories;
  ds.meta.seed = seed;
  ds.meta.dt_sample = opts.dt_sample;
  ds.meta.lo = lo;
  ds.meta.hi = hi;

  int stride =
      std::max(1, static_cast<int>(std::lround(opts.dt_sample / opts.bvp.node_dt)));

  std::vector<BvpResult> results(static_cast<std::size_t>(n_trajectories));
  auto solve_one = [&](std::size_t k) {
    std::uint64_t mix = fnv1a(&k, sizeof(k), seed ^ 0x9e3779b97f4a7c15ull);
    Rng rng(mix);
    Vec x0 = uniform_in_box(lo, hi, rng);
    results[k] = solve_multistart(game, x0, theta, opts.bvp);
  };
  if (opts.parallel)
    parallel_for(static_cast<std::size_t>(n_trajectories), solve_one);
  else
    for (std::size_t k = 0; k < static_cast<std::size_t>(n_trajectories); ++k)
      solve_one(k);

  int failed = 0;
  for (auto& r : results) {
    if (r.ok())
      ds.trajectories.push_back(r.trajectory->resampled(stride));
    else
      ++failed;
  }
  ds.meta.n_converged = static_cast<int>(ds.trajectories.size());
  ds.meta.n_failed = failed;
  if (failed > opts.max_failure_rate * n_trajectories)
    throw std::runtime_error(
        "dataset: BVP failure rate " + std::to_string(failed) + "/" +
        std::to_string(n_trajectories) + " exceeds the abort threshold");
  return ds;
}

}  // namespace dgame
