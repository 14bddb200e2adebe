#include "dgame/training.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dgame {

std::string regime_name(Regime r) {
  switch (r) {
    case Regime::Supervised: return "supervised";
    case Regime::Pinn: return "pinn";
    case Regime::Hybrid: return "hybrid";
    case Regime::ValueHardening: return "hardening";
    case Regime::Epigraph: return "epigraph";
  }
  return "?";
}

Regime regime_from_name(const std::string& s) {
  if (s == "supervised" || s == "sl") return Regime::Supervised;
  if (s == "pinn") return Regime::Pinn;
  if (s == "hybrid" || s == "hl") return Regime::Hybrid;
  if (s == "hardening" || s == "vh") return Regime::ValueHardening;
  if (s == "epigraph" || s == "el") return Regime::Epigraph;
  throw std::invalid_argument("training: unknown regime " + s);
}

HjiSample hji_residual(const Game& game, const Mlp& net1, const Mlp& net2,
                       const Vec& x, double t,
                       std::pair<double, double> theta) {
  const int n2 = game.joint_state_dim();
  Vec input(n2 + 1);
  input.head(n2) = x;
  input[n2] = t;
  double y1, y2;
  Vec g1, g2;
  net1.forward_with_gradient(input, y1, g1);
  net2.forward_with_gradient(input, y2, g2);
  Vec u1 = game.argmax_control(0, x, g1.head(n2), theta.first);
  Vec u2 = game.argmax_control(1, x, g2.head(n2), theta.second);
  HjiSample out;
  out.f = game.dynamics(x, game.stack_controls(u1, u2));
  out.ltilde[0] = game.running_loss(0, x, u1, theta.first, true);
  out.ltilde[1] = game.running_loss(1, x, u2, theta.second, true);
  out.residual[0] = g1[n2] + g1.head(n2).dot(out.f) - out.ltilde[0];
  out.residual[1] = g2[n2] + g2.head(n2).dot(out.f) - out.ltilde[1];
  return out;
}

double loss_L1(const Game& game, const Mlp& net1, const Mlp& net2,
               const Mat& Xc, const Mat& Xb, std::pair<double, double> theta,
               double c1, bool boundary_l2) {
  const double scale = game.value_scale();
  const int n2 = game.joint_state_dim();
  double pde = 0.0;
  for (Eigen::Index k = 0; k < Xc.cols(); ++k) {
    HjiSample s = hji_residual(game, net1, net2, Xc.col(k).head(n2), Xc(n2, k),
                               theta);
    pde += (std::abs(s.residual[0]) + std::abs(s.residual[1])) / scale;
  }
  if (Xc.cols()) pde /= static_cast<double>(Xc.cols());
  double bnd = 0.0;
  for (Eigen::Index k = 0; k < Xb.cols(); ++k) {
    Vec x = Xb.col(k).head(n2);
    for (int p = 0; p < 2; ++p) {
      const Mlp& net = p == 0 ? net1 : net2;
      double d = (net.forward(Xb.col(k)) + game.terminal_loss(p, x)) / scale;
      bnd += boundary_l2 ? d * d : std::abs(d);
    }
  }
  if (Xb.cols()) bnd /= static_cast<double>(Xb.cols());
  return pde + c1 * bnd;
}

double loss_L2(const Game& game, const Mlp& net, int player, const Mat& Xs,
               const Vec& values, const Mat& costates, double c2,
               bool costate_loss) {
  const double scale = game.value_scale();
  const int n2 = game.joint_state_dim();
  double total = 0.0;
  for (Eigen::Index k = 0; k < Xs.cols(); ++k) {
    double y;
    Vec g;
    net.forward_with_gradient(Xs.col(k), y, g);
    total += std::abs(y - values[k]) / scale;
    if (costate_loss) {
      for (int d = 0; d < n2; ++d) {
        double half = 1.0 / net.norm_inv_half[d];
        total += c2 * std::abs(g[d] - costates(d, k)) * half / scale;
      }
    }
  }
  (void)player;
  if (Xs.cols()) total /= static_cast<double>(Xs.cols());
  return total;
}

namespace {

MlpConfig make_net_config(const Game& game, const TrainConfig& cfg) {
  MlpConfig mc;
  mc.input_dim = game.joint_state_dim() + 1;
  mc.hidden = cfg.hidden;
  mc.act = cfg.act;
  mc.sin_w0 = cfg.sin_w0;
  Vec lo, hi;
  joint_hj_box(game, lo, hi);
  mc.in_lo = Vec(mc.input_dim);
  mc.in_hi = Vec(mc.input_dim);
  mc.in_lo << lo, 0.0;
  mc.in_hi << hi, game.horizon();
  mc.out_scale = game.value_scale();
  return mc;
}

std::string rng_to_string(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void rng_from_string(Rng& rng, const std::string& s) {
  std::istringstream is(s);
  is >> rng;
}

struct Checkpoint {
  long long iter = 0;
  Vec params[2];
  Vec adam_m[2], adam_v[2];
  long long adam_step_count = 0;
  std::string rng_state;
};

void save_checkpoint(const std::string& dir, const Checkpoint& ck) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir + "/trainer.ckpt", std::ios::binary);
  if (!out) throw std::runtime_error("training: cannot write checkpoint");
  auto put_vec = [&](const Vec& v) {
    std::uint64_t n = static_cast<std::uint64_t>(v.size());
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(8 * v.size()));
  };
  out.write(reinterpret_cast<const char*>(&ck.iter), 8);
  out.write(reinterpret_cast<const char*>(&ck.adam_step_count), 8);
  for (int i = 0; i < 2; ++i) {
    put_vec(ck.params[i]);
    put_vec(ck.adam_m[i]);
    put_vec(ck.adam_v[i]);
  }
  std::uint64_t n = ck.rng_state.size();
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(ck.rng_state.data(), static_cast<std::streamsize>(n));
}

Checkpoint load_checkpoint(const std::string& dir) {
  std::ifstream in(dir + "/trainer.ckpt", std::ios::binary);
  if (!in) throw std::runtime_error("training: cannot open checkpoint");
  Checkpoint ck;
  auto get_vec = [&]() {
    std::uint64_t n;
    in.read(reinterpret_cast<char*>(&n), 8);
    Vec v(static_cast<Eigen::Index>(n));
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(8 * n));
    return v;
  };
  in.read(reinterpret_cast<char*>(&ck.iter), 8);
  in.read(reinterpret_cast<char*>(&ck.adam_step_count), 8);
  for (int i = 0; i < 2; ++i) {
    ck.params[i] = get_vec();
    ck.adam_m[i] = get_vec();
    ck.adam_v[i] = get_vec();
  }
  std::uint64_t n;
  in.read(reinterpret_cast<char*>(&n), 8);
  ck.rng_state.resize(n);
  in.read(ck.rng_state.data(), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("training: truncated checkpoint");
  return ck;
}

class PairTrainer {
 public:
  PairTrainer(const Game& game, std::pair<double, double> theta,
              const TrainConfig& cfg, const SupervisedDataset* data)
      : game_(game), theta_(theta), cfg_(cfg), rng_(cfg.seed) {
    if (cfg_.regime == Regime::Epigraph)
      throw std::invalid_argument(
          "training: the epigraph regime is trained through epigraph.hpp");
    const bool needs_data = cfg_.regime == Regime::Supervised ||
                            cfg_.regime == Regime::Hybrid;
    if (needs_data && (!data || data->trajectories.empty()))
      throw std::invalid_argument("training: regime requires supervised data");

    MlpConfig mc = make_net_config(game, cfg);
    nets_[0] = std::make_shared<Mlp>(mc, cfg.seed * 2 + 1);
    nets_[1] = std::make_shared<Mlp>(mc, cfg.seed * 2 + 2);
    for (int i = 0; i < 2; ++i) {
      adam_[i] = AdamState(nets_[i]->param_count());
      adam_[i].lr = cfg.lr;
    }

    if (data) {
      data->player_matrices(0, Xs_, sup_v_[0], sup_g_[0]);
      Mat dummy;
      data->player_matrices(1, dummy, sup_v_[1], sup_g_[1]);
    }

    // Collocation and boundary state pools, fixed for the whole run.
    if (uses_pde() || cfg_.regime == Regime::Pinn ||
        cfg_.regime == Regime::ValueHardening) {
      Vec lo, hi;
      joint_hj_box(game_, lo, hi);
      Rng pool_rng(cfg.seed ^ 0xc001d00dULL);
      colloc_pool_ = Mat(game_.joint_state_dim(), cfg_.collocation_pool);
      boundary_pool_ = Mat(game_.joint_state_dim(), cfg_.collocation_pool);
      for (int k = 0; k < cfg_.collocation_pool; ++k) {
        colloc_pool_.col(k) = uniform_in_box(lo, hi, pool_rng);
        boundary_pool_.col(k) = uniform_in_box(lo, hi, pool_rng);
      }
    }

    pde_game_ = nullptr;  // set per hardening step; null means the base game
  }

  bool uses_pde() const {
    return cfg_.regime == Regime::Pinn || cfg_.regime == Regime::Hybrid ||
           cfg_.regime == Regime::ValueHardening;
  }
  bool uses_sup_main() const {
    return cfg_.regime == Regime::Supervised || cfg_.regime == Regime::Hybrid;
  }

  TrainResult run(const Checkpoint* resume) {
    TrainResult result;
    const long long pre = cfg_.regime == Regime::Supervised
                              ? 0
                              : cfg_.pretrain_iterations;
    const long long total = pre + cfg_.iterations;
    const double T = game_.horizon();

    long long start = 0;
    if (resume) {
      start = resume->iter;
      for (int i = 0; i < 2; ++i) {
        nets_[i]->set_params_flat(resume->params[i]);
        adam_[i].m = resume->adam_m[i];
        adam_[i].v = resume->adam_v[i];
        adam_[i].step = resume->adam_step_count;
      }
      rng_from_string(rng_, resume->rng_state);
    }

    std::ofstream log_file;
    if (!cfg_.out_dir.empty()) {
      std::filesystem::create_directories(cfg_.out_dir);
      log_file.open(cfg_.out_dir + "/train_log.txt",
                    resume ? std::ios::app : std::ios::out);
      if (!resume)
        log_file << "# iter window gamma total pde boundary value grad wall_s\n";
    }

    auto t_start = std::chrono::steady_clock::now();
    int last_gamma_step = -1;
    Vec prev_params[2];

    for (long long iter = start; iter < total; ++iter) {
      const bool pretrain = iter < pre;
      double window = 0.0;
      double gamma = game_effective_gamma();
      bool force_log = iter == 0 || iter == pre || iter + 1 == total;

      if (!pretrain && uses_pde()) {
        long long j = iter - pre;
        window = T * static_cast<double>(j + 1) /
                 static_cast<double>(cfg_.iterations);
        if (cfg_.regime == Regime::ValueHardening) {
          int step = static_cast<int>(j * cfg_.hardening_steps /
                                      std::max<long long>(1, cfg_.iterations));
          step = std::min(step, cfg_.hardening_steps - 1);
          if (step != last_gamma_step) {
            set_hardening_gamma(step);
            last_gamma_step = step;
            force_log = true;  // first loss of the step under the new gamma
          }
          gamma = game_effective_gamma();
        }
      }

      prev_params[0] = nets_[0]->params_flat();
      prev_params[1] = nets_[1]->params_flat();

      StepLosses losses = iteration(pretrain, window);
      double total_loss =
          losses.pde + losses.bnd + losses.val + losses.grad;
      if (!std::isfinite(total_loss)) {
        nets_[0]->set_params_flat(prev_params[0]);
        nets_[1]->set_params_flat(prev_params[1]);
        result.nan_abort = true;
        result.iterations_run = iter;
        break;
      }

      if (force_log || iter % cfg_.log_every == 0) {
        TrainLogRow row;
        row.iter = iter;
        row.window = window;
        row.gamma = gamma;
        row.pde = losses.pde;
        row.boundary = losses.bnd;
        row.value_term = losses.val;
        row.grad_term = losses.grad;
        row.total = total_loss;
        row.wall_s = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - t_start)
                         .count();
        result.log.push_back(row);
        if (log_file)
          log_file << row.iter << " " << format_double(row.window) << " "
                   << format_double(row.gamma) << " "
                   << format_double(row.total) << " " << format_double(row.pde)
                   << " " << format_double(row.boundary) << " "
                   << format_double(row.value_term) << " "
                   << format_double(row.grad_term) << " "
                   << format_double(row.wall_s) << "\n";
      }
      result.iterations_run = iter + 1;

      if (cfg_.checkpoint_every > 0 && !cfg_.out_dir.empty() &&
          (iter + 1) % cfg_.checkpoint_every == 0) {
        Checkpoint ck;
        ck.iter = iter + 1;
        ck.params[0] = nets_[0]->params_flat();
        ck.params[1] = nets_[1]->params_flat();
        for (int i = 0; i < 2; ++i) {
          ck.adam_m[i] = adam_[i].m;
          ck.adam_v[i] = adam_[i].v;
        }
        ck.adam_step_count = adam_[0].step;
        ck.rng_state = rng_to_string(rng_);
        save_checkpoint(cfg_.out_dir, ck);
      }
    }

    result.net1 = nets_[0];
    result.net2 = nets_[1];
    for (int i = 0; i < 2; ++i) {
      nets_[i]->meta.game_hash = game_.config_hash();
      nets_[i]->meta.player = i;
      nets_[i]->meta.theta_self = i == 0 ? theta_.first : theta_.second;
      nets_[i]->meta.theta_fellow = i == 0 ? theta_.second : theta_.first;
      nets_[i]->meta.regime = regime_name(cfg_.regime);
    }
    return result;
  }

 private:
  struct StepLosses {
    double pde = 0, bnd = 0, val = 0, grad = 0;
  };

  double game_effective_gamma() const {
    return (pde_game_ ? pde_game_->to_config() : game_.to_config())
        .get_double("game.penalty_shape", 0.0);
  }

  void set_hardening_gamma(int step) {
    double g_end = cfg_.gamma_end > 0
                       ? cfg_.gamma_end
                       : game_.to_config().get_double("game.penalty_shape");
    double ratio = g_end / cfg_.gamma_start;
    double frac = cfg_.hardening_steps == 1
                      ? 1.0
                      : static_cast<double>(step) / (cfg_.hardening_steps - 1);
    double gamma = cfg_.gamma_start * std::pow(ratio, frac);
    Config c = game_.to_config();
    c.set_double("game.penalty_shape", gamma);
    pde_game_ = make_game(c);
  }

  const Game& pde_game() const { return pde_game_ ? *pde_game_ : game_; }

  StepLosses iteration(bool pretrain, double window) {
    const int n2 = game_.joint_state_dim();
    const double T = game_.horizon();
    const double scale = game_.value_scale();
    StepLosses out;

    bool pde_on = uses_pde() && !pretrain;
    bool bnd_on = pde_on || (pretrain && (cfg_.regime == Regime::Pinn ||
                                          cfg_.regime == Regime::ValueHardening));
    bool sup_on = (pretrain && cfg_.regime == Regime::Hybrid) ||
                  (!pretrain && uses_sup_main());

    // ---- sample batches (single rng stream, fixed order) ----
    Mat Xc, Xb, Xsub;
    Mat sup_tgt_g[2];
    Vec sup_tgt_v[2];
    if (pde_on) {
      const int B = cfg_.batch_collocation;
      Xc.resize(n2 + 1, B);
      std::uniform_int_distribution<int> pick(0, cfg_.collocation_pool - 1);
      std::uniform_real_distribution<double> tdist(std::max(0.0, T - window), T);
      for (int k = 0; k < B; ++k) {
        Xc.col(k).head(n2) = colloc_pool_.col(pick(rng_));
        Xc(n2, k) = tdist(rng_);
      }
    }
    if (bnd_on) {
      const int B = cfg_.batch_boundary;
      Xb.resize(n2 + 1, B);
      std::uniform_int_distribution<int> pick(0, cfg_.collocation_pool - 1);
      for (int k = 0; k < B; ++k) {
        Xb.col(k).head(n2) = boundary_pool_.col(pick(rng_));
        Xb(n2, k) = T;
      }
    }
    if (sup_on) {
      const Eigen::Index K = Xs_.cols();
      const int B = static_cast<int>(
          std::min<Eigen::Index>(cfg_.batch_supervised, K));
      Xsub.resize(n2 + 1, B);
      for (int p = 0; p < 2; ++p) {
        sup_tgt_v[p].resize(B);
        sup_tgt_g[p].resize(n2, B);
      }
      std::uniform_int_distribution<Eigen::Index> pick(0, K - 1);
      for (int k = 0; k < B; ++k) {
        Eigen::Index j = (B == K) ? k : pick(rng_);
        Xsub.col(k) = Xs_.col(j);
        for (int p = 0; p < 2; ++p) {
          sup_tgt_v[p][k] = sup_v_[p][j];
          sup_tgt_g[p].col(k) = sup_g_[p].col(j);
        }
      }
    }

    // ---- evaluations ----
    BatchEval evc[2], evb[2], evs[2];
    if (pde_on)
      parallel_for(2, [&](std::size_t i) {
        evc[i].run(*nets_[i], Xc, true);
      });
    if (bnd_on)
      parallel_for(2, [&](std::size_t i) {
        evb[i].run(*nets_[i], Xb, false);
      });
    if (sup_on)
      parallel_for(2, [&](std::size_t i) {
        evs[i].run(*nets_[i], Xsub, cfg_.costate_loss);
      });

    // ---- seeds ----
    Vec ybar_c[2], ybar_b[2], ybar_s[2];
    Mat gbar_c[2], gbar_s[2];
    if (pde_on) {
      const Eigen::Index B = Xc.cols();
      const Game& pg = pde_game();
      for (int i = 0; i < 2; ++i) {
        ybar_c[i] = Vec::Zero(B);
        gbar_c[i] = Mat::Zero(n2 + 1, B);
      }
      double inv = 1.0 / static_cast<double>(B);
      for (Eigen::Index k = 0; k < B; ++k) {
        Vec x = Xc.col(k).head(n2);
        Vec lam[2] = {evc[0].g_raw.col(k).head(n2), evc[1].g_raw.col(k).head(n2)};
        Vec u1 = pg.argmax_control(0, x, lam[0], theta_.first);
        Vec u2 = pg.argmax_control(1, x, lam[1], theta_.second);
        Vec f = pg.dynamics(x, pg.stack_controls(u1, u2));
        double lt[2] = {pg.running_loss(0, x, u1, theta_.first, true),
                        pg.running_loss(1, x, u2, theta_.second, true)};
        for (int i = 0; i < 2; ++i) {
          double res = evc[i].g_raw(n2, k) + lam[i].dot(f) - lt[i];
          out.pde += std::abs(res) / scale * inv;
          double s = (res > 0 ? 1.0 : (res < 0 ? -1.0 : 0.0)) / scale * inv;
          gbar_c[i].col(k).head(n2) = s * f;
          gbar_c[i](n2, k) = s;
        }
      }
    }
    if (bnd_on) {
      const Eigen::Index B = Xb.cols();
      double inv = 1.0 / static_cast<double>(B);
      double weight = pretrain ? 1.0 : cfg_.c1;
      for (int i = 0; i < 2; ++i) ybar_b[i] = Vec::Zero(B);
      for (Eigen::Index k = 0; k < B; ++k) {
        Vec x = Xb.col(k).head(n2);
        for (int i = 0; i < 2; ++i) {
          double d = (evb[i].y_raw[k] + game_.terminal_loss(i, x)) / scale;
          if (cfg_.boundary_l2) {
            out.bnd += weight * d * d * inv;
            ybar_b[i][k] = weight * 2.0 * d / scale * inv;
          } else {
            out.bnd += weight * std::abs(d) * inv;
            ybar_b[i][k] = weight * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) /
                           scale * inv;
          }
        }
      }
    }
    if (sup_on) {
      const Eigen::Index B = Xsub.cols();
      double inv = 1.0 / static_cast<double>(B);
      for (int i = 0; i < 2; ++i) {
        ybar_s[i] = Vec::Zero(B);
        if (cfg_.costate_loss) gbar_s[i] = Mat::Zero(n2 + 1, B);
      }
      for (Eigen::Index k = 0; k < B; ++k) {
        for (int i = 0; i < 2; ++i) {
          double dv = (evs[i].y_raw[k] - sup_tgt_v[i][k]) / scale;
          out.val += std::abs(dv) * inv;
          ybar_s[i][k] = (dv > 0 ? 1.0 : (dv < 0 ? -1.0 : 0.0)) / scale * inv;
          if (cfg_.costate_loss) {
            for (int d = 0; d < n2; ++d) {
              double half = 1.0 / nets_[i]->norm_inv_half[d];
              double dg = (evs[i].g_raw(d, k) - sup_tgt_g[i](d, k)) * half / scale;
              out.grad += cfg_.c2 * std::abs(dg) * inv;
              gbar_s[i](d, k) = cfg_.c2 *
                                (dg > 0 ? 1.0 : (dg < 0 ? -1.0 : 0.0)) * half /
                                scale * inv;
            }
          }
        }
      }
    }

    // ---- parameter gradients and updates ----
    parallel_for(2, [&](std::size_t i) {
      Vec grad = Vec::Zero(nets_[i]->param_count());
      if (pde_on) evc[i].backprop(*nets_[i], ybar_c[i], gbar_c[i], grad);
      if (bnd_on) evb[i].backprop(*nets_[i], ybar_b[i], Mat(), grad);
      if (sup_on)
        evs[i].backprop(*nets_[i], ybar_s[i],
                        cfg_.costate_loss ? gbar_s[i] : Mat(), grad);
      Vec p = nets_[i]->params_flat();
      adam_step(adam_[i], p, grad);
      nets_[i]->set_params_flat(p);
    });
    return out;
  }

  const Game& game_;
  std::pair<double, double> theta_;
  TrainConfig cfg_;
  Rng rng_;
  std::shared_ptr<Mlp> nets_[2];
  AdamState adam_[2];
  std::unique_ptr<Game> pde_game_;
  Mat colloc_pool_, boundary_pool_;
  Mat Xs_;
  Vec sup_v_[2];
  Mat sup_g_[2];
};

}  // namespace

TrainResult train(const Game& game, std::pair<double, double> theta,
                  const TrainConfig& cfg, const SupervisedDataset* data) {
  PairTrainer trainer(game, theta, cfg, data);
  return trainer.run(nullptr);
}

TrainResult train_resume(const Game& game, std::pair<double, double> theta,
                         const TrainConfig& cfg, const SupervisedDataset* data,
                         const std::string& checkpoint_dir) {
  PairTrainer trainer(game, theta, cfg, data);
  Checkpoint ck = load_checkpoint(checkpoint_dir);
  return trainer.run(&ck);
}

// ---------------------------------------------------------------------------
// Toy case
// ---------------------------------------------------------------------------

namespace {

double toy_reference(double x) { return x > 0.0 ? 0.0 : -1.0; }

}  // namespace

ToyResult train_toy1d(const ToyConfig& cfg) {
  MlpConfig mc;
  mc.input_dim = 1;
  mc.hidden = {64, 64, 64};
  mc.act = cfg.act;
  mc.sin_w0 = 30.0;
  mc.in_lo = Vec::Constant(1, -1.0);
  mc.in_hi = Vec::Constant(1, 1.0);
  mc.out_scale = 1.0;
  ToyResult result{Mlp(mc, cfg.seed * 2 + 1), {}};
  Mlp& net = result.net;
  AdamState adam(net.param_count());
  adam.lr = cfg.lr;
  Rng rng(cfg.seed);

  const bool sup_any =
      cfg.regime == Regime::Hybrid || cfg.regime == Regime::Supervised;
  const bool harden = cfg.regime == Regime::ValueHardening;
  // Hybrid runs a supervised warm start before the joint phase.
  const int pretrain =
      cfg.regime == Regime::Hybrid ? cfg.iterations / 2 : 0;

  Mat Xsup(1, 2);
  Xsup << -cfg.sup_x, cfg.sup_x;
  Vec vsup(2);
  vsup << -1.0, 0.0;

  auto t_start = std::chrono::steady_clock::now();
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const bool sup_on = sup_any;
    const bool pde_on =
        cfg.regime != Regime::Supervised && iter >= pretrain;
    double gamma = 0.0;
    if (harden) {
      int step = std::min(cfg.hardening_steps - 1,
                          iter * cfg.hardening_steps / cfg.iterations);
      double frac = cfg.hardening_steps == 1
                        ? 1.0
                        : static_cast<double>(step) / (cfg.hardening_steps - 1);
      gamma = cfg.gamma_start *
              std::pow(cfg.gamma_end / cfg.gamma_start, frac);
    }

    const int B = cfg.batch;
    Mat X(1, B + 1);
    std::uniform_real_distribution<double> xdist(-1.0, 1.0);
    for (int k = 0; k < B; ++k) X(0, k) = xdist(rng);
    X(0, B) = 1.0;  // boundary anchor

    BatchEval ev;
    ev.run(net, X, true);
    Vec ybar = Vec::Zero(B + 1);
    Mat gbar = Mat::Zero(1, B + 1);
    double pde = 0, bnd = 0;
    double inv = 1.0 / B;
    if (pde_on) {
      for (int k = 0; k < B; ++k) {
        double x = X(0, k);
        // Hard delta vanishes off the kink; hardening replaces it with the
        // derivative of a sigmoid of growing slope.
        double delta = 0.0;
        if (harden) {
          double s = 1.0 / (1.0 + std::exp(-gamma * x));
          delta = gamma * s * (1.0 - s);
        }
        double r = ev.g_raw(0, k) - delta;
        pde += std::abs(r) * inv;
        gbar(0, k) = (r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0)) * inv;
      }
    }
    {
      double d = ev.y_raw[B];  // boundary value target 0
      bnd = std::abs(d);
      ybar[B] = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
    }
    double val = 0;
    const double gt = 0;
    Vec ybar_s;
    BatchEval evs;
    if (sup_on) {
      evs.run(net, Xsup, false);
      ybar_s = Vec::Zero(2);
      for (int k = 0; k < 2; ++k) {
        double dv = evs.y_raw[k] - vsup[k];
        val += 0.5 * cfg.sup_weight * std::abs(dv);
        ybar_s[k] =
            0.5 * cfg.sup_weight * (dv > 0 ? 1.0 : (dv < 0 ? -1.0 : 0.0));
      }
    }

    Vec grad = Vec::Zero(net.param_count());
    ev.backprop(net, ybar, gbar, grad);
    if (sup_on) evs.backprop(net, ybar_s, Mat(), grad);
    Vec p = net.params_flat();
    adam_step(adam, p, grad);
    net.set_params_flat(p);

    if (iter % 200 == 0 || iter + 1 == cfg.iterations) {
      TrainLogRow row;
      row.iter = iter;
      row.gamma = gamma;
      row.pde = pde;
      row.boundary = bnd;
      row.value_term = val;
      row.grad_term = gt;
      row.total = pde + bnd + val + gt;
      row.wall_s = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - t_start)
                       .count();
      result.log.push_back(row);
    }
  }
  return result;
}

double ToyResult::linf_error(double exclude_halfwidth) const {
  double worst = 0.0;
  for (int i = 0; i <= 2000; ++i) {
    double x = -1.0 + 2.0 * i / 2000.0;
    if (std::abs(x) < exclude_halfwidth) continue;
    worst = std::max(worst,
                     std::abs(net.forward(Vec::Constant(1, x)) - toy_reference(x)));
  }
  return worst;
}

double ToyResult::sup_norm(double exclude_halfwidth) const {
  double worst = 0.0;
  for (int i = 0; i <= 2000; ++i) {
    double x = -1.0 + 2.0 * i / 2000.0;
    if (std::abs(x) < exclude_halfwidth) continue;
    worst = std::max(worst, std::abs(net.forward(Vec::Constant(1, x))));
  }
  return worst;
}

void ToyResult::save_curve_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("toy: cannot write " + path);
  out << "x,prediction,reference\n";
  for (int i = 0; i <= 400; ++i) {
    double x = -1.0 + 2.0 * i / 400.0;
    out << format_double(x) << ","
        << format_double(net.forward(Vec::Constant(1, x))) << ","
        << format_double(toy_reference(x)) << "\n";
  }
}

}  // namespace dgame
