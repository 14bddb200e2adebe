#pragma once

#include "dgame/bvp.hpp"
#include "dgame/game.hpp"
#include "dgame/net.hpp"
#include "dgame/trajectory.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dgame {

enum class Regime { Supervised, Pinn, Hybrid, ValueHardening, Epigraph };

std::string regime_name(Regime r);
Regime regime_from_name(const std::string& s);

struct TrainConfig {
  Regime regime = Regime::Hybrid;
  Activation act = Activation::Tanh;
  double sin_w0 = 30.0;
  std::vector<int> hidden = {64, 64, 64};

  double lr = 2e-5;
  int iterations = 20000;           // main phase
  int pretrain_iterations = 10000;  // boundary fit (PINN/VH) or L2 fit (HL)
  int batch_supervised = 512;
  int batch_collocation = 512;
  int batch_boundary = 512;
  int collocation_pool = 10000;

  double c1 = 10.0;  // boundary weight inside L1
  double c2 = 1.0;   // costate weight inside L2
  double c3 = 10.0;  // boundary weight inside the augmented loss
  bool boundary_l2 = false;  // squared boundary penalty instead of L1
  bool costate_loss = true;  // drop to ablate the gradient term of L2

  int hardening_steps = 50;
  double gamma_start = 0.01;
  double gamma_end = 5.0;  // defaults to the game's own penalty shape

  std::uint64_t seed = 1;
  int checkpoint_every = 0;  // iterations; 0 disables
  int log_every = 100;
  std::string out_dir;  // where logs/checkpoints go; empty keeps everything in memory
};

struct TrainLogRow {
  long long iter = 0;
  double window = 0.0;  // curriculum window width (or toy ladder position)
  double gamma = 0.0;   // hardening shape in effect
  double total = 0.0, pde = 0.0, boundary = 0.0, value_term = 0.0,
         grad_term = 0.0;
  double wall_s = 0.0;
};

struct TrainResult {
  std::shared_ptr<Mlp> net1, net2;
  std::vector<TrainLogRow> log;
  bool nan_abort = false;
  long long iterations_run = 0;
};

// Per-player HJI residual at one sample, equilibrium controls taken from the
// closed-form clamp of each net's own costate. Returns residuals and, when
// out is non-null, the pieces needed to seed the parameter gradients.
struct HjiSample {
  double residual[2];
  Vec f;            // joint dynamics under the clamped controls
  double ltilde[2];
};
HjiSample hji_residual(const Game& game, const Mlp& net1, const Mlp& net2,
                       const Vec& x, double t,
                       std::pair<double, double> theta);

// Losses on explicit batches, exposed for tests. Xc carries (x, t) columns.
double loss_L1(const Game& game, const Mlp& net1, const Mlp& net2,
               const Mat& Xc, const Mat& Xb, std::pair<double, double> theta,
               double c1, bool boundary_l2);
double loss_L2(const Game& game, const Mlp& net, int player, const Mat& Xs,
               const Vec& values, const Mat& costates, double c2,
               bool costate_loss);

// Trains a value-net pair under the requested regime. Supervised data is
// required for Supervised and Hybrid. The Epigraph regime lives in
// epigraph.hpp; train() rejects it.
TrainResult train(const Game& game, std::pair<double, double> theta,
                  const TrainConfig& cfg, const SupervisedDataset* data);

// Resumes from a checkpoint directory written by train(); the continuation
// reproduces the uninterrupted run bit-exactly.
TrainResult train_resume(const Game& game, std::pair<double, double> theta,
                         const TrainConfig& cfg, const SupervisedDataset* data,
                         const std::string& checkpoint_dir);

// ---------------------------------------------------------------------------
// Toy one-dimensional case: d/dx value = delta(x) on [-1, 1] with value(1)=0.
// The exact solution is the unit step minus one. Vanilla PINN collapses to
// zero; two supervised anchors bracketing the kink rescue it.
// ---------------------------------------------------------------------------

struct ToyConfig {
  Regime regime = Regime::Hybrid;
  Activation act = Activation::Tanh;
  int iterations = 8000;
  int batch = 256;
  double lr = 1e-3;
  double sup_x = 0.1;      // value anchors at -sup_x and +sup_x
  double sup_weight = 4.0; // weight of the anchor loss against the residual
  int hardening_steps = 10;
  double gamma_start = 2.0, gamma_end = 200.0;
  std::uint64_t seed = 1;
};

struct ToyResult {
  Mlp net;
  std::vector<TrainLogRow> log;
  // L-infinity error against the step solution outside the exclusion window.
  double linf_error(double exclude_halfwidth) const;
  double sup_norm(double exclude_halfwidth) const;
  void save_curve_csv(const std::string& path) const;
};

ToyResult train_toy1d(const ToyConfig& cfg);

}  // namespace dgame
