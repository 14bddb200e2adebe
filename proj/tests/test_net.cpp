#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dgame/net.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace dgame;

namespace {

Mlp tiny_net(Activation act, int in_dim, std::uint64_t seed) {
  MlpConfig cfg;
  cfg.input_dim = in_dim;
  cfg.hidden = {8, 8};
  cfg.act = act;
  cfg.sin_w0 = 3.0;  // tame frequency keeps finite differences meaningful
  return Mlp(cfg, seed);
}

// Single hidden unit with explicit weights: y = w1 * f(a*(w0*x + b0)) + b1.
Mlp one_unit(Activation act, double w0, double b0, double w1, double b1,
             double slope) {
  MlpConfig cfg;
  cfg.input_dim = 1;
  cfg.hidden = {1};
  cfg.act = act;
  cfg.sin_w0 = 1.0;
  Mlp net(cfg, 0);
  net.W[0](0, 0) = w0;
  net.b[0][0] = b0;
  net.W[1](0, 0) = w1;
  net.b[1][0] = b1;
  net.slopes[0] = slope;
  return net;
}

// True when no relu pre-activation sits near its kink, so central finite
// differences are trustworthy.
bool away_from_kinks(const Mlp& net, const Vec& x, double margin) {
  if (net.config().act != Activation::Relu) return true;
  Vec h = ((x - net.norm_center).array() * net.norm_inv_half.array()).matrix();
  for (std::size_t l = 0; l + 1 < net.W.size(); ++l) {
    Vec u = net.slopes[static_cast<Eigen::Index>(l)] * (net.W[l] * h + net.b[l]);
    if (u.cwiseAbs().minCoeff() < margin) return false;
    h = u.cwiseMax(0.0);
  }
  return true;
}

}  // namespace

TEST_CASE("single neuron closed forms") {
  auto net = one_unit(Activation::Tanh, 1, 0, 1, 0, 1);
  CHECK(net.forward(Vec::Constant(1, 0.0)) == doctest::Approx(0.0));
  double y = net.forward(Vec::Constant(1, 1e6));
  CHECK(y > 0.999999);
  CHECK(y <= 1.0);
  CHECK(net.input_gradient(Vec::Constant(1, 0.0))[0] == doctest::Approx(1.0));

  auto net2 = one_unit(Activation::Tanh, 1, 0, 1, 0, 2);
  CHECK(net2.input_gradient(Vec::Constant(1, 0.0))[0] == doctest::Approx(2.0));

  auto constant = one_unit(Activation::Tanh, 0, 0, 0, 0.7, 1);
  CHECK(constant.forward(Vec::Constant(1, -3.0)) == doctest::Approx(0.7));
  CHECK(constant.forward(Vec::Constant(1, 42.0)) == doctest::Approx(0.7));
}

TEST_CASE("adaptive slope of one is the plain activation") {
  Rng rng(5);
  auto net = tiny_net(Activation::Tanh, 3, 77);
  auto plain = net;
  plain.slopes.setOnes();
  net.slopes.setOnes();
  for (int k = 0; k < 10; ++k) {
    Vec x = uniform_in_box(Vec::Constant(3, -1.0), Vec::Constant(3, 1.0), rng);
    CHECK(net.forward(x) == plain.forward(x));
  }
}

TEST_CASE("input gradients match central finite differences") {
  Rng rng(123);
  for (Activation act : {Activation::Tanh, Activation::Relu, Activation::Sin,
                         Activation::Gelu}) {
    double tol = act == Activation::Relu ? 1e-3 : 1e-4;
    for (int trial = 0; trial < 20; ++trial) {
      MlpConfig cfg;
      cfg.input_dim = 5;
      cfg.hidden = {64, 64, 64};
      cfg.act = act;
      cfg.sin_w0 = 3.0;
      Mlp net(cfg, 1000 + trial);
      net.slopes = Vec::Constant(3, 1.0 + 0.1 * (trial % 3));
      int checked = 0;
      for (int p = 0; p < 400 && checked < 40; ++p) {
        Vec x = uniform_in_box(Vec::Constant(5, -1.0), Vec::Constant(5, 1.0), rng);
        if (!away_from_kinks(net, x, 5e-3)) continue;
        ++checked;
        Vec g = net.input_gradient(x);
        for (int d = 0; d < 5; ++d) {
          Vec e = Vec::Zero(5);
          e[d] = 1.0;
          double fd =
              (net.forward(x + 1e-4 * e) - net.forward(x - 1e-4 * e)) / 2e-4;
          double denom = std::max(std::abs(fd), 1e-6);
          CHECK(std::abs(g[d] - fd) / denom < tol);
        }
      }
      CHECK(checked > 0);
    }
  }
}

TEST_CASE("parameter gradients of value and derivative losses match FD") {
  Rng rng(321);
  for (Activation act : {Activation::Tanh, Activation::Relu, Activation::Sin,
                         Activation::Gelu}) {
    double tol = act == Activation::Relu ? 1e-3 : 1e-4;
    for (int trial = 0; trial < 20; ++trial) {
      auto net = tiny_net(act, 3, 50 + trial);
      net.slopes = Vec::Constant(2, 0.9 + 0.1 * (trial % 4));
      Mat X(3, 4);
      for (int c = 0; c < 4; ++c)
        X.col(c) =
            uniform_in_box(Vec::Constant(3, -1.0), Vec::Constant(3, 1.0), rng);
      if (act == Activation::Relu) {
        bool ok = true;
        for (int c = 0; c < 4; ++c)
          ok = ok && away_from_kinks(net, X.col(c), 5e-2);
        if (!ok) continue;
      }

      // loss = mean_k [ y_k^2 + sum_d (g_kd - 1)^2 ]
      auto fn = [](Eigen::Index, double y, const Vec& g, double& ybar,
                   Vec& gbar) {
        ybar = 2.0 * y;
        gbar = 2.0 * (g.array() - 1.0).matrix();
        return y * y + (g.array() - 1.0).square().sum();
      };
      Vec grad;
      double loss = loss_gradient(net, X, fn, grad);
      CHECK(std::isfinite(loss));

      Vec p = net.params_flat();
      auto eval_loss = [&](const Vec& pp) {
        Mlp n2 = net;
        n2.set_params_flat(pp);
        double total = 0.0;
        for (int c = 0; c < 4; ++c) {
          double y;
          Vec g;
          n2.forward_with_gradient(X.col(c), y, g);
          total += y * y + (g.array() - 1.0).square().sum();
        }
        return total / 4.0;
      };
      Rng pick(trial);
      for (int probe = 0; probe < 25; ++probe) {
        auto idx = static_cast<Eigen::Index>(pick() % p.size());
        Vec pp = p;
        double h = 1e-5 * std::max(1.0, std::abs(p[idx]));
        pp[idx] = p[idx] + h;
        double up = eval_loss(pp);
        pp[idx] = p[idx] - h;
        double dn = eval_loss(pp);
        double fd = (up - dn) / (2.0 * h);
        double denom = std::max(std::abs(fd), 1e-5);
        CHECK(std::abs(grad[idx] - fd) / denom < tol);
      }
    }
  }
}

TEST_CASE("derivative-target loss on an effectively linear net") {
  // relu unit biased into its positive regime behaves as y = w x near 0.
  double w = 3.0;
  auto net = one_unit(Activation::Relu, 1.0, 10.0, w, -10.0 * w, 1.0);
  Mat X = Mat::Zero(1, 1);
  auto fn = [](Eigen::Index, double, const Vec& g, double& ybar, Vec& gbar) {
    ybar = 0.0;
    gbar = Vec::Constant(1, 2.0 * (g[0] - 1.0));
    return (g[0] - 1.0) * (g[0] - 1.0);
  };
  Vec grad;
  loss_gradient(net, X, fn, grad);
  // Flat layout: W0, b0, W1, b1, slope. d loss / d W1 = 2 (w - 1).
  CHECK(grad[2] == doctest::Approx(2.0 * (w - 1.0)));
  // Constant-in-parameter loss has zero gradient.
  auto zero_fn = [](Eigen::Index, double, const Vec&, double& ybar, Vec& gbar) {
    ybar = 0.0;
    gbar.setZero();
    return 1.0;
  };
  Vec zgrad;
  loss_gradient(net, X, zero_fn, zgrad);
  CHECK(zgrad.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("normalization maps the box onto [-1,1] and rescales gradients") {
  MlpConfig cfg;
  cfg.input_dim = 2;
  cfg.hidden = {16};
  cfg.act = Activation::Tanh;
  cfg.in_lo = Vec(2);
  cfg.in_hi = Vec(2);
  cfg.in_lo << 15.0, 18.0;
  cfg.in_hi << 105.0, 32.0;
  cfg.out_scale = 100.0;
  Mlp net(cfg, 9);
  Vec x(2);
  x << 60.0, 25.0;  // box center
  Vec h = ((x - net.norm_center).array() * net.norm_inv_half.array()).matrix();
  CHECK(h.lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
  // FD in raw units agrees with the reported raw gradient.
  Vec g = net.input_gradient(x);
  for (int d = 0; d < 2; ++d) {
    Vec e = Vec::Zero(2);
    e[d] = 1.0;
    double fd = (net.forward(x + 1e-3 * e) - net.forward(x - 1e-3 * e)) / 2e-3;
    CHECK(g[d] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("adam basics") {
  Vec p = Vec::Constant(3, 1.0);
  AdamState st(3);
  st.lr = 0.01;
  adam_step(st, p, Vec::Zero(3));
  CHECK((p - Vec::Constant(3, 1.0)).lpNorm<Eigen::Infinity>() == 0.0);

  Vec q = Vec::Zero(3);
  AdamState st2(3);
  st2.lr = 0.01;
  Vec g(3);
  g << 10.0, -0.1, 1e-6;
  adam_step(st2, q, g);
  // First bias-corrected step moves by about lr in the sign direction.
  for (int i = 0; i < 3; ++i)
    CHECK(std::abs(q[i]) ==
          doctest::Approx(st2.lr * std::abs(g[i]) /
                          (std::abs(g[i]) + st2.eps)));

  // Determinism: same inputs, same state evolution.
  Vec q1 = Vec::Zero(3), q2 = Vec::Zero(3);
  AdamState a1(3), a2(3);
  for (int it = 0; it < 5; ++it) {
    adam_step(a1, q1, g);
    adam_step(a2, q2, g);
  }
  CHECK((q1 - q2).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("seeded training is bit reproducible") {
  auto run = [](std::uint64_t seed) {
    Mlp net = tiny_net(Activation::Tanh, 2, seed);
    AdamState st(net.param_count());
    st.lr = 1e-3;
    Rng rng(seed + 1);
    Vec p = net.params_flat();
    for (int it = 0; it < 50; ++it) {
      Mat X(2, 8);
      for (int c = 0; c < 8; ++c)
        X.col(c) =
            uniform_in_box(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0), rng);
      net.set_params_flat(p);
      auto fn = [](Eigen::Index, double y, const Vec&, double& ybar, Vec&) {
        ybar = 2.0 * y;
        return y * y;
      };
      Vec grad;
      loss_gradient(net, X, fn, grad);
      adam_step(st, p, grad);
    }
    return p;
  };
  Vec a = run(42), b = run(42);
  CHECK((a - b).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("model file round trip is exact") {
  MlpConfig cfg;
  cfg.input_dim = 5;
  cfg.hidden = {64, 64, 64};
  cfg.act = Activation::Gelu;
  cfg.in_lo = Vec::Constant(5, -2.0);
  cfg.in_hi = Vec::Constant(5, 3.0);
  cfg.out_scale = 100.0;
  Mlp net(cfg, 4242);
  net.meta.game_hash = 0xdeadbeef;
  net.meta.player = 1;
  net.meta.theta_self = 1;
  net.meta.theta_fellow = 5;
  net.meta.regime = "hybrid";

  auto path = std::filesystem::temp_directory_path() / "dgame_net_test.dgm";
  net.save(path.string());
  Mlp back = Mlp::load(path.string());
  CHECK((back.params_flat() - net.params_flat()).lpNorm<Eigen::Infinity>() ==
        0.0);
  CHECK(back.meta.regime == "hybrid");
  CHECK(back.meta.game_hash == 0xdeadbeef);
  CHECK(back.config().out_scale == 100.0);
  Vec x = Vec::Constant(5, 0.5);
  CHECK(back.forward(x) == net.forward(x));
  std::filesystem::remove(path);
}
