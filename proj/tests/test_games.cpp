#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dgame/game.hpp"

#include <cmath>
#include <random>

using namespace dgame;

namespace {

Vec rand_in(const Vec& lo, const Vec& hi, Rng& rng) {
  return uniform_in_box(lo, hi, rng);
}

// Joint sampling box over both players' blocks.
void joint_hj_box(const Game& g, Vec& lo, Vec& hi) {
  int n = g.state_dim();
  lo = Vec(2 * n);
  hi = Vec(2 * n);
  for (int i = 0; i < 2; ++i) {
    Vec l, h;
    g.hj_box(i, l, h);
    lo.segment(i * n, n) = l;
    hi.segment(i * n, n) = h;
  }
}

double fd_directional(const std::function<double(const Vec&)>& f, const Vec& x,
                      const Vec& dir, double h) {
  return (f(x + h * dir) - f(x - h * dir)) / (2.0 * h);
}

}  // namespace

TEST_CASE("intersection dynamics and losses match closed forms") {
  auto g = make_game_by_name("intersection");
  Vec x(4), u(2);
  x << 15, 18, 22, 20;
  u << 0, 0;
  Vec dx = g->dynamics(x, u);
  CHECK(dx[0] == doctest::Approx(18.0));
  CHECK(dx[1] == doctest::Approx(0.0));

  Vec u3(2);
  u3 << 3, 0;
  Vec own(1);
  own << 3;
  CHECK(g->running_loss(0, x, own, kTypeAggressive, false) ==
        doctest::Approx(9.0));

  // Midpoint of the aggressive collision interval for both players: the
  // sigmoid product saturates and the penalized loss approaches the gain.
  double mid = 0.5 * ((70.0 / 2 - 1.5 / 2) + (70.0 + 1.5) / 2 + 3.0);
  Vec xc(4);
  xc << mid, 18, mid, 18;
  Vec u0(1);
  u0 << 0;
  double lt = g->running_loss(0, xc, u0, kTypeAggressive, true);
  CHECK(lt == doctest::Approx(1e4).epsilon(0.01));
}

TEST_CASE("intersection terminal loss examples") {
  auto g = make_game_by_name("intersection");
  Vec x(4);
  x << 40, 18, 10, 18;
  CHECK(g->terminal_loss(0, x) == doctest::Approx(-4e-5));
  Vec x2(4);
  x2 << 40, 20, 10, 18;
  CHECK(g->terminal_loss(0, x2) == doctest::Approx(-4e-5 + 4.0));
}

TEST_CASE("intersection constraint indicator") {
  auto g = make_game_by_name("intersection");
  Vec x(4);
  x << 10, 18, 10, 18;
  CHECK(g->constraint(0, x, kTypeAggressive) == 0.0);
  Vec xc(4);
  xc << 36, 18, 36, 18;
  CHECK(g->constraint(0, xc, kTypeAggressive) == 1.0);
  // Non-aggressive zone extends only the lower end.
  Vec xe(4);
  xe << 32, 18, 36, 18;
  CHECK(g->constraint(0, xe, kTypeNonAggressive) == 1.0);
  CHECK(g->constraint(0, xe, kTypeAggressive) == 0.0);
}

TEST_CASE("intersection argmax control clamps the stationary point") {
  auto g = make_game_by_name("intersection");
  Vec x(4);
  x << 20, 18, 20, 18;
  Vec lam = Vec::Zero(4);
  lam[1] = 4.0;
  CHECK(g->argmax_control(0, x, lam, kTypeAggressive)[0] ==
        doctest::Approx(2.0));
  lam[1] = 30.0;
  CHECK(g->argmax_control(0, x, lam, kTypeAggressive)[0] ==
        doctest::Approx(10.0));
  lam[1] = -30.0;
  CHECK(g->argmax_control(0, x, lam, kTypeAggressive)[0] ==
        doctest::Approx(-5.0));
}

TEST_CASE("narrow road examples") {
  auto g = make_game_by_name("narrow_road");
  Vec x(8);
  x << 0, 3, 0, 18, 0, 3, 0, 18;
  Vec u = Vec::Zero(4);
  Vec dx = g->dynamics(x, u);
  CHECK(dx[0] == doctest::Approx(18.0));
  CHECK(dx[1] == doctest::Approx(0.0));
  CHECK(dx[2] == doctest::Approx(0.0));
  CHECK(dx[3] == doctest::Approx(0.0));

  // Mirrored coordinates: p2x = 36 maps to 70 - 36 = 34 = p1x.
  Vec xc(8);
  xc << 34, 3, 0, 18, 36, 3, 0, 18;
  CHECK(g->constraint(0, xc, kTypeAggressive) == doctest::Approx(1.5));
  CHECK(g->constraint(1, xc, kTypeAggressive) == doctest::Approx(1.5));
  Vec xf(8);
  xf << 0, 3, 0, 18, 0, 3, 0, 18;
  CHECK(g->constraint(0, xf, kTypeAggressive) == doctest::Approx(1.5 - 70.0));

  // At c = 0 exactly the sigmoid is 1/2.
  Vec x0(8);
  x0 << 34, 3, 0, 18, 36 - 1.5, 3, 0, 18;
  CHECK(g->constraint(0, x0, kTypeAggressive) == doctest::Approx(0.0));
  Vec u0 = Vec::Zero(2);
  CHECK(g->running_loss(0, x0, u0, kTypeAggressive, true) ==
        doctest::Approx(5000.0));

  // omega stationary point lambda_psi / (2k).
  Vec lam = Vec::Zero(8);
  CHECK(g->argmax_control(0, x, lam, kTypeAggressive)[0] == doctest::Approx(0.0));
}

TEST_CASE("lane change terminal loss hits zero at targets") {
  auto g = make_game_by_name("lane_change");
  Vec x(8);
  x << 50, 6, 0, 18, 40, 2, 0, 18;
  CHECK(g->terminal_loss(0, x) == doctest::Approx(-1e-6 * 50));
  CHECK(g->terminal_loss(1, x) == doctest::Approx(-1e-6 * 40));
}

TEST_CASE("drone hover cancels gravity") {
  auto g = make_game_by_name("drone");
  Vec x(12);
  x << 0, 0, 0, 2, 3, 0, 5, 5, 0, 2, 3, 0;
  Vec u(6);
  u << 0, 0, 9.81, 0, 0, 9.81;
  Vec dx = g->dynamics(x, u);
  CHECK(dx[0] == doctest::Approx(2.0));
  CHECK(dx[1] == doctest::Approx(3.0));
  CHECK(dx[2] == doctest::Approx(0.0));
  CHECK(dx[3] == doctest::Approx(0.0));
  CHECK(dx[4] == doctest::Approx(0.0));
  CHECK(dx[5] == doctest::Approx(0.0));
}

TEST_CASE("analytic gradients match finite differences") {
  Rng rng(1234);
  for (const char* name : {"intersection", "narrow_road", "lane_change", "drone"}) {
    auto g = make_game_by_name(name);
    Vec lo, hi;
    joint_hj_box(*g, lo, hi);
    Vec ulo = g->control_lo(), uhi = g->control_hi();
    for (int trial = 0; trial < 20; ++trial) {
      Vec x = rand_in(lo, hi, rng);
      Vec u1 = rand_in(ulo, uhi, rng), u2 = rand_in(ulo, uhi, rng);
      Vec u = g->stack_controls(u1, u2);
      double theta = g->type_set()[trial % g->type_set().size()];

      Mat J = g->dynamics_jacobian_x(x, u);
      for (int d = 0; d < x.size(); ++d) {
        Vec e = Vec::Zero(x.size());
        e[d] = 1.0;
        Vec col = (g->dynamics(x + 1e-6 * e, u) - g->dynamics(x - 1e-6 * e, u)) /
                  2e-6;
        CHECK((col - J.col(d)).lpNorm<Eigen::Infinity>() < 1e-5);
      }

      for (int player = 0; player < 2; ++player) {
        Vec gl = g->running_loss_grad_x(player, x, u1, theta, true);
        Vec gt = g->terminal_loss_grad_x(player, x);
        for (int d = 0; d < x.size(); ++d) {
          Vec e = Vec::Zero(x.size());
          e[d] = 1.0;
          double fdl = fd_directional(
              [&](const Vec& xx) {
                return g->running_loss(player, xx, u1, theta, true);
              },
              x, e, 1e-6);
          double fdt = fd_directional(
              [&](const Vec& xx) { return g->terminal_loss(player, xx); }, x, e,
              1e-6);
          CHECK(std::abs(fdl - gl[d]) < 1e-4 * std::max(1.0, std::abs(fdl)));
          CHECK(std::abs(fdt - gt[d]) < 1e-5 * std::max(1.0, std::abs(fdt)));
        }
      }
    }
  }
}

TEST_CASE("argmax control beats a brute-force grid for every case") {
  Rng rng(99);
  for (const char* name : {"intersection", "narrow_road", "lane_change", "drone"}) {
    auto g = make_game_by_name(name);
    Vec lo, hi;
    joint_hj_box(*g, lo, hi);
    Vec ulo = g->control_lo(), uhi = g->control_hi();
    const int m = g->control_dim();
    // Per-axis grid fine enough that the one-cell resolution bound is tight.
    const int pts = m == 1 ? 1000 : (m == 2 ? 33 : 11);
    std::vector<Vec> axes;
    for (int a = 0; a < m; ++a) axes.push_back(linspace(ulo[a], uhi[a], pts));
    Mat grid = control_grid_product(axes);

    int trials = std::string(name) == "intersection" ? 10000 : 300;
    for (int trial = 0; trial < trials; ++trial) {
      Vec x = rand_in(lo, hi, rng);
      Vec lam(2 * g->state_dim());
      for (int d = 0; d < lam.size(); ++d)
        lam[d] = std::uniform_real_distribution<double>(-50, 50)(rng);
      double theta = g->type_set()[0];
      for (int player = 0; player < 2; ++player) {
        Vec fellow = 0.5 * (ulo + uhi);
        auto ham = [&](const Vec& ui) {
          Vec u = player == 0 ? g->stack_controls(ui, fellow)
                              : g->stack_controls(fellow, ui);
          return lam.dot(g->dynamics(x, u)) -
                 g->running_loss(player, x, ui, theta, true);
        };
        Vec ustar = g->argmax_control(player, x, lam, theta);
        for (int a = 0; a < m; ++a) {
          CHECK(ustar[a] >= ulo[a] - 1e-12);
          CHECK(ustar[a] <= uhi[a] + 1e-12);
        }
        double hstar = ham(ustar);
        double hbest = -1e300;
        Vec ubest;
        for (int k = 0; k < grid.cols(); ++k) {
          double h = ham(grid.col(k));
          if (h > hbest) {
            hbest = h;
            ubest = grid.col(k);
          }
        }
        // The grid winner may beat the closed form only by the one-cell
        // resolution bound of the quadratic objective.
        double cell = (uhi - ulo).maxCoeff() / (pts - 1);
        double bound = 100.0 * cell * cell + 50.0 * cell;
        CHECK(hbest - hstar <= bound);
      }
    }
  }
}

TEST_CASE("penalty is control-independent") {
  Rng rng(7);
  for (const char* name : {"intersection", "narrow_road", "lane_change", "drone"}) {
    auto g = make_game_by_name(name);
    Vec lo, hi;
    joint_hj_box(*g, lo, hi);
    Vec ulo = g->control_lo(), uhi = g->control_hi();
    for (int trial = 0; trial < 50; ++trial) {
      Vec x = rand_in(lo, hi, rng);
      Vec ua = rand_in(ulo, uhi, rng), ub = rand_in(ulo, uhi, rng);
      double theta = g->type_set()[0];
      double da = g->running_loss(0, x, ua, theta, true) -
                  g->running_loss(0, x, ua, theta, false);
      double db = g->running_loss(0, x, ub, theta, true) -
                  g->running_loss(0, x, ub, theta, false);
      CHECK(da == doctest::Approx(db).epsilon(1e-12));
    }
  }
}

TEST_CASE("case 2 and 4 constraints are shared between players") {
  Rng rng(21);
  for (const char* name : {"narrow_road", "drone"}) {
    auto g = make_game_by_name(name);
    Vec lo, hi;
    joint_hj_box(*g, lo, hi);
    for (int trial = 0; trial < 100; ++trial) {
      Vec x = rand_in(lo, hi, rng);
      CHECK(g->constraint(0, x, kTypeAggressive) ==
            g->constraint(1, x, kTypeAggressive));
    }
  }
}

TEST_CASE("sigmoid zone converges to the indicator as gamma grows") {
  Config cfg;
  cfg.set_string("game.case", "intersection");
  cfg.set_double("game.penalty_shape", 500.0);
  auto g = make_game(cfg);
  // Probe 0.1 m away from the aggressive interval endpoints.
  double lo_end = 70.0 / 2 - 1.5 / 2;
  double hi_end = (70.0 + 1.5) / 2 + 3.0;
  Vec u0(1);
  u0 << 0;
  for (double d : {lo_end - 0.1, lo_end + 0.1, hi_end - 0.1, hi_end + 0.1}) {
    Vec x(4);
    x << d, 18, 36.0, 18;  // fellow deep inside its zone
    double soft =
        (g->running_loss(0, x, u0, kTypeAggressive, true) - 0.0) / 1e4;
    double hard = g->constraint(0, x, kTypeAggressive);
    CHECK(std::abs(soft - hard) < 1e-3);
  }
}

TEST_CASE("game config round trip preserves the hash") {
  for (const char* name : {"intersection", "narrow_road", "lane_change", "drone"}) {
    auto g = make_game_by_name(name);
    Config cfg = g->to_config();
    auto g2 = make_game(cfg);
    CHECK(g2->to_config().hash() == cfg.hash());
    CHECK(g2->name() == g->name());
  }
}
