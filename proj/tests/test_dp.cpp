#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dgame/dp.hpp"

#include <cmath>
#include <filesystem>

using namespace dgame;

namespace {

DpAxes coarse_axes() {
  DpAxes a;
  a.d_lo = 15.0;
  a.d_hi = 42.0;
  a.dx = 1.5;
  a.v_lo = 12.0;
  a.v_hi = 26.0;
  a.dv = 2.0;
  return a;
}

}  // namespace

TEST_CASE("one backward step against exhaustive enumeration") {
  // b = 0 removes the coupling penalty; a single step from the terminal
  // slice must match brute force over the joint control grid.
  Config cfg;
  cfg.set_string("game.case", "intersection");
  cfg.set_double("game.penalty_gain", 1e-12);
  cfg.set_double("game.horizon", 0.1);  // exactly one backward step
  auto g = make_game(cfg);
  DpAxes axes = coarse_axes();
  GridValue gv = dp_solve(*g, {1.0, 1.0}, axes);

  GridValue terminal = gv;  // reuse the layout for the terminal slice
  for (int i1 = 0; i1 < gv.nd; ++i1)
    for (int j1 = 0; j1 < gv.nv; ++j1)
      for (int i2 = 0; i2 < gv.nd; ++i2)
        for (int j2 = 0; j2 < gv.nv; ++j2) {
          Vec x(4);
          x << gv.d_at(i1), gv.v_at(j1), gv.d_at(i2), gv.v_at(j2);
          terminal.value[0][terminal.index(i1, j1, i2, j2)] =
              -g->terminal_loss(0, x);
          terminal.value[1][terminal.index(i1, j1, i2, j2)] =
              -g->terminal_loss(1, x);
        }
  // pin terminal violations the same way the solver does
  for (int i1 = 0; i1 < gv.nd; ++i1)
    for (int i2 = 0; i2 < gv.nd; ++i2) {
      Vec x(4);
      x << gv.d_at(i1), 0, gv.d_at(i2), 0;
      for (int p = 0; p < 2; ++p)
        if (g->constraint(p, x, 1.0) > 0.0)
          for (int j1 = 0; j1 < gv.nv; ++j1)
            for (int j2 = 0; j2 < gv.nv; ++j2)
              terminal.value[p][terminal.index(i1, j1, i2, j2)] =
                  terminal.unsafe_fill;
    }

  Vec uaxis = g->control_axes()[0];
  Rng rng(5);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    int i1 = 1 + static_cast<int>(rng() % (gv.nd - 2));
    int j1 = 1 + static_cast<int>(rng() % (gv.nv - 2));
    int i2 = 1 + static_cast<int>(rng() % (gv.nd - 2));
    int j2 = 1 + static_cast<int>(rng() % (gv.nv - 2));
    Vec x(4);
    x << gv.d_at(i1), gv.v_at(j1), gv.d_at(i2), gv.v_at(j2);
    if (g->constraint(0, x, 1.0) > 0.0) continue;
    ++checked;

    // Brute force: player 0's best response maximized over the full joint
    // grid given player 1 best-responding the same way (static point game
    // decouples because the penalty is off and costs are separable).
    double best0 = -1e300, best1 = -1e300;
    for (int a = 0; a < uaxis.size(); ++a)
      for (int b = 0; b < uaxis.size(); ++b) {
        Vec u(2);
        u << uaxis[a], uaxis[b];
        Vec foot = x + g->dynamics(x, u) * 0.1;
        bool un = false, outp = false;
        double c0 = -(uaxis[a] * uaxis[a]) * 0.1 +
                    terminal.interpolate(0, foot, un, outp);
        double c1 = -(uaxis[b] * uaxis[b]) * 0.1 +
                    terminal.interpolate(1, foot, un, outp);
        best0 = std::max(best0, c0);
        best1 = std::max(best1, c1);
      }
    double got0 = gv.value[0][gv.index(i1, j1, i2, j2)];
    double got1 = gv.value[1][gv.index(i1, j1, i2, j2)];
    CHECK(got0 == doctest::Approx(best0).epsilon(1e-12));
    CHECK(got1 == doctest::Approx(best1).epsilon(1e-12));
  }
  CHECK(checked > 10);
}

TEST_CASE("sweep is exactly symmetric under player exchange") {
  auto g = make_game_by_name("intersection");
  DpAxes axes = coarse_axes();
  GridValue gv = dp_solve(*g, {1.0, 1.0}, axes);
  for (int i1 = 0; i1 < gv.nd; ++i1)
    for (int j1 = 0; j1 < gv.nv; ++j1)
      for (int i2 = 0; i2 < gv.nd; ++i2)
        for (int j2 = 0; j2 < gv.nv; ++j2) {
          double a = gv.value[0][gv.index(i1, j1, i2, j2)];
          double b = gv.value[1][gv.index(i2, j2, i1, j1)];
          CHECK(a == b);
        }
}

TEST_CASE("decoupled game equals two independent single-player solves") {
  // Remove every coupling channel: a negative car length empties the
  // collision zone (no pinning, indicator always 0) and the penalty gain is
  // negligible, so each player faces an independent single-player problem.
  Config cfg;
  cfg.set_string("game.case", "intersection");
  cfg.set_double("game.penalty_gain", 1e-12);
  cfg.set_double("game.geometry.car_length", -10.0);
  auto g = make_game(cfg);
  DpAxes axes = coarse_axes();
  GridValue gv = dp_solve(*g, {1.0, 1.0}, axes);
  // Fellow-independence: for fixed (d1, v1), the player-0 value must not
  // depend on the fellow coordinates.
  for (int i1 = 2; i1 < gv.nd - 2; i1 += 3)
    for (int j1 = 1; j1 < gv.nv - 1; j1 += 2) {
      double ref = gv.value[0][gv.index(i1, j1, 1, 1)];
      for (int i2 = 1; i2 < gv.nd - 1; i2 += 4)
        for (int j2 = 1; j2 < gv.nv - 1; j2 += 3) {
          double v = gv.value[0][gv.index(i1, j1, i2, j2)];
          CHECK(v == doctest::Approx(ref).epsilon(1e-10));
        }
    }
}

TEST_CASE("grid self comparison is exact and io round trips") {
  auto g = make_game_by_name("intersection");
  DpAxes axes = coarse_axes();
  GridValue gv = dp_solve(*g, {1.0, 5.0}, axes);

  // Sample grid nodes as a reference set.
  int count = 0;
  Mat states(4, 64);
  Vec values(64);
  Rng rng(7);
  while (count < 64) {
    int i1 = static_cast<int>(rng() % gv.nd);
    int j1 = static_cast<int>(rng() % gv.nv);
    int i2 = static_cast<int>(rng() % gv.nd);
    int j2 = static_cast<int>(rng() % gv.nv);
    double v = gv.value[0][gv.index(i1, j1, i2, j2)];
    if (v == gv.unsafe_fill) continue;
    states.col(count) << gv.d_at(i1), gv.v_at(j1), gv.d_at(i2), gv.v_at(j2);
    values[count] = v;
    ++count;
  }
  CompareStats st = compare_values(gv, 0, states, values);
  CHECK(st.mae == 0.0);
  CHECK(st.max_err == 0.0);

  auto path = std::filesystem::temp_directory_path() / "dgame_gv_test.bin";
  gv.save(path.string());
  GridValue back = GridValue::load(path.string());
  CHECK(back.nd == gv.nd);
  CHECK(back.value[0] == gv.value[0]);
  CHECK(back.value[1] == gv.value[1]);
  std::filesystem::remove(path.string());

  // Single reference point exactly on a node reports the raw difference.
  Mat one(4, 1);
  one.col(0) = states.col(0);
  Vec offset = values.head(1);
  offset[0] += 0.25;
  CompareStats st2 = compare_values(gv, 0, one, offset);
  CHECK(st2.mae == doctest::Approx(0.25));
}
