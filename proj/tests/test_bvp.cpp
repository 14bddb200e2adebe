#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dgame/bvp.hpp"

#include <cmath>
#include <filesystem>

using namespace dgame;

namespace {

// RK4 re-integration of a trajectory's stored controls (linear interpolation
// in time) through the game dynamics.
Mat reintegrate(const Game& g, const Trajectory& tr, int substeps) {
  Mat out(tr.states.rows(), tr.points());
  Vec x = tr.states.col(0);
  out.col(0) = x;
  auto control_at = [&](double t) -> Vec {
    const Vec& times = tr.times;
    if (t <= times[0]) return tr.controls.col(0);
    if (t >= times[times.size() - 1])
      return tr.controls.col(times.size() - 1);
    Eigen::Index j = 0;
    while (times[j + 1] < t) ++j;
    double w = (t - times[j]) / (times[j + 1] - times[j]);
    return (1 - w) * tr.controls.col(j) + w * tr.controls.col(j + 1);
  };
  for (Eigen::Index j = 0; j + 1 < tr.points(); ++j) {
    double h = (tr.times[j + 1] - tr.times[j]) / substeps;
    double t = tr.times[j];
    for (int s = 0; s < substeps; ++s) {
      Vec k1 = g.dynamics(x, control_at(t));
      Vec k2 = g.dynamics(x + 0.5 * h * k1, control_at(t + 0.5 * h));
      Vec k3 = g.dynamics(x + 0.5 * h * k2, control_at(t + 0.5 * h));
      Vec k4 = g.dynamics(x + h * k3, control_at(t + h));
      x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
      t += h;
    }
    out.col(j + 1) = x;
  }
  return out;
}

}  // namespace

TEST_CASE("non-interacting solve matches the single-player closed form") {
  auto g = make_game_by_name("intersection");
  // Both players past the collision zone; the game decouples and each
  // player's costate follows lambda_d = mu, lambda_v linear in time.
  Vec x0(4);
  x0 << 50.0, 17.0, 55.0, 19.0;
  auto theta = std::make_pair(kTypeAggressive, kTypeAggressive);
  BvpResult res = solve_multistart(*g, x0, theta);
  REQUIRE(res.ok());
  const Trajectory& tr = *res.trajectory;

  const double T = 3.0, mu = 1e-6, vbar = 18.0;
  for (int player = 0; player < 2; ++player) {
    double v0 = x0[2 * player + 1];
    double a = (v0 - vbar + mu * T * T / 4.0) / (1.0 + T);
    for (Eigen::Index j = 0; j < tr.points(); ++j) {
      double t = tr.times[j];
      double lam_v = -2.0 * a + mu * (T - t);
      CHECK(tr.costates[player](2 * player, j) == doctest::Approx(mu).epsilon(1e-3));
      CHECK(tr.costates[player](2 * player + 1, j) ==
            doctest::Approx(lam_v).epsilon(1e-3));
      CHECK(tr.controls(player, j) == doctest::Approx(0.5 * lam_v).epsilon(1e-3));
    }
    // Penalty-free optimum: reward = mu d(T) - (v(T) - vbar)^2 - int u^2.
    double vT = v0 - a * T + mu * T * T / 4.0;
    CHECK(tr.states(2 * player + 1, tr.points() - 1) ==
          doctest::Approx(vT).epsilon(1e-4));
  }
}

TEST_CASE("terminal costate equals the terminal loss gradient") {
  auto g = make_game_by_name("intersection");
  Vec x0(4);
  x0 << 16.0, 20.0, 18.0, 22.0;
  auto theta = std::make_pair(kTypeAggressive, kTypeAggressive);
  BvpResult res = solve_multistart(*g, x0, theta);
  REQUIRE(res.ok());
  const Trajectory& tr = *res.trajectory;
  Eigen::Index last = tr.points() - 1;
  for (int player = 0; player < 2; ++player) {
    double vT = tr.states(2 * player + 1, last);
    CHECK(tr.costates[player](2 * player, last) == doctest::Approx(1e-6));
    CHECK(tr.costates[player](2 * player + 1, last) ==
          doctest::Approx(-2.0 * (vT - 18.0)).epsilon(1e-6));
    CHECK(tr.values(player, last) ==
          doctest::Approx(-g->terminal_loss(player, tr.states.col(last))));
  }
}

TEST_CASE("zero-length horizon returns the terminal point") {
  auto g = make_game_by_name("intersection");
  Vec x0(4);
  x0 << 16.0, 20.0, 18.0, 22.0;
  auto theta = std::make_pair(kTypeAggressive, kTypeNonAggressive);
  BvpResult res = solve_multistart(*g, x0, theta, {}, g->horizon());
  REQUIRE(res.ok());
  CHECK(res.trajectory->points() == 1);
  CHECK(res.trajectory->values(0, 0) == doctest::Approx(-g->terminal_loss(0, x0)));
  CHECK(res.trajectory->values(1, 0) == doctest::Approx(-g->terminal_loss(1, x0)));
}

TEST_CASE("dynamic and value consistency of converged solutions") {
  auto g = make_game_by_name("intersection");
  auto theta = std::make_pair(kTypeAggressive, kTypeAggressive);
  Rng rng(2024);
  Vec lo, hi;
  joint_gt_box(*g, lo, hi);
  int solved = 0;
  for (int k = 0; k < 5; ++k) {
    Vec x0 = uniform_in_box(lo, hi, rng);
    BvpResult res = solve_multistart(*g, x0, theta);
    if (!res.ok()) continue;
    ++solved;
    const Trajectory& tr = *res.trajectory;

    Mat re = reintegrate(*g, tr, 4);
    double scale = tr.states.cwiseAbs().maxCoeff();
    CHECK((re - tr.states).cwiseAbs().maxCoeff() / scale < 1e-4);

    for (int player = 0; player < 2; ++player) {
      Vec vals = path_reward_values(*g, player,
                                    player == 0 ? theta.first : theta.second,
                                    tr.times, tr.states, tr.controls);
      CHECK((vals - tr.values.row(player).transpose()).lpNorm<Eigen::Infinity>() <
            1e-6);
    }
  }
  CHECK(solved >= 4);
}

TEST_CASE("costates match directional finite differences of the value") {
  auto g = make_game_by_name("intersection");
  auto theta = std::make_pair(kTypeAggressive, kTypeAggressive);
  // Smooth region: players well separated in time, no collision pressure.
  Vec x0(4);
  x0 << 15.0, 18.0, 28.0, 24.0;
  // Normalized step of 1e-2 along the v1 axis (half-range 8.5 in the HJ box).
  double h = 1e-2 * 8.5;
  Vec e = Vec::Zero(4);
  e[1] = 1.0;
  auto solve_value = [&](const Vec& x) {
    BvpResult r = solve_multistart(*g, x, theta);
    REQUIRE(r.ok());
    return r.trajectory->values(0, 0);
  };
  BvpResult base = solve_multistart(*g, x0, theta);
  REQUIRE(base.ok());
  double fd = (solve_value(x0 + h * e) - solve_value(x0 - h * e)) / (2.0 * h);
  double lam = base.trajectory->costates[0](1, 0);
  CHECK(std::abs(fd - lam) / std::max(1.0, std::abs(fd)) < 0.05);
}

TEST_CASE("multistart selection agrees with the re-integration oracle") {
  auto g = make_game_by_name("intersection");
  auto theta = std::make_pair(kTypeAggressive, kTypeAggressive);
  Vec x0(4);
  x0 << 17.0, 21.0, 17.5, 20.5;
  const double T = g->horizon();
  const int N = static_cast<int>(std::lround(T / 0.05)) + 1;
  auto starts = g->warm_start_controls();
  std::vector<Trajectory> cands;
  for (const Vec& ua : starts)
    for (const Vec& ub : starts) {
      BvpGuess guess = build_constant_guess(*g, x0, ua, ub, theta, N, T / (N - 1));
      BvpResult r = solve_bvp(*g, x0, theta, guess);
      if (r.ok()) cands.push_back(*r.trajectory);
    }
  REQUIRE(!cands.empty());
  double best_sum = -1e300;
  for (const auto& tr : cands) {
    // Independent route: integrate the stored open-loop controls through the
    // dynamics and accumulate rewards from scratch.
    Mat re = reintegrate(*g, tr, 4);
    double sum = 0;
    for (int player = 0; player < 2; ++player)
      sum += path_reward_values(*g, player,
                                player == 0 ? theta.first : theta.second,
                                tr.times, re, tr.controls)[0];
    best_sum = std::max(best_sum, sum);
  }
  BvpResult chosen = solve_multistart(*g, x0, theta);
  REQUIRE(chosen.ok());
  double chosen_sum = chosen.trajectory->values.col(0).sum();
  CHECK(chosen_sum == doctest::Approx(best_sum).epsilon(1e-3));
}

TEST_CASE("dataset generation is deterministic and resampled at 0.1s") {
  auto g = make_game_by_name("intersection");
  auto theta = std::make_pair(kTypeAggressive, kTypeAggressive);
  Vec lo, hi;
  joint_gt_box(*g, lo, hi);
  auto ds1 = generate_dataset(*g, theta, lo, hi, 3, 99);
  auto ds2 = generate_dataset(*g, theta, lo, hi, 3, 99);
  REQUIRE(ds1.trajectories.size() == ds2.trajectories.size());
  REQUIRE(!ds1.trajectories.empty());
  CHECK(ds1.trajectories.front().points() == 31);
  for (std::size_t k = 0; k < ds1.trajectories.size(); ++k) {
    CHECK((ds1.trajectories[k].states - ds2.trajectories[k].states)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((ds1.trajectories[k].values - ds2.trajectories[k].values)
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }

  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "dgame_ds_test";
  fs::create_directories(dir);
  ds1.save_manifest((dir / "m.json").string());
  ds1.save_csv((dir / "d.csv").string());
  ds1.save_binary((dir / "d.bin").string());
  auto from_csv = SupervisedDataset::load_csv((dir / "d.csv").string(),
                                              (dir / "m.json").string());
  auto from_bin = SupervisedDataset::load_binary((dir / "d.bin").string(),
                                                 (dir / "m.json").string());
  REQUIRE(from_csv.trajectories.size() == ds1.trajectories.size());
  REQUIRE(from_bin.trajectories.size() == ds1.trajectories.size());
  for (std::size_t k = 0; k < ds1.trajectories.size(); ++k) {
    CHECK((from_csv.trajectories[k].states - ds1.trajectories[k].states)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((from_bin.trajectories[k].costates[1] -
           ds1.trajectories[k].costates[1])
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((from_csv.trajectories[k].values - ds1.trajectories[k].values)
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
  fs::remove_all(dir);
}
