#include "dgame/cli.hpp"

#include "dgame/beliefs.hpp"
#include "dgame/bvp.hpp"
#include "dgame/dp.hpp"
#include "dgame/epigraph.hpp"
#include "dgame/game.hpp"
#include "dgame/rollout.hpp"
#include "dgame/training.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace dgame {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// One process owns an output directory at a time.
class DirLock {
 public:
  explicit DirLock(const std::string& dir) : path_(fs::path(dir) / ".lock") {
    fs::create_directories(dir);
    std::error_code ec;
    if (fs::exists(path_))
      throw std::runtime_error("output directory is locked: " + dir);
    std::ofstream out(path_);
    out << "pid " << ::getpid() << "\n";
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }

 private:
  fs::path path_;
};

std::pair<double, double> theta_from_config(const Config& cfg) {
  std::string s = cfg.get_string("experiment.theta", "a,a");
  auto comma = s.find(',');
  if (comma == std::string::npos)
    throw std::runtime_error("experiment.theta must be 'a,a' style");
  auto trim = [](std::string v) {
    v.erase(0, v.find_first_not_of(" \t"));
    v.erase(v.find_last_not_of(" \t") + 1);
    return v;
  };
  return {type_from_label(trim(s.substr(0, comma))),
          type_from_label(trim(s.substr(comma + 1)))};
}

void write_manifest(const std::string& out_dir, const Config& cfg,
                    const std::vector<std::string>& artifacts) {
  json j;
  j["config"] = cfg.serialize();
  j["config_hash"] = hex64(cfg.hash());
  j["artifacts"] = artifacts;
  std::ofstream f(out_dir + "/manifest.json");
  f << j.dump(2) << "\n";
}

TrainConfig train_config_from(const Config& cfg, const Game& game) {
  std::string regime = cfg.get_string("experiment.regime", "hybrid");
  std::string profile = cfg.get_string("experiment.profile", "reduced");
  Config defaults = profile_defaults(game.name(), regime, profile);
  Config merged = defaults;
  merged.merge(cfg);

  TrainConfig tc;
  tc.regime = regime_from_name(regime);
  tc.act = activation_from_name(merged.get_string("train.activation", "tanh"));
  tc.sin_w0 = merged.get_double("train.sin_w0", 30.0);
  tc.lr = merged.get_double("train.lr", 2e-5);
  tc.iterations = merged.get_int("train.iterations", 20000);
  tc.pretrain_iterations = merged.get_int("train.pretrain_iterations", 10000);
  tc.batch_supervised = merged.get_int("train.batch_supervised", 512);
  tc.batch_collocation = merged.get_int("train.batch_collocation", 512);
  tc.batch_boundary = merged.get_int("train.batch_boundary", 512);
  tc.collocation_pool = merged.get_int("train.collocation_pool", 10000);
  tc.c1 = merged.get_double("train.c1", 10.0);
  tc.c2 = merged.get_double("train.c2", 1.0);
  tc.c3 = merged.get_double("train.c3", 10.0);
  tc.boundary_l2 = merged.get_string("train.boundary_norm", "l1") == "l2";
  tc.costate_loss = merged.get_bool("train.costate_loss", true);
  tc.hardening_steps = merged.get_int("train.hardening_steps", 50);
  tc.gamma_start = merged.get_double("train.gamma_start", 0.01);
  tc.gamma_end = merged.get_double("train.gamma_end", 5.0);
  tc.seed = merged.get_u64("experiment.seed", 1);
  tc.checkpoint_every = merged.get_int("train.checkpoint_every", 0);
  tc.log_every = merged.get_int("train.log_every", 100);
  return tc;
}

SupervisedDataset load_dataset(const std::string& dir) {
  if (fs::exists(dir + "/data.bin"))
    return SupervisedDataset::load_binary(dir + "/data.bin",
                                          dir + "/manifest_data.json");
  return SupervisedDataset::load_csv(dir + "/data.csv",
                                     dir + "/manifest_data.json");
}

// Test trajectories: stored BVP solutions that stay collision-free.
std::vector<Trajectory> collision_free(const Game& game,
                                       const SupervisedDataset& ds,
                                       std::pair<double, double> theta) {
  std::vector<Trajectory> out;
  for (const auto& tr : ds.trajectories) {
    bool hit = false;
    for (Eigen::Index j = 0; j < tr.points() && !hit; ++j)
      for (int p = 0; p < 2 && !hit; ++p)
        if (game.constraint(p, tr.states.col(j),
                            p == 0 ? theta.first : theta.second) > 0.0)
          hit = true;
    if (!hit) out.push_back(tr);
  }
  return out;
}

int cmd_gen_bvp(const Config& cfg, const std::string& out_dir) {
  auto game = make_game(cfg);
  auto theta = theta_from_config(cfg);
  std::string profile = cfg.get_string("experiment.profile", "reduced");
  Config defaults = profile_defaults(game->name(), "supervised", profile);
  Config merged = defaults;
  merged.merge(cfg);

  int n = merged.get_int("data.trajectories", 100);
  std::uint64_t seed = merged.get_u64("experiment.seed", 1);
  Vec lo, hi;
  std::string domain = merged.get_string("data.domain", "gt");
  if (domain == "gt")
    joint_gt_box(*game, lo, hi);
  else if (domain == "hj")
    joint_hj_box(*game, lo, hi);
  else
    throw std::runtime_error("data.domain must be gt or hj");
  if (merged.has("data.lo")) lo = merged.get_vec("data.lo");
  if (merged.has("data.hi")) hi = merged.get_vec("data.hi");

  DirLock lock(out_dir);
  DatasetOptions opts;
  opts.dt_sample = merged.get_double("data.dt_sample", 0.1);
  SupervisedDataset ds = generate_dataset(*game, theta, lo, hi, n, seed, opts);
  ds.save_binary(out_dir + "/data.bin");
  ds.save_csv(out_dir + "/data.csv");
  ds.save_manifest(out_dir + "/manifest_data.json");
  write_manifest(out_dir, merged,
                 {"data.bin", "data.csv", "manifest_data.json"});
  std::cout << "gen-bvp: " << ds.meta.n_converged << "/" << n
            << " trajectories, " << 2 * ds.total_points() << " points\n";
  return 0;
}

int cmd_train(const Config& cfg, const std::string& out_dir,
              const std::string& resume_from) {
  auto game = make_game(cfg);
  auto theta = theta_from_config(cfg);
  TrainConfig tc = train_config_from(cfg, *game);
  tc.out_dir = out_dir;

  SupervisedDataset data;
  const SupervisedDataset* data_ptr = nullptr;
  bool wants_data = tc.regime == Regime::Supervised ||
                    tc.regime == Regime::Hybrid ||
                    (tc.regime == Regime::Epigraph &&
                     cfg.get_bool("train.epigraph_supervised", false));
  if (wants_data) {
    data = load_dataset(cfg.get_string("data.path"));
    data_ptr = &data;
  }

  DirLock lock(out_dir);
  std::vector<std::string> artifacts;
  if (tc.regime == Regime::Epigraph) {
    EpigraphResult res = train_epigraph(*game, theta, tc, data_ptr);
    if (res.nan_abort) std::cerr << "train: aborted on non-finite loss\n";
    res.net.save(out_dir);
    artifacts = {"A1.dgm", "B1.dgm", "A2.dgm", "B2.dgm", "zrange.txt"};
    std::ofstream log(out_dir + "/train_log.txt");
    log << "# iter window gamma total pde boundary value grad wall_s\n";
    for (const auto& r : res.log)
      log << r.iter << " " << format_double(r.window) << " "
          << format_double(r.gamma) << " " << format_double(r.total) << " "
          << format_double(r.pde) << " " << format_double(r.boundary) << " "
          << format_double(r.value_term) << " " << format_double(r.grad_term)
          << " " << format_double(r.wall_s) << "\n";
  } else {
    TrainResult res =
        resume_from.empty()
            ? train(*game, theta, tc, data_ptr)
            : train_resume(*game, theta, tc, data_ptr, resume_from);
    if (res.nan_abort) std::cerr << "train: aborted on non-finite loss\n";
    res.net1->save(out_dir + "/net_p1.dgm");
    res.net2->save(out_dir + "/net_p2.dgm");
    artifacts = {"net_p1.dgm", "net_p2.dgm", "train_log.txt"};
  }
  Config resolved = cfg;
  resolved.merge(game->to_config());
  write_manifest(out_dir, resolved, artifacts);
  std::cout << "train: wrote models to " << out_dir << "\n";
  return 0;
}

std::unique_ptr<Controller> load_controller(const Game& game,
                                            std::pair<double, double> theta,
                                            const std::string& dir,
                                            bool check_hash) {
  if (fs::exists(dir + "/A1.dgm")) {
    AugmentedValueNet an = AugmentedValueNet::load(dir);
    if (check_hash && an.A[0]->meta.game_hash != game.config_hash())
      throw std::runtime_error("eval: model/game config hash mismatch for " +
                               dir);
    return std::make_unique<EpigraphController>(game, theta, std::move(an),
                                                "epigraph:" + dir);
  }
  if (!fs::exists(dir + "/net_p1.dgm"))
    throw std::runtime_error("eval: no model files in " + dir);
  auto n1 = std::make_shared<Mlp>(Mlp::load(dir + "/net_p1.dgm"));
  auto n2 = std::make_shared<Mlp>(Mlp::load(dir + "/net_p2.dgm"));
  if (check_hash && (n1->meta.game_hash != game.config_hash() ||
                     n2->meta.game_hash != game.config_hash()))
    throw std::runtime_error("eval: model/game config hash mismatch for " +
                             dir);
  return std::make_unique<NetPairController>(
      game, theta, n1, n2, n1->meta.regime + ":" + dir);
}

int cmd_eval(const Config& cfg, const std::string& out_dir) {
  auto game = make_game(cfg);
  auto theta = theta_from_config(cfg);
  std::string model_dir = cfg.get_string("eval.model");
  if (model_dir.empty()) throw CLI::ValidationError("eval.model is empty");
  auto ctrl = load_controller(*game, theta, model_dir,
                              cfg.get_bool("eval.check_hash", true));

  SupervisedDataset test = load_dataset(cfg.get_string("data.test_path"));
  auto tests = collision_free(*game, test, theta);
  if (tests.empty()) throw std::runtime_error("eval: empty test set");

  DirLock lock(out_dir);
  SimOptions opts;
  opts.dt = cfg.get_double("eval.dt", 0.05);
  EvalMetrics m = evaluate(*game, theta, *ctrl, tests, opts);

  json j;
  j["controller"] = ctrl->id();
  j["n_tests"] = m.n_tests;
  j["collisions"] = m.collisions;
  j["col_percent"] = m.col_percent;
  j["value_mae"] = m.value_mae;
  j["control_mae"] = m.control_mae;
  j["control_std"] = m.control_std;
  std::ofstream(out_dir + "/metrics.json") << j.dump(2) << "\n";

  std::ofstream csv(out_dir + "/metrics.csv");
  csv << "regime,theta1,theta2,value_mae,control_mae,control_std,col_percent\n";
  csv << ctrl->id() << "," << type_label(theta.first) << ","
      << type_label(theta.second) << "," << format_double(m.value_mae) << ","
      << format_double(m.control_mae) << "," << format_double(m.control_std)
      << "," << format_double(m.col_percent) << "\n";
  write_manifest(out_dir, cfg, {"metrics.json", "metrics.csv"});
  std::cout << "eval: Col% = " << m.col_percent
            << ", value MAE = " << m.value_mae
            << ", control MAE = " << m.control_mae << "\n";
  return 0;
}

int cmd_simulate(const Config& cfg, const std::string& out_dir) {
  auto game = make_game(cfg);
  auto theta = theta_from_config(cfg);
  auto ctrl = load_controller(*game, theta, cfg.get_string("eval.model"),
                              cfg.get_bool("eval.check_hash", true));
  Vec x0 = cfg.get_vec("simulate.x0");
  DirLock lock(out_dir);
  SimOptions opts;
  opts.dt = cfg.get_double("eval.dt", 0.05);
  SimResult r = simulate(*game, theta, *ctrl, x0, opts);
  r.save_csv(out_dir + "/rollout.csv");
  write_manifest(out_dir, cfg, {"rollout.csv"});
  std::cout << "simulate: collision = " << (r.collision ? "yes" : "no")
            << ", value = (" << r.realized_value[0] << ", "
            << r.realized_value[1] << ")\n";
  return 0;
}

int cmd_dp(const Config& cfg, const std::string& out_dir) {
  auto game = make_game(cfg);
  auto theta = theta_from_config(cfg);
  DpAxes axes;
  axes.d_lo = cfg.get_double("dp.d_lo", axes.d_lo);
  axes.d_hi = cfg.get_double("dp.d_hi", axes.d_hi);
  axes.dx = cfg.get_double("dp.dx", axes.dx);
  axes.v_lo = cfg.get_double("dp.v_lo", axes.v_lo);
  axes.v_hi = cfg.get_double("dp.v_hi", axes.v_hi);
  axes.dv = cfg.get_double("dp.dv", axes.dv);
  axes.dt = cfg.get_double("dp.dt", axes.dt);
  DirLock lock(out_dir);
  DpDiagnostics diag;
  GridValue gv = dp_solve(*game, theta, axes, &diag);
  gv.save(out_dir + "/grid.bin");
  double vslice = cfg.get_double("dp.slice_v", 18.0);
  gv.save_slice_csv(out_dir + "/slice_t0.csv", vslice, vslice);
  write_manifest(out_dir, cfg, {"grid.bin", "slice_t0.csv"});
  std::cout << "dp: " << gv.nd << "x" << gv.nv << "x" << gv.nd << "x" << gv.nv
            << " grid, clamped feet " << diag.clamped_feet
            << ", cycling nodes " << diag.cycling_nodes << "\n";
  return 0;
}

int cmd_compare(const Config& cfg, const std::string& out_dir) {
  auto game = make_game(cfg);
  auto theta = theta_from_config(cfg);
  GridValue gv = GridValue::load(cfg.get_string("compare.grid"));

  // Reference values on the (d1, d2) slice via multistart BVP solves.
  double v = cfg.get_double("compare.slice_v", 18.0);
  double lo = cfg.get_double("compare.d_lo", 15.0);
  double hi = cfg.get_double("compare.d_hi", 40.0);
  double step = cfg.get_double("compare.d_step", 1.0);
  int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;

  std::vector<Vec> pts;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Vec x(4);
      x << lo + i * step, v, lo + j * step, v;
      pts.push_back(x);
    }
  Mat states(4, static_cast<Eigen::Index>(pts.size()));
  Vec vals1(static_cast<Eigen::Index>(pts.size()));
  Vec vals2(vals1.size());
  std::vector<char> ok(pts.size(), 0);
  parallel_for(pts.size(), [&](std::size_t k) {
    states.col(static_cast<Eigen::Index>(k)) = pts[k];
    BvpResult r = solve_multistart(*game, pts[k], theta);
    if (r.ok()) {
      ok[k] = 1;
      vals1[static_cast<Eigen::Index>(k)] = r.trajectory->values(0, 0);
      vals2[static_cast<Eigen::Index>(k)] = r.trajectory->values(1, 0);
    }
  });
  Eigen::Index m = 0;
  for (std::size_t k = 0; k < pts.size(); ++k)
    if (ok[k]) {
      states.col(m) = states.col(static_cast<Eigen::Index>(k));
      vals1[m] = vals1[static_cast<Eigen::Index>(k)];
      vals2[m] = vals2[static_cast<Eigen::Index>(k)];
      ++m;
    }
  states.conservativeResize(4, m);
  vals1.conservativeResize(m);
  vals2.conservativeResize(m);

  DirLock lock(out_dir);
  CompareStats s1 = compare_values(gv, 0, states, vals1);
  CompareStats s2 = compare_values(gv, 1, states, vals2);
  json j;
  j["dx"] = gv.axes.dx;
  j["bvp_points"] = m;
  j["p1"] = {{"mae", s1.mae}, {"max", s1.max_err}, {"used", s1.used},
             {"skipped_unsafe", s1.skipped_unsafe},
             {"skipped_outside", s1.skipped_outside}};
  j["p2"] = {{"mae", s2.mae}, {"max", s2.max_err}, {"used", s2.used},
             {"skipped_unsafe", s2.skipped_unsafe},
             {"skipped_outside", s2.skipped_outside}};

  // Optional: difference slice against a trained model.
  if (cfg.has("compare.model")) {
    auto ctrl = load_controller(*game, theta, cfg.get_string("compare.model"),
                                false);
    std::ofstream diff(out_dir + "/model_diff.csv");
    diff << "d1,d2,bvp_p1,model_p1,abs_diff\n";
    for (Eigen::Index k = 0; k < m; ++k) {
      double vm = ctrl->value_estimate(0, states.col(k), 0.0);
      diff << format_double(states(0, k)) << "," << format_double(states(2, k))
           << "," << format_double(vals1[k]) << "," << format_double(vm) << ","
           << format_double(std::abs(vals1[k] - vm)) << "\n";
    }
  }

  std::ofstream(out_dir + "/compare.json") << j.dump(2) << "\n";
  std::ofstream csv(out_dir + "/bvp_slice.csv");
  csv << "d1,d2,v_bvp_p1,v_bvp_p2\n";
  for (Eigen::Index k = 0; k < m; ++k)
    csv << format_double(states(0, k)) << "," << format_double(states(2, k))
        << "," << format_double(vals1[k]) << "," << format_double(vals2[k])
        << "\n";
  write_manifest(out_dir, cfg, {"compare.json", "bvp_slice.csv"});
  std::cout << "compare: dx = " << gv.axes.dx << " MAE p1 = " << s1.mae
            << " (used " << s1.used << ", unsafe-skipped " << s1.skipped_unsafe
            << ")\n";
  return 0;
}

NetBank load_bank(const Game& game, const Config& cfg,
                  const std::string& prefix) {
  NetBank bank;
  const char* labels[2] = {"a", "na"};
  bool allow_swap = cfg.get_bool("models.allow_swap", true);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      std::string key = prefix + "_" + labels[i] + labels[j];
      if (!cfg.has("models." + key)) continue;
      std::string dir = cfg.get_string("models." + key);
      bank.nets[i][j][0] =
          std::make_shared<Mlp>(Mlp::load(dir + "/net_p1.dgm"));
      bank.nets[i][j][1] =
          std::make_shared<Mlp>(Mlp::load(dir + "/net_p2.dgm"));
    }
  if (allow_swap) {
    // The game is symmetric under player exchange: the missing ordered pair
    // evaluates the mirrored net on block-swapped inputs.
    const int n = game.state_dim();
    std::vector<int> perm(2 * n + 1);
    for (int k = 0; k < n; ++k) {
      perm[static_cast<std::size_t>(k)] = n + k;
      perm[static_cast<std::size_t>(n + k)] = k;
    }
    perm[static_cast<std::size_t>(2 * n)] = 2 * n;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        if (bank.nets[i][j][0] || !bank.nets[j][i][0]) continue;
        bank.nets[i][j][0] = std::make_shared<Mlp>(
            permute_inputs(*bank.nets[j][i][1], perm));
        bank.nets[i][j][1] = std::make_shared<Mlp>(
            permute_inputs(*bank.nets[j][i][0], perm));
      }
  }
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      if (!bank.nets[i][j][0])
        throw std::runtime_error(std::string("beliefs: missing model for (") +
                                 labels[i] + "," + labels[j] +
                                 "); set models." + prefix + "_" + labels[i] +
                                 labels[j]);
  return bank;
}

int cmd_beliefs(const Config& cfg, const std::string& out_dir) {
  auto game = make_game(cfg);
  SupervisedDataset test = load_dataset(cfg.get_string("data.test_path"));

  DirLock lock(out_dir);
  std::ofstream table(out_dir + "/beliefs_table.csv");
  table << "mode,prior,true_types,model,collisions,n,col_percent\n";

  std::vector<std::string> model_prefixes;
  for (const std::string& p : {"hl", "sl"})
    if (cfg.has("models." + p + "_aa") || cfg.has("models." + p + "_ana") ||
        cfg.has("models." + p + "_nana"))
      model_prefixes.push_back(p);
  if (model_prefixes.empty())
    throw std::runtime_error("beliefs: no model banks configured");

  int traces_saved = 0;
  for (const std::string& prefix : model_prefixes) {
    NetBank bank = load_bank(*game, cfg, prefix);
    for (bool empathetic : {true, false}) {
      for (const char* prior_lbl : {"a", "na"}) {
        double prior = std::string(prior_lbl) == "a" ? 0.8 : 0.2;
        for (const char* true_lbl : {"a", "na"}) {
          double th = type_from_label(true_lbl);
          auto theta = std::make_pair(th, th);
          auto tests = collision_free(*game, test, theta);
          if (tests.empty())
            throw std::runtime_error("beliefs: empty test set");
          BeliefConfig bc;
          bc.prior1 = bc.prior2 = prior;
          bc.empathetic = empathetic;
          bc.dt = cfg.get_double("eval.dt", 0.05);
          std::vector<int> hit(tests.size(), 0);
          parallel_for(tests.size(), [&](std::size_t k) {
            BeliefSimResult r = simulate_incomplete(
                *game, bank, theta, bc, tests[k].states.col(0));
            hit[k] = r.collision ? 1 : 0;
          });
          int collisions = 0;
          for (int h : hit) collisions += h;
          double pct = 100.0 * collisions / static_cast<double>(tests.size());
          table << (empathetic ? "e,e" : "ne,ne") << "," << prior_lbl << ","
                << true_lbl << "," << prefix << "," << collisions << ","
                << tests.size() << "," << format_double(pct) << "\n";
          if (traces_saved < 4) {
            BeliefSimResult r = simulate_incomplete(*game, bank, theta, bc,
                                                    tests[0].states.col(0));
            r.save_csv(out_dir + "/trace_" + prefix + "_" +
                       (empathetic ? "e" : "ne") + "_" + prior_lbl + "_" +
                       true_lbl + ".csv");
            ++traces_saved;
          }
        }
      }
    }
  }
  write_manifest(out_dir, cfg, {"beliefs_table.csv"});
  std::cout << "beliefs: table written to " << out_dir << "\n";
  return 0;
}

int cmd_toy1d(const Config& cfg, const std::string& out_dir) {
  DirLock lock(out_dir);
  std::ofstream summary(out_dir + "/toy_summary.csv");
  summary << "regime,linf_vs_step,sup_norm\n";
  std::string only = cfg.get_string("toy.regime", "");
  for (const char* name : {"hybrid", "pinn", "hardening", "supervised"}) {
    if (!only.empty() && only != name) continue;
    ToyConfig tc;
    tc.regime = regime_from_name(name);
    tc.iterations = cfg.get_int("toy.iterations", tc.iterations);
    tc.lr = cfg.get_double("toy.lr", tc.lr);
    tc.seed = cfg.get_u64("experiment.seed", tc.seed);
    ToyResult r = train_toy1d(tc);
    r.save_curve_csv(out_dir + "/toy_" + name + ".csv");
    summary << name << "," << format_double(r.linf_error(0.1)) << ","
            << format_double(r.sup_norm(0.05)) << "\n";
  }
  write_manifest(out_dir, cfg, {"toy_summary.csv"});
  std::cout << "toy1d: curves written to " << out_dir << "\n";
  return 0;
}

}  // namespace

Config profile_defaults(const std::string& game_case, const std::string& regime,
                        const std::string& profile) {
  Config c;
  bool paper = profile == "paper";
  if (!paper && profile != "reduced")
    throw std::runtime_error("unknown profile " + profile);

  // Data sizes per case.
  int traj_paper = 1700;
  if (game_case == "narrow_road" || game_case == "lane_change")
    traj_paper = 1450;
  if (game_case == "drone") traj_paper = 1250;
  c.set_int("data.trajectories", paper ? traj_paper : 100);

  int pool = paper ? (game_case == "lane_change" || game_case == "drone"
                          ? 162000
                          : 122000)
                   : 10000;
  c.set_int("train.collocation_pool", pool);

  double lr_paper =
      (game_case == "lane_change" || game_case == "drone") ? 1e-4 : 2e-5;
  c.set_double("train.lr", paper ? lr_paper : 1e-4);

  auto set_iters = [&](int pre, int main) {
    c.set_int("train.pretrain_iterations", pre);
    c.set_int("train.iterations", main);
  };
  if (regime == "supervised" || regime == "sl")
    set_iters(0, paper ? 100000 : 20000);
  else if (regime == "pinn")
    set_iters(paper ? 10000 : 2000, paper ? 260000 : 18000);
  else if (regime == "hardening" || regime == "vh")
    set_iters(paper ? 10000 : 2000, paper ? 270000 : 18000);
  else if (regime == "hybrid" || regime == "hl")
    set_iters(paper ? 100000 : 10000, paper ? 100000 : 10000);
  else if (regime == "epigraph" || regime == "el")
    set_iters(paper ? 50000 : 4000, paper ? 300000 : 16000);
  c.set_int("train.hardening_steps", 50);
  c.set_int("train.batch_supervised", 512);
  c.set_int("train.batch_collocation", 512);
  c.set_int("train.batch_boundary", 512);
  return c;
}

int cli_run(int argc, const char* const* argv) {
  CLI::App app{"Two-player differential game value approximation toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, profile, seed_str, resume_from, x0_str;

  auto add_common = [&](CLI::App* sub, bool need_out = true) {
    sub->add_option("--config", config_path, "experiment config file")
        ->required();
    if (need_out)
      sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--profile", profile, "reduced | paper");
    sub->add_option("--seed", seed_str, "override experiment.seed");
  };

  auto* gen = app.add_subcommand("gen-bvp", "generate a supervised dataset");
  add_common(gen);
  auto* train_cmd = app.add_subcommand("train", "train value networks");
  add_common(train_cmd);
  train_cmd->add_option("--resume", resume_from,
                        "checkpoint directory to resume from");
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained model");
  add_common(eval_cmd);
  auto* sim = app.add_subcommand("simulate", "roll out one interaction");
  add_common(sim);
  sim->add_option("--x0", x0_str, "initial joint state, comma separated");
  auto* dp_cmd = app.add_subcommand("dp", "grid dynamic-programming solve");
  add_common(dp_cmd);
  auto* cmp = app.add_subcommand("compare", "grid vs BVP value comparison");
  add_common(cmp);
  auto* bel = app.add_subcommand("beliefs", "incomplete-information runs");
  add_common(bel);
  auto* toy = app.add_subcommand("toy1d", "one-dimensional study");
  add_common(toy);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    Config cfg = Config::parse_file(config_path);
    if (!profile.empty()) cfg.set_string("experiment.profile", profile);
    if (!seed_str.empty()) cfg.set_string("experiment.seed", seed_str);
    if (!x0_str.empty()) cfg.set_string("simulate.x0", x0_str);

    if (gen->parsed()) return cmd_gen_bvp(cfg, out_dir);
    if (train_cmd->parsed()) return cmd_train(cfg, out_dir, resume_from);
    if (eval_cmd->parsed()) return cmd_eval(cfg, out_dir);
    if (sim->parsed()) return cmd_simulate(cfg, out_dir);
    if (dp_cmd->parsed()) return cmd_dp(cfg, out_dir);
    if (cmp->parsed()) return cmd_compare(cfg, out_dir);
    if (bel->parsed()) return cmd_beliefs(cfg, out_dir);
    if (toy->parsed()) return cmd_toy1d(cfg, out_dir);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::cerr << "error: " << msg << "\n";
    // Missing inputs and malformed configs are usage errors.
    if (msg.find("missing") != std::string::npos ||
        msg.find("cannot open") != std::string::npos ||
        msg.find("config:") != std::string::npos)
      return 2;
    return 1;
  }
  return 2;
}

}  // namespace dgame
