#include "dgame/dp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dgame {

namespace {

struct AxisHit {
  int i0 = 0, i1 = 0;
  double w = 0.0;  // weight of the upper corner
  bool clamped = false;
};

AxisHit locate(double x, double lo, double step, int n) {
  AxisHit h;
  double s = (x - lo) / step;
  if (s <= 0.0) {
    h.i0 = h.i1 = 0;
    h.w = 0.0;
    h.clamped = s < -1e-12;
    return h;
  }
  if (s >= n - 1) {
    h.i0 = h.i1 = n - 1;
    h.w = 0.0;
    h.clamped = s > n - 1 + 1e-12;
    return h;
  }
  h.i0 = static_cast<int>(s);
  h.i1 = h.i0 + 1;
  h.w = s - h.i0;
  return h;
}

// Corner data of one player's (d, v) block at a foot point.
struct BlockHit {
  AxisHit d, v;
};

}  // namespace

double GridValue::interpolate(int player, const Vec& x, bool& touched_unsafe,
                              bool& outside) const {
  AxisHit h[4];
  h[0] = locate(x[0], axes.d_lo, axes.dx, nd);
  h[1] = locate(x[1], axes.v_lo, axes.dv, nv);
  h[2] = locate(x[2], axes.d_lo, axes.dx, nd);
  h[3] = locate(x[3], axes.v_lo, axes.dv, nv);
  outside = h[0].clamped || h[1].clamped || h[2].clamped || h[3].clamped;
  touched_unsafe = false;
  const auto& vals = value[player];
  double acc = 0.0;
  for (int a = 0; a < 2; ++a) {
    double wa = a ? h[0].w : 1.0 - h[0].w;
    for (int b = 0; b < 2; ++b) {
      double wb = b ? h[1].w : 1.0 - h[1].w;
      for (int c = 0; c < 2; ++c) {
        double wc = c ? h[2].w : 1.0 - h[2].w;
        for (int d = 0; d < 2; ++d) {
          double wd = d ? h[3].w : 1.0 - h[3].w;
          double w = wa * wb * wc * wd;
          double v = vals[index(a ? h[0].i1 : h[0].i0, b ? h[1].i1 : h[1].i0,
                                c ? h[2].i1 : h[2].i0, d ? h[3].i1 : h[3].i0)];
          if (v == unsafe_fill) touched_unsafe = true;
          acc += w * v;
        }
      }
    }
  }
  return acc;
}

namespace {

// Role-directed multilinear interpolation: the owner's block is the outer
// sum and the fellow's the inner one, each in (d, v) nesting. At swapped
// nodes the two players' updates then evaluate identical expression trees,
// which keeps the sweep exactly symmetric under player exchange.
double interp_role(const std::vector<double>& vals, const GridValue& gv,
                   int owner, const BlockHit& own, const BlockHit& fel,
                   bool& clamped) {
  clamped = own.d.clamped || own.v.clamped || fel.d.clamped || fel.v.clamped;
  double acc = 0.0;
  for (int a = 0; a < 2; ++a) {
    int oi = a ? own.d.i1 : own.d.i0;
    double wa = a ? own.d.w : 1.0 - own.d.w;
    for (int b = 0; b < 2; ++b) {
      int oj = b ? own.v.i1 : own.v.i0;
      double wab = wa * (b ? own.v.w : 1.0 - own.v.w);
      double inner = 0.0;
      for (int c = 0; c < 2; ++c) {
        int fi = c ? fel.d.i1 : fel.d.i0;
        double wc = c ? fel.d.w : 1.0 - fel.d.w;
        for (int d = 0; d < 2; ++d) {
          int fj = d ? fel.v.i1 : fel.v.i0;
          double wcd = wc * (d ? fel.v.w : 1.0 - fel.v.w);
          Eigen::Index idx = owner == 0 ? gv.index(oi, oj, fi, fj)
                                        : gv.index(fi, fj, oi, oj);
          inner += wcd * vals[idx];
        }
      }
      acc += wab * inner;
    }
  }
  return acc;
}

}  // namespace

GridValue dp_solve(const Game& game, std::pair<double, double> theta,
                   const DpAxes& axes, DpDiagnostics* diag) {
  if (game.name() != "intersection")
    throw std::invalid_argument("dp: only the intersection case is supported");

  GridValue gv;
  gv.axes = axes;
  gv.nd = static_cast<int>(std::floor((axes.d_hi - axes.d_lo) / axes.dx + 1e-9)) + 1;
  gv.nv = static_cast<int>(std::floor((axes.v_hi - axes.v_lo) / axes.dv + 1e-9)) + 1;
  gv.theta = theta;
  gv.game_hash = game.config_hash();

  const int nd = gv.nd, nv = gv.nv;
  const Eigen::Index total = static_cast<Eigen::Index>(nd) * nv * nd * nv;
  const double dt = axes.dt;
  const int steps = static_cast<int>(std::lround(game.horizon() / dt));

  const Vec uaxis = game.control_axes()[0];
  const int nu = static_cast<int>(uaxis.size());

  // Node coordinate tables.
  std::vector<double> ds(nd), vs(nv);
  for (int i = 0; i < nd; ++i) ds[i] = gv.d_at(i);
  for (int j = 0; j < nv; ++j) vs[j] = gv.v_at(j);

  std::vector<double> next[2], cur[2];
  for (int p = 0; p < 2; ++p) {
    next[p].assign(static_cast<std::size_t>(total), 0.0);
    cur[p].assign(static_cast<std::size_t>(total), 0.0);
  }

  // Terminal slice: reward boundary -g, then pin violations.
  {
    std::vector<double> gd1(static_cast<std::size_t>(nd) * nv);
    // terminal loss depends only on the player's own block
    for (int i = 0; i < nd; ++i)
      for (int j = 0; j < nv; ++j) {
        Vec xt(4);
        xt << ds[i], vs[j], ds[i], vs[j];
        gd1[static_cast<std::size_t>(i) * nv + j] = -game.terminal_loss(0, xt);
      }
    for (int i1 = 0; i1 < nd; ++i1)
      for (int j1 = 0; j1 < nv; ++j1)
        for (int i2 = 0; i2 < nd; ++i2)
          for (int j2 = 0; j2 < nv; ++j2) {
            Eigen::Index idx = gv.index(i1, j1, i2, j2);
            next[0][idx] = gd1[static_cast<std::size_t>(i1) * nv + j1];
            next[1][idx] = gd1[static_cast<std::size_t>(i2) * nv + j2];
          }
  }

  auto pin_slice = [&](std::vector<double>* slices) {
    for (int i1 = 0; i1 < nd; ++i1)
      for (int i2 = 0; i2 < nd; ++i2) {
        Vec xt(4);
        xt << ds[i1], 0.0, ds[i2], 0.0;
        bool viol0 = game.constraint(0, xt, theta.first) > 0.0;
        bool viol1 = game.constraint(1, xt, theta.second) > 0.0;
        if (!viol0 && !viol1) continue;
        for (int j1 = 0; j1 < nv; ++j1)
          for (int j2 = 0; j2 < nv; ++j2) {
            Eigen::Index idx = gv.index(i1, j1, i2, j2);
            if (viol0) slices[0][idx] = gv.unsafe_fill;
            if (viol1) slices[1][idx] = gv.unsafe_fill;
          }
      }
  };
  pin_slice(next);

  std::vector<long long> clamp_count(static_cast<std::size_t>(nd), 0);
  std::vector<long long> cycle_count(static_cast<std::size_t>(nd), 0);

  for (int step = 0; step < steps; ++step) {
    parallel_for(static_cast<std::size_t>(nd), [&](std::size_t i1u) {
      int i1 = static_cast<int>(i1u);
      long long clamps = 0, cycles = 0;
      Vec xn(4);
      std::vector<BlockHit> own_hits[2];
      own_hits[0].resize(static_cast<std::size_t>(nu));
      own_hits[1].resize(static_cast<std::size_t>(nu));
      double pen[2];
      double run_cost[2][32];
      for (int j1 = 0; j1 < nv; ++j1)
        for (int i2 = 0; i2 < nd; ++i2)
          for (int j2 = 0; j2 < nv; ++j2) {
            xn << ds[i1], vs[j1], ds[i2], vs[j2];
            // Foot-point corner data per player block and candidate control.
            for (int p = 0; p < 2; ++p) {
              double d_own = xn[2 * p], v_own = xn[2 * p + 1];
              AxisHit dh = locate(d_own + v_own * dt, axes.d_lo, axes.dx, nd);
              for (int k = 0; k < nu; ++k) {
                BlockHit& bh = own_hits[p][static_cast<std::size_t>(k)];
                bh.d = dh;
                bh.v = locate(v_own + uaxis[k] * dt, axes.v_lo, axes.dv, nv);
              }
              double th = p == 0 ? theta.first : theta.second;
              Vec uk = Vec::Zero(1);
              pen[p] = game.running_loss(p, xn, uk, th, true);
              for (int k = 0; k < nu; ++k) {
                uk[0] = uaxis[k];
                run_cost[p][k] =
                    -(game.running_loss(p, xn, uk, th, false) + pen[p]) * dt;
              }
            }

            // Jacobi best response from the first grid control.
            int u_cur[2] = {0, 0};
            int visited[21][2];
            double vis_val[21][2];
            int n_visited = 0;
            bool settled = false;
            double val_out[2] = {0, 0};
            for (int sweep = 0; sweep < 20; ++sweep) {
              int u_new[2];
              double best_val[2];
              for (int p = 0; p < 2; ++p) {
                const BlockHit& fel_hit =
                    own_hits[1 - p][static_cast<std::size_t>(u_cur[1 - p])];
                double best = -1e300;
                int besti = 0;
                for (int k = 0; k < nu; ++k) {
                  bool cl = false;
                  double cont = interp_role(
                      next[p], gv, p, own_hits[p][static_cast<std::size_t>(k)],
                      fel_hit, cl);
                  double val = run_cost[p][k] + cont;
                  if (val > best) {
                    best = val;
                    besti = k;
                  }
                }
                u_new[p] = besti;
                best_val[p] = best;
              }
              visited[n_visited][0] = u_new[0];
              visited[n_visited][1] = u_new[1];
              vis_val[n_visited][0] = best_val[0];
              vis_val[n_visited][1] = best_val[1];
              ++n_visited;
              if (u_new[0] == u_cur[0] && u_new[1] == u_cur[1]) {
                settled = true;
                val_out[0] = best_val[0];
                val_out[1] = best_val[1];
                break;
              }
              u_cur[0] = u_new[0];
              u_cur[1] = u_new[1];
            }
            if (!settled) {
              // Cycling: keep the visited pair with the best value sum.
              ++cycles;
              double best_sum = -1e300;
              for (int k = 0; k < n_visited; ++k) {
                double s = vis_val[k][0] + vis_val[k][1];
                if (s > best_sum) {
                  best_sum = s;
                  val_out[0] = vis_val[k][0];
                  val_out[1] = vis_val[k][1];
                }
              }
            }
            // Hull exits under the settled controls.
            for (int p = 0; p < 2; ++p) {
              const BlockHit& bh = own_hits[p][static_cast<std::size_t>(u_cur[p])];
              if (bh.d.clamped || bh.v.clamped) ++clamps;
            }
            Eigen::Index idx = gv.index(i1, j1, i2, j2);
            cur[0][idx] = val_out[0];
            cur[1][idx] = val_out[1];
          }
      clamp_count[i1u] += clamps;
      cycle_count[i1u] += cycles;
    });
    pin_slice(cur);
    std::swap(next[0], cur[0]);
    std::swap(next[1], cur[1]);
  }

  gv.value[0] = std::move(next[0]);
  gv.value[1] = std::move(next[1]);
  if (diag) {
    long long clamps = 0, cycles = 0;
    for (std::size_t i = 0; i < clamp_count.size(); ++i) {
      clamps += clamp_count[i];
      cycles += cycle_count[i];
    }
    diag->clamped_feet = static_cast<int>(std::min<long long>(clamps, 1 << 30));
    diag->cycling_nodes = static_cast<int>(std::min<long long>(cycles, 1 << 30));
  }
  return gv;
}

CompareStats compare_values(const GridValue& grid, int player,
                            const Mat& states, const Vec& values) {
  CompareStats st;
  for (Eigen::Index k = 0; k < states.cols(); ++k) {
    bool unsafe = false, outside = false;
    double v = grid.interpolate(player, states.col(k), unsafe, outside);
    if (outside) {
      ++st.skipped_outside;
      continue;
    }
    if (unsafe) {
      ++st.skipped_unsafe;
      continue;
    }
    double e = std::abs(v - values[k]);
    st.mae += e;
    st.max_err = std::max(st.max_err, e);
    ++st.used;
  }
  if (st.used) st.mae /= st.used;
  return st;
}

namespace {
constexpr char kGvMagic[4] = {'D', 'G', 'G', 'V'};
}

void GridValue::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("dp: cannot write " + path);
  out.write(kGvMagic, 4);
  std::uint32_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&axes), sizeof(DpAxes));
  out.write(reinterpret_cast<const char*>(&nd), 4);
  out.write(reinterpret_cast<const char*>(&nv), 4);
  out.write(reinterpret_cast<const char*>(&theta.first), 8);
  out.write(reinterpret_cast<const char*>(&theta.second), 8);
  out.write(reinterpret_cast<const char*>(&unsafe_fill), 8);
  out.write(reinterpret_cast<const char*>(&game_hash), 8);
  for (int p = 0; p < 2; ++p)
    out.write(reinterpret_cast<const char*>(value[p].data()),
              static_cast<std::streamsize>(value[p].size() * 8));
}

GridValue GridValue::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("dp: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kGvMagic, 4) != 0)
    throw std::runtime_error("dp: bad grid file");
  std::uint32_t version;
  in.read(reinterpret_cast<char*>(&version), 4);
  GridValue gv;
  in.read(reinterpret_cast<char*>(&gv.axes), sizeof(DpAxes));
  in.read(reinterpret_cast<char*>(&gv.nd), 4);
  in.read(reinterpret_cast<char*>(&gv.nv), 4);
  in.read(reinterpret_cast<char*>(&gv.theta.first), 8);
  in.read(reinterpret_cast<char*>(&gv.theta.second), 8);
  in.read(reinterpret_cast<char*>(&gv.unsafe_fill), 8);
  in.read(reinterpret_cast<char*>(&gv.game_hash), 8);
  Eigen::Index total = static_cast<Eigen::Index>(gv.nd) * gv.nv * gv.nd * gv.nv;
  for (int p = 0; p < 2; ++p) {
    gv.value[p].resize(static_cast<std::size_t>(total));
    in.read(reinterpret_cast<char*>(gv.value[p].data()), total * 8);
  }
  if (!in) throw std::runtime_error("dp: truncated grid file");
  return gv;
}

void GridValue::save_slice_csv(const std::string& path, double v1,
                               double v2) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("dp: cannot write " + path);
  out << "d1,d2,v_p1,v_p2,unsafe\n";
  for (int i1 = 0; i1 < nd; ++i1)
    for (int i2 = 0; i2 < nd; ++i2) {
      Vec x(4);
      x << d_at(i1), v1, d_at(i2), v2;
      bool unsafe = false, outside = false;
      double a = interpolate(0, x, unsafe, outside);
      bool u2 = false;
      double b = interpolate(1, x, u2, outside);
      out << format_double(d_at(i1)) << "," << format_double(d_at(i2)) << ","
          << format_double(a) << "," << format_double(b) << ","
          << ((unsafe || u2) ? 1 : 0) << "\n";
    }
}

}  // namespace dgame
