#include "dgame/game.hpp"

#include <cmath>
#include <stdexcept>

namespace dgame {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

void check_dim(const Vec& v, Eigen::Index n, const char* what) {
  if (v.size() != n)
    throw std::invalid_argument(std::string("game: bad dimension for ") + what +
                                ": got " + std::to_string(v.size()) +
                                ", want " + std::to_string(n));
}

void check_player(int player) {
  if (player != 0 && player != 1)
    throw std::invalid_argument("game: player index must be 0 or 1");
}

}  // namespace

std::vector<Vec> Game::control_axes() const {
  std::vector<Vec> axes;
  Vec lo = control_lo(), hi = control_hi();
  for (Eigen::Index a = 0; a < lo.size(); ++a)
    axes.push_back(linspace(lo[a], hi[a], 16));
  return axes;
}

std::vector<Vec> Game::warm_start_controls() const {
  Vec lo = control_lo(), hi = control_hi();
  Vec mid = 0.5 * (lo + hi);
  Vec brake = mid, push = mid;
  brake[brake.size() - 1] = lo[lo.size() - 1];
  push[push.size() - 1] = hi[hi.size() - 1];
  return {brake, push};
}

Vec Game::stack_controls(const Vec& u1, const Vec& u2) const {
  const int m = control_dim();
  Vec u(2 * m);
  u.head(m) = u1;
  u.tail(m) = u2;
  return u;
}

Vec Game::player_control(const Vec& u_joint, int player) const {
  check_player(player);
  return u_joint.segment(player * control_dim(), control_dim());
}

Vec Game::player_state(const Vec& x_joint, int player) const {
  check_player(player);
  return x_joint.segment(player * state_dim(), state_dim());
}

Mat control_grid_product(const std::vector<Vec>& axes) {
  Eigen::Index m = static_cast<Eigen::Index>(axes.size());
  Eigen::Index total = 1;
  for (const auto& a : axes) total *= a.size();
  Mat grid(m, total);
  for (Eigen::Index k = 0; k < total; ++k) {
    Eigen::Index rem = k;
    for (Eigen::Index a = 0; a < m; ++a) {
      Eigen::Index na = axes[static_cast<std::size_t>(a)].size();
      grid(a, k) = axes[static_cast<std::size_t>(a)][rem % na];
      rem /= na;
    }
  }
  return grid;
}

std::string type_label(double theta) {
  return theta == kTypeAggressive ? "a" : "na";
}

double type_from_label(const std::string& label) {
  if (label == "a") return kTypeAggressive;
  if (label == "na") return kTypeNonAggressive;
  throw std::invalid_argument("game: unknown type label " + label);
}

// ---------------------------------------------------------------------------
// Case 1: uncontrolled intersection. Per-player state (d, v), scalar
// acceleration control, double-integrator dynamics.
// ---------------------------------------------------------------------------

struct IntersectionParams {
  double road_length = 70.0;  // R
  double car_width = 1.5;     // W
  double car_length = 3.0;    // L
  double horizon = 3.0;
  double mu = 1e-6;
  double v_nominal = 18.0;
  double penalty_gain = 1e4;   // b
  double penalty_shape = 5.0;  // gamma
  double u_min = -5.0, u_max = 10.0;
  double gt_lo_d = 15.0, gt_hi_d = 20.0, gt_lo_v = 18.0, gt_hi_v = 25.0;
  double xp_lo_d = 15.0, xp_hi_d = 30.0;
  double hj_lo_d = 15.0, hj_hi_d = 105.0, hj_lo_v = 15.0, hj_hi_v = 32.0;
  double z_lo = -1.05e-4, z_hi = 300.0;
  double value_scale = 100.0;
};

class IntersectionGame final : public Game {
 public:
  explicit IntersectionGame(const IntersectionParams& p) : p_(p) {
    if (p_.u_min >= p_.u_max || p_.horizon <= 0 || p_.penalty_gain <= 0 ||
        p_.penalty_shape <= 0)
      throw std::invalid_argument("intersection: invalid parameters");
  }

  std::string name() const override { return "intersection"; }
  int state_dim() const override { return 2; }
  int control_dim() const override { return 1; }
  double horizon() const override { return p_.horizon; }
  Vec control_lo() const override { return Vec::Constant(1, p_.u_min); }
  Vec control_hi() const override { return Vec::Constant(1, p_.u_max); }
  std::vector<double> type_set() const override {
    return {kTypeAggressive, kTypeNonAggressive};
  }

  Vec dynamics(const Vec& x, const Vec& u) const override {
    check_dim(x, 4, "state");
    check_dim(u, 2, "control");
    Vec dx(4);
    dx << x[1], u[0], x[3], u[1];
    return dx;
  }

  Mat dynamics_jacobian_x(const Vec& x, const Vec&) const override {
    check_dim(x, 4, "state");
    Mat J = Mat::Zero(4, 4);
    J(0, 1) = 1.0;
    J(2, 3) = 1.0;
    return J;
  }

  double running_loss(int player, const Vec& x, const Vec& u_i, double theta_i,
                      bool penalized) const override {
    check_player(player);
    check_dim(u_i, 1, "own control");
    double l = u_i[0] * u_i[0];
    if (!penalized) return l;
    check_dim(x, 4, "state");
    double d_own = x[player * 2];
    double d_other = x[(1 - player) * 2];
    return l + p_.penalty_gain * soft_zone(d_own, theta_i) *
                   soft_zone(d_other, kTypeAggressive);
  }

  Vec running_loss_grad_x(int player, const Vec& x, const Vec&, double theta_i,
                          bool penalized) const override {
    check_player(player);
    check_dim(x, 4, "state");
    Vec g = Vec::Zero(4);
    if (!penalized) return g;
    double d_own = x[player * 2];
    double d_other = x[(1 - player) * 2];
    double s_own = soft_zone(d_own, theta_i);
    double s_other = soft_zone(d_other, kTypeAggressive);
    g[player * 2] = p_.penalty_gain * soft_zone_deriv(d_own, theta_i) * s_other;
    g[(1 - player) * 2] =
        p_.penalty_gain * s_own * soft_zone_deriv(d_other, kTypeAggressive);
    return g;
  }

  double terminal_loss(int player, const Vec& x) const override {
    check_player(player);
    check_dim(x, 4, "state");
    double d = x[player * 2], v = x[player * 2 + 1];
    double dv = v - p_.v_nominal;
    return -p_.mu * d + dv * dv;
  }

  Vec terminal_loss_grad_x(int player, const Vec& x) const override {
    check_player(player);
    check_dim(x, 4, "state");
    Vec g = Vec::Zero(4);
    g[player * 2] = -p_.mu;
    g[player * 2 + 1] = 2.0 * (x[player * 2 + 1] - p_.v_nominal);
    return g;
  }

  double constraint(int player, const Vec& x, double theta_i) const override {
    check_player(player);
    check_dim(x, 4, "state");
    double d_own = x[player * 2];
    double d_other = x[(1 - player) * 2];
    return in_zone(d_own, theta_i) * in_zone(d_other, kTypeAggressive);
  }

  Vec argmax_control(int player, const Vec&, const Vec& lambda_i,
                     double) const override {
    check_player(player);
    check_dim(lambda_i, 4, "costate");
    // H = lambda_d v + lambda_v u - u^2 + fellow terms; stationary at
    // u = lambda_v / 2.
    double lv = lambda_i[player * 2 + 1];
    return Vec::Constant(1, clamp(0.5 * lv, p_.u_min, p_.u_max));
  }

  void gt_box(int player, Vec& lo, Vec& hi) const override {
    check_player(player);
    lo = Vec(2), hi = Vec(2);
    lo << p_.gt_lo_d, p_.gt_lo_v;
    hi << p_.gt_hi_d, p_.gt_hi_v;
  }

  void hj_box(int player, Vec& lo, Vec& hi) const override {
    check_player(player);
    lo = Vec(2), hi = Vec(2);
    lo << p_.hj_lo_d, p_.hj_lo_v;
    hi << p_.hj_hi_d, p_.hj_hi_v;
  }

  void xp_box(Vec& lo, Vec& hi) const {
    lo = Vec(2), hi = Vec(2);
    lo << p_.xp_lo_d, p_.gt_lo_v;
    hi << p_.xp_hi_d, p_.gt_hi_v;
  }

  void z_range(double& lo, double& hi) const override {
    lo = p_.z_lo;
    hi = p_.z_hi;
  }

  double value_scale() const override { return p_.value_scale; }

  std::vector<Vec> control_axes() const override {
    // Integer accelerations, shared with the belief engine.
    std::vector<Vec> axes(1);
    axes[0] = linspace(p_.u_min, p_.u_max, 16);
    return axes;
  }

  Config to_config() const override {
    Config c;
    c.set_string("game.case", "intersection");
    c.set_double("game.horizon", p_.horizon);
    c.set_double("game.mu", p_.mu);
    c.set_double("game.v_nominal", p_.v_nominal);
    c.set_double("game.penalty_gain", p_.penalty_gain);
    c.set_double("game.penalty_shape", p_.penalty_shape);
    c.set_double("game.u_min", p_.u_min);
    c.set_double("game.u_max", p_.u_max);
    c.set_double("game.geometry.road_length", p_.road_length);
    c.set_double("game.geometry.car_width", p_.car_width);
    c.set_double("game.geometry.car_length", p_.car_length);
    c.set_double("game.domain.gt_lo_d", p_.gt_lo_d);
    c.set_double("game.domain.gt_hi_d", p_.gt_hi_d);
    c.set_double("game.domain.gt_lo_v", p_.gt_lo_v);
    c.set_double("game.domain.gt_hi_v", p_.gt_hi_v);
    c.set_double("game.domain.xp_lo_d", p_.xp_lo_d);
    c.set_double("game.domain.xp_hi_d", p_.xp_hi_d);
    c.set_double("game.domain.hj_lo_d", p_.hj_lo_d);
    c.set_double("game.domain.hj_hi_d", p_.hj_hi_d);
    c.set_double("game.domain.hj_lo_v", p_.hj_lo_v);
    c.set_double("game.domain.hj_hi_v", p_.hj_hi_v);
    c.set_double("game.z_lo", p_.z_lo);
    c.set_double("game.z_hi", p_.z_hi);
    c.set_double("game.value_scale", p_.value_scale);
    return c;
  }

  // Collision zone along the road for a player of type theta:
  // [R/2 - theta*W/2, (R+W)/2 + L].
  double zone_lo(double theta) const {
    return 0.5 * p_.road_length - 0.5 * theta * p_.car_width;
  }
  double zone_hi() const {
    return 0.5 * (p_.road_length + p_.car_width) + p_.car_length;
  }

  double in_zone(double d, double theta) const {
    return (d >= zone_lo(theta) && d <= zone_hi()) ? 1.0 : 0.0;
  }

  double soft_zone(double d, double theta) const {
    double g = p_.penalty_shape;
    return sigmoid(g * (d - zone_lo(theta))) * sigmoid(-g * (d - zone_hi()));
  }

  double soft_zone_deriv(double d, double theta) const {
    double g = p_.penalty_shape;
    double sa = sigmoid(g * (d - zone_lo(theta)));
    double sb = sigmoid(-g * (d - zone_hi()));
    return g * sa * sb * (sb - sa);
  }

  const IntersectionParams& params() const { return p_; }

 private:
  IntersectionParams p_;
};

// ---------------------------------------------------------------------------
// Cases 2 and 3: unicycle players on a road. Per-player state
// (px, py, psi, v), controls (omega, accel). Case 2 has the players driving
// toward each other (mirrored x for the distance), case 3 has them changing
// lanes side by side.
// ---------------------------------------------------------------------------

struct UnicycleParams {
  bool mirrored = true;  // case 2; false for case 3
  double horizon = 3.0;
  double k_omega = 100.0;
  double mu = 1e-6;
  double v_nominal = 18.0;
  double eta = 1.5;
  double road_length = 70.0;  // R, only used when mirrored
  double penalty_gain = 1e4;
  double penalty_shape = 5.0;
  double kappa = 100.0;     // heading weight, case 3 terminal loss
  double psi_nominal = 0.0;
  // Terminal lane centers; case 2 uses py_nominal[0] for both players.
  double py_nominal[2] = {3.0, 3.0};
  bool lane_terms = false;  // case 3 adds the heading term
  double omega_min = -1.0, omega_max = 1.0;
  double u_min = -5.0, u_max = 10.0;
  Vec gt_lo[2], gt_hi[2], hj_lo[2], hj_hi[2];
  double z_lo = -9e-5, z_hi = 300.0;
  double value_scale = 100.0;
  std::string name = "narrow_road";
};

class UnicycleGame final : public Game {
 public:
  explicit UnicycleGame(const UnicycleParams& p) : p_(p) {
    if (p_.horizon <= 0) throw std::invalid_argument("unicycle: bad horizon");
  }

  std::string name() const override { return p_.name; }
  int state_dim() const override { return 4; }
  int control_dim() const override { return 2; }
  double horizon() const override { return p_.horizon; }
  Vec control_lo() const override {
    Vec lo(2);
    lo << p_.omega_min, p_.u_min;
    return lo;
  }
  Vec control_hi() const override {
    Vec hi(2);
    hi << p_.omega_max, p_.u_max;
    return hi;
  }
  std::vector<double> type_set() const override { return {kTypeAggressive}; }

  Vec dynamics(const Vec& x, const Vec& u) const override {
    check_dim(x, 8, "state");
    check_dim(u, 4, "control");
    Vec dx(8);
    for (int i = 0; i < 2; ++i) {
      double psi = x[4 * i + 2], v = x[4 * i + 3];
      dx[4 * i + 0] = v * std::cos(psi);
      dx[4 * i + 1] = v * std::sin(psi);
      dx[4 * i + 2] = u[2 * i + 0];
      dx[4 * i + 3] = u[2 * i + 1];
    }
    return dx;
  }

  Mat dynamics_jacobian_x(const Vec& x, const Vec&) const override {
    check_dim(x, 8, "state");
    Mat J = Mat::Zero(8, 8);
    for (int i = 0; i < 2; ++i) {
      double psi = x[4 * i + 2], v = x[4 * i + 3];
      J(4 * i + 0, 4 * i + 2) = -v * std::sin(psi);
      J(4 * i + 0, 4 * i + 3) = std::cos(psi);
      J(4 * i + 1, 4 * i + 2) = v * std::cos(psi);
      J(4 * i + 1, 4 * i + 3) = std::sin(psi);
    }
    return J;
  }

  double running_loss(int player, const Vec& x, const Vec& u_i, double,
                      bool penalized) const override {
    check_player(player);
    check_dim(u_i, 2, "own control");
    double l = p_.k_omega * u_i[0] * u_i[0] + u_i[1] * u_i[1];
    if (!penalized) return l;
    check_dim(x, 8, "state");
    return l + p_.penalty_gain * sigmoid(p_.penalty_shape * separation(x));
  }

  Vec running_loss_grad_x(int player, const Vec& x, const Vec&, double,
                          bool penalized) const override {
    check_player(player);
    check_dim(x, 8, "state");
    Vec g = Vec::Zero(8);
    if (!penalized) return g;
    double s = sigmoid(p_.penalty_shape * separation(x));
    double w = p_.penalty_gain * p_.penalty_shape * s * (1.0 - s);
    add_separation_grad(x, w, g);
    return g;
  }

  double terminal_loss(int player, const Vec& x) const override {
    check_player(player);
    check_dim(x, 8, "state");
    double px = x[4 * player], py = x[4 * player + 1];
    double psi = x[4 * player + 2], v = x[4 * player + 3];
    double loss = -p_.mu * px + (v - p_.v_nominal) * (v - p_.v_nominal) +
                  (py - p_.py_nominal[player]) * (py - p_.py_nominal[player]);
    if (p_.lane_terms)
      loss += p_.kappa * (psi - p_.psi_nominal) * (psi - p_.psi_nominal);
    return loss;
  }

  Vec terminal_loss_grad_x(int player, const Vec& x) const override {
    check_player(player);
    check_dim(x, 8, "state");
    Vec g = Vec::Zero(8);
    g[4 * player + 0] = -p_.mu;
    g[4 * player + 1] = 2.0 * (x[4 * player + 1] - p_.py_nominal[player]);
    g[4 * player + 3] = 2.0 * (x[4 * player + 3] - p_.v_nominal);
    if (p_.lane_terms)
      g[4 * player + 2] = 2.0 * p_.kappa * (x[4 * player + 2] - p_.psi_nominal);
    return g;
  }

  double constraint(int player, const Vec& x, double) const override {
    check_player(player);
    check_dim(x, 8, "state");
    return separation(x);
  }

  Vec argmax_control(int player, const Vec&, const Vec& lambda_i,
                     double) const override {
    check_player(player);
    check_dim(lambda_i, 8, "costate");
    double lpsi = lambda_i[4 * player + 2];
    double lv = lambda_i[4 * player + 3];
    Vec u(2);
    u[0] = clamp(lpsi / (2.0 * p_.k_omega), p_.omega_min, p_.omega_max);
    u[1] = clamp(0.5 * lv, p_.u_min, p_.u_max);
    return u;
  }

  void gt_box(int player, Vec& lo, Vec& hi) const override {
    check_player(player);
    lo = p_.gt_lo[player];
    hi = p_.gt_hi[player];
  }

  void hj_box(int player, Vec& lo, Vec& hi) const override {
    check_player(player);
    lo = p_.hj_lo[player];
    hi = p_.hj_hi[player];
  }

  void z_range(double& lo, double& hi) const override {
    lo = p_.z_lo;
    hi = p_.z_hi;
  }

  double value_scale() const override { return p_.value_scale; }
  double constraint_scale() const override { return 10.0; }

  Config to_config() const override {
    Config c;
    c.set_string("game.case", p_.name);
    c.set_double("game.horizon", p_.horizon);
    c.set_double("game.k_omega", p_.k_omega);
    c.set_double("game.mu", p_.mu);
    c.set_double("game.v_nominal", p_.v_nominal);
    c.set_double("game.eta", p_.eta);
    c.set_double("game.road_length", p_.road_length);
    c.set_double("game.penalty_gain", p_.penalty_gain);
    c.set_double("game.penalty_shape", p_.penalty_shape);
    c.set_double("game.kappa", p_.kappa);
    c.set_double("game.py_nominal_1", p_.py_nominal[0]);
    c.set_double("game.py_nominal_2", p_.py_nominal[1]);
    c.set_double("game.omega_min", p_.omega_min);
    c.set_double("game.omega_max", p_.omega_max);
    c.set_double("game.u_min", p_.u_min);
    c.set_double("game.u_max", p_.u_max);
    for (int i = 0; i < 2; ++i) {
      std::string pfx = "game.domain.p" + std::to_string(i + 1);
      c.set_vec(pfx + ".gt_lo", p_.gt_lo[i]);
      c.set_vec(pfx + ".gt_hi", p_.gt_hi[i]);
      c.set_vec(pfx + ".hj_lo", p_.hj_lo[i]);
      c.set_vec(pfx + ".hj_hi", p_.hj_hi[i]);
    }
    c.set_double("game.z_lo", p_.z_lo);
    c.set_double("game.z_hi", p_.z_hi);
    c.set_double("game.value_scale", p_.value_scale);
    return c;
  }

  const UnicycleParams& params() const { return p_; }

 private:
  // eta minus the inter-player distance; shared by both players.
  double separation(const Vec& x) const {
    double ex = p_.mirrored ? (p_.road_length - x[4]) - x[0] : x[4] - x[0];
    double ey = x[5] - x[1];
    return p_.eta - std::sqrt(ex * ex + ey * ey);
  }

  // Adds w * d(separation)/dx into g.
  void add_separation_grad(const Vec& x, double w, Vec& g) const {
    double ex = p_.mirrored ? (p_.road_length - x[4]) - x[0] : x[4] - x[0];
    double ey = x[5] - x[1];
    double dist = std::sqrt(ex * ex + ey * ey);
    if (dist < 1e-12) return;  // kink at coincident positions
    double s = w / dist;
    if (p_.mirrored) {
      g[0] += s * ex;
      g[4] += s * ex;
    } else {
      g[0] += s * ex;
      g[4] += -s * ex;
    }
    g[1] += s * ey;
    g[5] += -s * ey;
  }

  UnicycleParams p_;
};

// ---------------------------------------------------------------------------
// Case 4: two drones in the near-hover regime at zero yaw. Per-player state
// (px, py, pz, vx, vy, vz), controls (roll, pitch, thrust).
// ---------------------------------------------------------------------------

struct DroneParams {
  double horizon = 4.0;
  double gravity = 9.81;
  double k_roll = 100.0;   // k_theta
  double k_pitch = 100.0;  // k_phi
  double mu = 1e-6;
  double eta = 0.9;
  double rx = 5.0, ry = 5.0;
  double penalty_gain = 1e4;
  double penalty_shape = 5.0;
  double roll_min = -0.05, roll_max = 0.05;
  double pitch_min = -0.05, pitch_max = 0.05;
  double thrust_min = 7.81, thrust_max = 11.81;
  Vec gt_lo, gt_hi, hj_lo, hj_hi;
  double z_lo = -2e-4, z_hi = 400.0;
  double value_scale = 100.0;
};

class DroneGame final : public Game {
 public:
  explicit DroneGame(const DroneParams& p) : p_(p) {}

  std::string name() const override { return "drone"; }
  int state_dim() const override { return 6; }
  int control_dim() const override { return 3; }
  double horizon() const override { return p_.horizon; }
  Vec control_lo() const override {
    Vec lo(3);
    lo << p_.roll_min, p_.pitch_min, p_.thrust_min;
    return lo;
  }
  Vec control_hi() const override {
    Vec hi(3);
    hi << p_.roll_max, p_.pitch_max, p_.thrust_max;
    return hi;
  }
  std::vector<double> type_set() const override { return {kTypeAggressive}; }

  Vec dynamics(const Vec& x, const Vec& u) const override {
    check_dim(x, 12, "state");
    check_dim(u, 6, "control");
    Vec dx(12);
    for (int i = 0; i < 2; ++i) {
      dx.segment(6 * i, 3) = x.segment(6 * i + 3, 3);
      dx[6 * i + 3] = p_.gravity * std::tan(u[3 * i + 0]);
      dx[6 * i + 4] = -p_.gravity * std::tan(u[3 * i + 1]);
      dx[6 * i + 5] = u[3 * i + 2] - p_.gravity;
    }
    return dx;
  }

  Mat dynamics_jacobian_x(const Vec& x, const Vec&) const override {
    check_dim(x, 12, "state");
    Mat J = Mat::Zero(12, 12);
    for (int i = 0; i < 2; ++i)
      for (int a = 0; a < 3; ++a) J(6 * i + a, 6 * i + 3 + a) = 1.0;
    return J;
  }

  double running_loss(int player, const Vec& x, const Vec& u_i, double,
                      bool penalized) const override {
    check_player(player);
    check_dim(u_i, 3, "own control");
    double tr = std::tan(u_i[0]), tp = std::tan(u_i[1]);
    double dt = u_i[2] - p_.gravity;
    double l = p_.k_roll * tr * tr + p_.k_pitch * tp * tp + dt * dt;
    if (!penalized) return l;
    check_dim(x, 12, "state");
    return l + p_.penalty_gain * sigmoid(p_.penalty_shape * separation(x));
  }

  Vec running_loss_grad_x(int player, const Vec& x, const Vec&, double,
                          bool penalized) const override {
    check_player(player);
    check_dim(x, 12, "state");
    Vec g = Vec::Zero(12);
    if (!penalized) return g;
    double s = sigmoid(p_.penalty_shape * separation(x));
    double w = p_.penalty_gain * p_.penalty_shape * s * (1.0 - s);
    double ex = (p_.rx - x[6]) - x[0];
    double ey = (p_.ry - x[7]) - x[1];
    double ez = x[8] - x[2];
    double dist = std::sqrt(ex * ex + ey * ey + ez * ez);
    if (dist < 1e-12) return g;
    double c = w / dist;
    g[0] += c * ex;
    g[6] += c * ex;
    g[1] += c * ey;
    g[7] += c * ey;
    g[2] += c * ez;
    g[8] += -c * ez;
    return g;
  }

  double terminal_loss(int player, const Vec& x) const override {
    check_player(player);
    check_dim(x, 12, "state");
    auto xi = x.segment(6 * player, 6);
    return -p_.mu * xi[0] - p_.mu * xi[1] + xi[2] * xi[2] + xi[3] * xi[3] +
           xi[4] * xi[4] + xi[5] * xi[5];
  }

  Vec terminal_loss_grad_x(int player, const Vec& x) const override {
    check_player(player);
    check_dim(x, 12, "state");
    Vec g = Vec::Zero(12);
    g[6 * player + 0] = -p_.mu;
    g[6 * player + 1] = -p_.mu;
    for (int a = 2; a < 6; ++a) g[6 * player + a] = 2.0 * x[6 * player + a];
    return g;
  }

  double constraint(int player, const Vec& x, double) const override {
    check_player(player);
    check_dim(x, 12, "state");
    return separation(x);
  }

  Vec argmax_control(int player, const Vec&, const Vec& lambda_i,
                     double) const override {
    check_player(player);
    check_dim(lambda_i, 12, "costate");
    double lvx = lambda_i[6 * player + 3];
    double lvy = lambda_i[6 * player + 4];
    double lvz = lambda_i[6 * player + 5];
    Vec u(3);
    // H is quadratic in tan(roll), tan(pitch) and (thrust - g); atan is
    // monotone so clamping the angle is equivalent to clamping the tangent.
    u[0] = clamp(std::atan(lvx * p_.gravity / (2.0 * p_.k_roll)), p_.roll_min,
                 p_.roll_max);
    u[1] = clamp(std::atan(-lvy * p_.gravity / (2.0 * p_.k_pitch)),
                 p_.pitch_min, p_.pitch_max);
    u[2] = clamp(p_.gravity + 0.5 * lvz, p_.thrust_min, p_.thrust_max);
    return u;
  }

  void gt_box(int player, Vec& lo, Vec& hi) const override {
    check_player(player);
    lo = p_.gt_lo;
    hi = p_.gt_hi;
  }

  void hj_box(int player, Vec& lo, Vec& hi) const override {
    check_player(player);
    lo = p_.hj_lo;
    hi = p_.hj_hi;
  }

  void z_range(double& lo, double& hi) const override {
    lo = p_.z_lo;
    hi = p_.z_hi;
  }

  double value_scale() const override { return p_.value_scale; }
  double constraint_scale() const override { return 10.0; }

  Config to_config() const override {
    Config c;
    c.set_string("game.case", "drone");
    c.set_double("game.horizon", p_.horizon);
    c.set_double("game.gravity", p_.gravity);
    c.set_double("game.k_roll", p_.k_roll);
    c.set_double("game.k_pitch", p_.k_pitch);
    c.set_double("game.mu", p_.mu);
    c.set_double("game.eta", p_.eta);
    c.set_double("game.rx", p_.rx);
    c.set_double("game.ry", p_.ry);
    c.set_double("game.penalty_gain", p_.penalty_gain);
    c.set_double("game.penalty_shape", p_.penalty_shape);
    c.set_vec("game.domain.gt_lo", p_.gt_lo);
    c.set_vec("game.domain.gt_hi", p_.gt_hi);
    c.set_vec("game.domain.hj_lo", p_.hj_lo);
    c.set_vec("game.domain.hj_hi", p_.hj_hi);
    c.set_double("game.z_lo", p_.z_lo);
    c.set_double("game.z_hi", p_.z_hi);
    c.set_double("game.value_scale", p_.value_scale);
    return c;
  }

 private:
  double separation(const Vec& x) const {
    double ex = (p_.rx - x[6]) - x[0];
    double ey = (p_.ry - x[7]) - x[1];
    double ez = x[8] - x[2];
    return p_.eta - std::sqrt(ex * ex + ey * ey + ez * ez);
  }

  DroneParams p_;
};

// ---------------------------------------------------------------------------
// Factory
// ---------------------------------------------------------------------------

namespace {

Vec vec4(double a, double b, double c, double d) {
  Vec v(4);
  v << a, b, c, d;
  return v;
}

Vec vec6(double a, double b, double c, double d, double e, double f) {
  Vec v(6);
  v << a, b, c, d, e, f;
  return v;
}

UnicycleParams narrow_road_defaults() {
  UnicycleParams p;
  p.mirrored = true;
  p.name = "narrow_road";
  p.horizon = 3.0;
  p.py_nominal[0] = p.py_nominal[1] = 3.0;
  p.lane_terms = false;
  const double deg = M_PI / 180.0;
  for (int i = 0; i < 2; ++i) {
    p.gt_lo[i] = vec4(15.0, 2.25, -deg, 18.0);
    p.gt_hi[i] = vec4(20.0, 3.75, deg, 25.0);
    p.hj_lo[i] = vec4(15.0, 0.0, -0.15, 18.0);
    p.hj_hi[i] = vec4(90.0, 6.0, 0.18, 25.0);
  }
  p.z_lo = -9e-5;
  p.z_hi = 300.0;
  return p;
}

UnicycleParams lane_change_defaults() {
  UnicycleParams p;
  p.mirrored = false;
  p.name = "lane_change";
  p.horizon = 4.0;
  p.py_nominal[0] = 6.0;
  p.py_nominal[1] = 2.0;
  p.lane_terms = true;
  const double deg = M_PI / 180.0;
  p.gt_lo[0] = vec4(0.0, 1.25, -deg, 18.0);
  p.gt_hi[0] = vec4(3.0, 2.75, deg, 25.0);
  p.gt_lo[1] = vec4(0.0, 5.25, -deg, 18.0);
  p.gt_hi[1] = vec4(3.0, 6.75, deg, 25.0);
  p.hj_lo[0] = vec4(0.0, 0.0, -0.15, 17.0);
  p.hj_hi[0] = vec4(95.0, 6.0, 0.13, 26.0);
  p.hj_lo[1] = vec4(0.0, 2.0, -0.13, 17.0);
  p.hj_hi[1] = vec4(95.0, 8.0, 0.15, 26.0);
  p.z_lo = -9.5e-5;
  p.z_hi = 400.0;
  return p;
}

DroneParams drone_defaults() {
  DroneParams p;
  p.gt_lo = vec6(0.0, 0.0, -0.1, 2.0, 2.0, 0.0);
  p.gt_hi = vec6(1.0, 1.0, 0.1, 4.0, 4.0, 0.1);
  p.hj_lo = vec6(0.0, 0.0, -1.8, 0.3, 0.3, -1.8);
  p.hj_hi = vec6(15.5, 15.5, 2.0, 4.5, 4.5, 1.8);
  return p;
}

}  // namespace

std::unique_ptr<Game> make_game(const Config& cfg) {
  std::string which = cfg.get_string("game.case");
  if (which == "intersection") {
    IntersectionParams p;
    p.road_length = cfg.get_double("game.geometry.road_length", p.road_length);
    p.car_width = cfg.get_double("game.geometry.car_width", p.car_width);
    p.car_length = cfg.get_double("game.geometry.car_length", p.car_length);
    p.horizon = cfg.get_double("game.horizon", p.horizon);
    p.mu = cfg.get_double("game.mu", p.mu);
    p.v_nominal = cfg.get_double("game.v_nominal", p.v_nominal);
    p.penalty_gain = cfg.get_double("game.penalty_gain", p.penalty_gain);
    p.penalty_shape = cfg.get_double("game.penalty_shape", p.penalty_shape);
    p.u_min = cfg.get_double("game.u_min", p.u_min);
    p.u_max = cfg.get_double("game.u_max", p.u_max);
    p.gt_lo_d = cfg.get_double("game.domain.gt_lo_d", p.gt_lo_d);
    p.gt_hi_d = cfg.get_double("game.domain.gt_hi_d", p.gt_hi_d);
    p.gt_lo_v = cfg.get_double("game.domain.gt_lo_v", p.gt_lo_v);
    p.gt_hi_v = cfg.get_double("game.domain.gt_hi_v", p.gt_hi_v);
    p.xp_lo_d = cfg.get_double("game.domain.xp_lo_d", p.xp_lo_d);
    p.xp_hi_d = cfg.get_double("game.domain.xp_hi_d", p.xp_hi_d);
    p.hj_lo_d = cfg.get_double("game.domain.hj_lo_d", p.hj_lo_d);
    p.hj_hi_d = cfg.get_double("game.domain.hj_hi_d", p.hj_hi_d);
    p.hj_lo_v = cfg.get_double("game.domain.hj_lo_v", p.hj_lo_v);
    p.hj_hi_v = cfg.get_double("game.domain.hj_hi_v", p.hj_hi_v);
    p.z_lo = cfg.get_double("game.z_lo", p.z_lo);
    p.z_hi = cfg.get_double("game.z_hi", p.z_hi);
    p.value_scale = cfg.get_double("game.value_scale", p.value_scale);
    return std::make_unique<IntersectionGame>(p);
  }
  if (which == "narrow_road" || which == "lane_change") {
    UnicycleParams p =
        which == "narrow_road" ? narrow_road_defaults() : lane_change_defaults();
    p.horizon = cfg.get_double("game.horizon", p.horizon);
    p.k_omega = cfg.get_double("game.k_omega", p.k_omega);
    p.mu = cfg.get_double("game.mu", p.mu);
    p.v_nominal = cfg.get_double("game.v_nominal", p.v_nominal);
    p.eta = cfg.get_double("game.eta", p.eta);
    p.road_length = cfg.get_double("game.road_length", p.road_length);
    p.penalty_gain = cfg.get_double("game.penalty_gain", p.penalty_gain);
    p.penalty_shape = cfg.get_double("game.penalty_shape", p.penalty_shape);
    p.kappa = cfg.get_double("game.kappa", p.kappa);
    p.py_nominal[0] = cfg.get_double("game.py_nominal_1", p.py_nominal[0]);
    p.py_nominal[1] = cfg.get_double("game.py_nominal_2", p.py_nominal[1]);
    for (int i = 0; i < 2; ++i) {
      std::string pfx = "game.domain.p" + std::to_string(i + 1);
      if (cfg.has(pfx + ".gt_lo")) p.gt_lo[i] = cfg.get_vec(pfx + ".gt_lo");
      if (cfg.has(pfx + ".gt_hi")) p.gt_hi[i] = cfg.get_vec(pfx + ".gt_hi");
      if (cfg.has(pfx + ".hj_lo")) p.hj_lo[i] = cfg.get_vec(pfx + ".hj_lo");
      if (cfg.has(pfx + ".hj_hi")) p.hj_hi[i] = cfg.get_vec(pfx + ".hj_hi");
    }
    p.z_lo = cfg.get_double("game.z_lo", p.z_lo);
    p.z_hi = cfg.get_double("game.z_hi", p.z_hi);
    p.value_scale = cfg.get_double("game.value_scale", p.value_scale);
    return std::make_unique<UnicycleGame>(p);
  }
  if (which == "drone") {
    DroneParams p = drone_defaults();
    p.horizon = cfg.get_double("game.horizon", p.horizon);
    p.gravity = cfg.get_double("game.gravity", p.gravity);
    p.k_roll = cfg.get_double("game.k_roll", p.k_roll);
    p.k_pitch = cfg.get_double("game.k_pitch", p.k_pitch);
    p.mu = cfg.get_double("game.mu", p.mu);
    p.eta = cfg.get_double("game.eta", p.eta);
    p.rx = cfg.get_double("game.rx", p.rx);
    p.ry = cfg.get_double("game.ry", p.ry);
    p.penalty_gain = cfg.get_double("game.penalty_gain", p.penalty_gain);
    p.penalty_shape = cfg.get_double("game.penalty_shape", p.penalty_shape);
    if (cfg.has("game.domain.gt_lo")) p.gt_lo = cfg.get_vec("game.domain.gt_lo");
    if (cfg.has("game.domain.gt_hi")) p.gt_hi = cfg.get_vec("game.domain.gt_hi");
    if (cfg.has("game.domain.hj_lo")) p.hj_lo = cfg.get_vec("game.domain.hj_lo");
    if (cfg.has("game.domain.hj_hi")) p.hj_hi = cfg.get_vec("game.domain.hj_hi");
    p.z_lo = cfg.get_double("game.z_lo", p.z_lo);
    p.z_hi = cfg.get_double("game.z_hi", p.z_hi);
    p.value_scale = cfg.get_double("game.value_scale", p.value_scale);
    return std::make_unique<DroneGame>(p);
  }
  throw std::invalid_argument("game: unknown case " + which);
}

std::unique_ptr<Game> make_game_by_name(const std::string& name) {
  Config cfg;
  cfg.set_string("game.case", name);
  return make_game(cfg);
}

}  // namespace dgame
