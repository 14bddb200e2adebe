#include "dgame/net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dgame {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

struct ActFns {
  Activation kind;
  double freq;  // sin frequency for this layer, 1 elsewhere

  double f(double u) const {
    switch (kind) {
      case Activation::Tanh: return std::tanh(u);
      case Activation::Relu: return u > 0 ? u : 0.0;
      case Activation::Sin:  return std::sin(freq * u);
      case Activation::Gelu: {
        double Phi = 0.5 * (1.0 + std::erf(u * kInvSqrt2));
        return u * Phi;
      }
    }
    return 0.0;
  }
  // Subgradient 0 at the relu kink.
  double fp(double u) const {
    switch (kind) {
      case Activation::Tanh: {
        double t = std::tanh(u);
        return 1.0 - t * t;
      }
      case Activation::Relu: return u > 0 ? 1.0 : 0.0;
      case Activation::Sin:  return freq * std::cos(freq * u);
      case Activation::Gelu: {
        double Phi = 0.5 * (1.0 + std::erf(u * kInvSqrt2));
        double phi = kInvSqrt2Pi * std::exp(-0.5 * u * u);
        return Phi + u * phi;
      }
    }
    return 0.0;
  }
  double fpp(double u) const {
    switch (kind) {
      case Activation::Tanh: {
        double t = std::tanh(u);
        return -2.0 * t * (1.0 - t * t);
      }
      case Activation::Relu: return 0.0;
      case Activation::Sin:  return -freq * freq * std::sin(freq * u);
      case Activation::Gelu: {
        double phi = kInvSqrt2Pi * std::exp(-0.5 * u * u);
        return phi * (2.0 - u * u);
      }
    }
    return 0.0;
  }
};

ActFns layer_act(const MlpConfig& cfg, int layer_index) {
  double freq = 1.0;
  if (cfg.act == Activation::Sin) freq = layer_index == 0 ? cfg.sin_w0 : 1.0;
  return ActFns{cfg.act, freq};
}

}  // namespace

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Sin:  return "sin";
    case Activation::Gelu: return "gelu";
  }
  return "?";
}

Activation activation_from_name(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  if (s == "sin") return Activation::Sin;
  if (s == "gelu") return Activation::Gelu;
  throw std::invalid_argument("net: unknown activation " + s);
}

Mlp::Mlp(const MlpConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg_.in_lo.size() == 0) {
    cfg_.in_lo = Vec::Constant(cfg_.input_dim, -1.0);
    cfg_.in_hi = Vec::Constant(cfg_.input_dim, 1.0);
  }
  if (cfg_.in_lo.size() != cfg_.input_dim || cfg_.in_hi.size() != cfg_.input_dim)
    throw std::invalid_argument("net: normalization box dimension mismatch");

  norm_center = 0.5 * (cfg_.in_lo + cfg_.in_hi);
  Vec half = 0.5 * (cfg_.in_hi - cfg_.in_lo);
  norm_inv_half = half.cwiseMax(1e-300).cwiseInverse();

  std::vector<int> widths;
  widths.push_back(cfg_.input_dim);
  for (int h : cfg_.hidden) widths.push_back(h);
  widths.push_back(1);

  Rng rng(seed);
  const int L = depth();
  W.resize(L + 1);
  b.resize(L + 1);
  for (int l = 0; l <= L; ++l) {
    int fan_in = widths[l], fan_out = widths[l + 1];
    double k;
    if (cfg_.act == Activation::Sin)
      k = l == 0 ? 1.0 / fan_in : std::sqrt(6.0 / fan_in);
    else
      k = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-k, k);
    W[l] = Mat(fan_out, fan_in);
    for (Eigen::Index i = 0; i < W[l].rows(); ++i)
      for (Eigen::Index j = 0; j < W[l].cols(); ++j) W[l](i, j) = dist(rng);
    b[l] = Vec(fan_out);
    for (Eigen::Index i = 0; i < b[l].size(); ++i) b[l][i] = dist(rng);
  }
  slopes = Vec::Ones(L);
}

Eigen::Index Mlp::param_count() const {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < W.size(); ++l) n += W[l].size() + b[l].size();
  return n + slopes.size();
}

Vec Mlp::params_flat() const {
  Vec p(param_count());
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < W.size(); ++l) {
    for (Eigen::Index i = 0; i < W[l].rows(); ++i)
      for (Eigen::Index j = 0; j < W[l].cols(); ++j) p[off++] = W[l](i, j);
    p.segment(off, b[l].size()) = b[l];
    off += b[l].size();
  }
  p.segment(off, slopes.size()) = slopes;
  return p;
}

void Mlp::set_params_flat(const Vec& p) {
  if (p.size() != param_count())
    throw std::invalid_argument("net: flat parameter size mismatch");
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < W.size(); ++l) {
    for (Eigen::Index i = 0; i < W[l].rows(); ++i)
      for (Eigen::Index j = 0; j < W[l].cols(); ++j) W[l](i, j) = p[off++];
    b[l] = p.segment(off, b[l].size());
    off += b[l].size();
  }
  slopes = p.segment(off, slopes.size());
}

double Mlp::forward(const Vec& x_raw) const {
  double y;
  Vec g;
  forward_with_gradient(x_raw, y, g);
  return y;
}

Vec Mlp::input_gradient(const Vec& x_raw) const {
  double y;
  Vec g;
  forward_with_gradient(x_raw, y, g);
  return g;
}

void Mlp::forward_with_gradient(const Vec& x_raw, double& y, Vec& g) const {
  BatchEval ev;
  ev.run(*this, x_raw, true);
  y = ev.y_raw[0];
  g = ev.g_raw.col(0);
}

void BatchEval::run(const Mlp& net, const Mat& X_raw, bool want_input_grad) {
  if (X_raw.rows() != net.input_dim())
    throw std::invalid_argument("net: input dimension mismatch");
  net_ = &net;
  with_grad_ = want_input_grad;
  const int L = net.depth();
  const Eigen::Index B = X_raw.cols();
  const auto& cfg = net.config();

  H0 = ((X_raw.colwise() - net.norm_center).array().colwise() *
        net.norm_inv_half.array())
           .matrix();

  S.assign(L, Mat());
  H.assign(L, Mat());
  FP.assign(L, Mat());
  const Mat* prev = &H0;
  for (int l = 0; l < L; ++l) {
    ActFns act = layer_act(cfg, l);
    double a = net.slopes[l];
    S[l].noalias() = net.W[l] * (*prev);
    S[l].colwise() += net.b[l];
    H[l] = S[l];
    FP[l] = S[l];
    double* h = H[l].data();
    double* fp = FP[l].data();
    const double* s = S[l].data();
    const Eigen::Index n = S[l].size();
    for (Eigen::Index i = 0; i < n; ++i) {
      double u = a * s[i];
      h[i] = act.f(u);
      fp[i] = act.fp(u);
    }
    prev = &H[l];
  }
  y_net = (net.W[L] * (*prev)).transpose();
  y_net.array() += net.b[L][0];
  y_raw = cfg.out_scale * y_net;

  if (!want_input_grad) {
    EPS.clear();
    DELTA.clear();
    g_norm.resize(0, 0);
    g_raw.resize(0, 0);
    return;
  }

  // Reverse sweep to the inputs, kept for the parameter backprop.
  EPS.assign(L, Mat());
  DELTA.assign(L, Mat());
  Mat delta = net.W[L].transpose().replicate(1, B);
  for (int l = L - 1; l >= 0; --l) {
    DELTA[l] = delta;
    EPS[l] = net.slopes[l] * FP[l].cwiseProduct(delta);
    if (l > 0)
      delta.noalias() = net.W[l].transpose() * EPS[l];
  }
  g_norm.noalias() = net.W[0].transpose() * EPS[0];
  g_raw = ((cfg.out_scale * g_norm).array().colwise() *
           net.norm_inv_half.array())
              .matrix();
}

void BatchEval::backprop(const Mlp& net, const Vec& ybar_raw,
                         const Mat& gbar_raw, Vec& grad) const {
  if (net_ != &net)
    throw std::invalid_argument("net: backprop against a different net");
  const int L = net.depth();
  const Eigen::Index B = y_net.size();
  const auto& cfg = net.config();
  const bool use_g = gbar_raw.size() > 0;
  if (use_g && !with_grad_)
    throw std::invalid_argument("net: gradient seeds need want_input_grad");

  if (grad.size() != net.param_count()) grad = Vec::Zero(net.param_count());

  std::vector<Mat> Wbar(L + 1);
  std::vector<Vec> bbar(L + 1);
  for (int l = 0; l <= L; ++l) {
    Wbar[l] = Mat::Zero(net.W[l].rows(), net.W[l].cols());
    bbar[l] = Vec::Zero(net.b[l].size());
  }
  Vec abar = Vec::Zero(L);

  Vec ybar_net = cfg.out_scale * ybar_raw;

  std::vector<Mat> Ueps(L);
  Mat delta_bar;
  if (use_g) {
    // Adjoint of the input-gradient chain, walked from the inputs back up.
    Mat gbar_norm = ((cfg.out_scale * gbar_raw).array().colwise() *
                     net.norm_inv_half.array())
                        .matrix();
    delta_bar = gbar_norm;
    for (int l = 0; l < L; ++l) {
      ActFns act = layer_act(cfg, l);
      double a = net.slopes[l];
      Mat eps_bar;
      eps_bar.noalias() = net.W[l] * delta_bar;
      Wbar[l].noalias() += EPS[l] * delta_bar.transpose();
      abar[l] += (FP[l].cwiseProduct(DELTA[l]).cwiseProduct(eps_bar)).sum();
      // f'' evaluated at the stored pre-activations.
      Mat fpp = S[l];
      double* q = fpp.data();
      const double* s = S[l].data();
      for (Eigen::Index i = 0; i < fpp.size(); ++i) q[i] = act.fpp(a * s[i]);
      Ueps[l] = a * fpp.cwiseProduct(DELTA[l]).cwiseProduct(eps_bar);
      delta_bar = a * FP[l].cwiseProduct(eps_bar);
    }
    Wbar[L] += delta_bar.rowwise().sum().transpose();
  }

  // Adjoint of the primal chain.
  const Mat& hL = L > 0 ? H[L - 1] : H0;
  Wbar[L].noalias() += ybar_net.transpose() * hL.transpose();
  bbar[L][0] += ybar_net.sum();
  Mat hbar = net.W[L].transpose() * ybar_net.transpose();  // n_L x B
  for (int l = L - 1; l >= 0; --l) {
    Mat ubar = FP[l].cwiseProduct(hbar);
    if (use_g) ubar += Ueps[l];
    abar[l] += S[l].cwiseProduct(ubar).sum();
    Mat sbar = net.slopes[l] * ubar;
    const Mat& hprev = l > 0 ? H[l - 1] : H0;
    Wbar[l].noalias() += sbar * hprev.transpose();
    bbar[l] += sbar.rowwise().sum();
    if (l > 0) hbar.noalias() = net.W[l].transpose() * sbar;
  }
  (void)B;

  Eigen::Index off = 0;
  for (int l = 0; l <= L; ++l) {
    for (Eigen::Index i = 0; i < Wbar[l].rows(); ++i)
      for (Eigen::Index j = 0; j < Wbar[l].cols(); ++j)
        grad[off++] += Wbar[l](i, j);
    grad.segment(off, bbar[l].size()) += bbar[l];
    off += bbar[l].size();
  }
  grad.segment(off, L) += abar;
}

double loss_gradient(const Mlp& net, const Mat& X_raw, const PointLoss& fn,
                     Vec& grad_out) {
  BatchEval ev;
  ev.run(net, X_raw, true);
  const Eigen::Index B = X_raw.cols();
  Vec ybar = Vec::Zero(B);
  Mat gbar = Mat::Zero(X_raw.rows(), B);
  double total = 0.0;
  Vec gcol(X_raw.rows());
  for (Eigen::Index k = 0; k < B; ++k) {
    double yb = 0.0;
    gcol.setZero();
    total += fn(k, ev.y_raw[k], ev.g_raw.col(k), yb, gcol);
    ybar[k] = yb;
    gbar.col(k) = gcol;
  }
  double inv = 1.0 / static_cast<double>(B);
  ybar *= inv;
  gbar *= inv;
  grad_out = Vec::Zero(net.param_count());
  ev.backprop(net, ybar, gbar, grad_out);
  return total * inv;
}

Mlp permute_inputs(const Mlp& net, const std::vector<int>& perm) {
  if (static_cast<int>(perm.size()) != net.input_dim())
    throw std::invalid_argument("net: permutation size mismatch");
  Mlp out = net;
  for (int i = 0; i < net.input_dim(); ++i) {
    out.W[0].col(i) = net.W[0].col(perm[static_cast<std::size_t>(i)]);
    out.norm_center[i] = net.norm_center[perm[static_cast<std::size_t>(i)]];
    out.norm_inv_half[i] = net.norm_inv_half[perm[static_cast<std::size_t>(i)]];
  }
  return out;
}

void adam_step(AdamState& st, Vec& params, const Vec& grad) {
  if (st.m.size() != params.size()) {
    st.m = Vec::Zero(params.size());
    st.v = Vec::Zero(params.size());
    st.step = 0;
  }
  st.step += 1;
  st.m = st.beta1 * st.m + (1.0 - st.beta1) * grad;
  st.v = st.beta2 * st.v + (1.0 - st.beta2) * grad.cwiseProduct(grad);
  double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  Vec mhat = st.m / c1;
  Vec vhat = st.v / c2;
  params -= st.lr * (mhat.array() / (vhat.array().sqrt() + st.eps)).matrix();
}

// ---------------------------------------------------------------------------
// Model files: little-endian binary, versioned magic.
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'D', 'G', 'V', 'N'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("net: truncated model file");
  return v;
}

void put_vec(std::ofstream& out, const Vec& v) {
  put<std::uint64_t>(out, static_cast<std::uint64_t>(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double) * v.size()));
}

Vec get_vec(std::ifstream& in) {
  auto n = get<std::uint64_t>(in);
  Vec v(static_cast<Eigen::Index>(n));
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double) * n));
  if (!in) throw std::runtime_error("net: truncated model file");
  return v;
}

void put_string(std::ofstream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::ifstream& in) {
  auto n = get<std::uint64_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("net: truncated model file");
  return s;
}

}  // namespace

void Mlp::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("net: cannot write " + path);
  out.write(kMagic, 4);
  put(out, kVersion);
  put(out, static_cast<std::uint32_t>(cfg_.input_dim));
  put(out, static_cast<std::uint32_t>(cfg_.hidden.size()));
  for (int h : cfg_.hidden) put(out, static_cast<std::uint32_t>(h));
  put(out, static_cast<std::uint8_t>(cfg_.act));
  put(out, cfg_.sin_w0);
  put(out, cfg_.out_scale);
  put_vec(out, cfg_.in_lo);
  put_vec(out, cfg_.in_hi);
  put_vec(out, slopes);
  for (std::size_t l = 0; l < W.size(); ++l) {
    Vec flat(W[l].size());
    Eigen::Index off = 0;
    for (Eigen::Index i = 0; i < W[l].rows(); ++i)
      for (Eigen::Index j = 0; j < W[l].cols(); ++j) flat[off++] = W[l](i, j);
    put_vec(out, flat);
    put_vec(out, b[l]);
  }
  put(out, meta.game_hash);
  put(out, static_cast<std::uint32_t>(meta.player));
  put(out, meta.theta_self);
  put(out, meta.theta_fellow);
  put_string(out, meta.regime);
}

Mlp Mlp::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("net: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("net: bad magic in " + path);
  auto version = get<std::uint32_t>(in);
  if (version != kVersion)
    throw std::runtime_error("net: unsupported model version");
  MlpConfig cfg;
  cfg.input_dim = static_cast<int>(get<std::uint32_t>(in));
  auto L = get<std::uint32_t>(in);
  cfg.hidden.resize(L);
  for (auto& h : cfg.hidden) h = static_cast<int>(get<std::uint32_t>(in));
  cfg.act = static_cast<Activation>(get<std::uint8_t>(in));
  cfg.sin_w0 = get<double>(in);
  cfg.out_scale = get<double>(in);
  cfg.in_lo = get_vec(in);
  cfg.in_hi = get_vec(in);
  Mlp net(cfg, 0);
  net.slopes = get_vec(in);
  for (std::size_t l = 0; l < net.W.size(); ++l) {
    Vec flat = get_vec(in);
    if (flat.size() != net.W[l].size())
      throw std::runtime_error("net: model layer size mismatch");
    Eigen::Index off = 0;
    for (Eigen::Index i = 0; i < net.W[l].rows(); ++i)
      for (Eigen::Index j = 0; j < net.W[l].cols(); ++j)
        net.W[l](i, j) = flat[off++];
    net.b[l] = get_vec(in);
  }
  net.meta.game_hash = get<std::uint64_t>(in);
  net.meta.player = static_cast<int>(get<std::uint32_t>(in));
  net.meta.theta_self = get<double>(in);
  net.meta.theta_fellow = get<double>(in);
  net.meta.regime = get_string(in);
  return net;
}

}  // namespace dgame
