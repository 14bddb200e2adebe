#pragma once

#include "dgame/common.hpp"

#include <functional>
#include <string>
#include <vector>

namespace dgame {

enum class Activation { Tanh, Relu, Sin, Gelu };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& s);

struct MlpConfig {
  int input_dim = 1;
  std::vector<int> hidden = {64, 64, 64};
  Activation act = Activation::Tanh;
  double sin_w0 = 30.0;  // first-layer frequency for the sin activation
  Vec in_lo, in_hi;      // sampling box mapped onto [-1, 1] per coordinate
  double out_scale = 1.0;
};

// Fully connected scalar-output network with one trainable slope per hidden
// layer. The forward map in raw units is
//   y(x) = out_scale * ( W_L h_L + b_L ),  h_l = f(a_l (W_{l-1} h_{l-1} + b_{l-1}))
// with h_0 the normalized input. Evaluation on frozen parameters is
// reentrant; training steps must be serialized externally.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const MlpConfig& cfg, std::uint64_t seed);

  const MlpConfig& config() const { return cfg_; }
  int input_dim() const { return cfg_.input_dim; }
  int depth() const { return static_cast<int>(cfg_.hidden.size()); }

  // Flat parameter vector: (W, b) per layer in order, then the slopes.
  Eigen::Index param_count() const;
  Vec params_flat() const;
  void set_params_flat(const Vec& p);

  // Scalar conveniences (single input column).
  double forward(const Vec& x_raw) const;
  Vec input_gradient(const Vec& x_raw) const;
  void forward_with_gradient(const Vec& x_raw, double& y, Vec& g) const;

  // Metadata carried by model files.
  struct Meta {
    std::uint64_t game_hash = 0;
    int player = 0;
    double theta_self = 0, theta_fellow = 0;
    std::string regime;
  };
  Meta meta;

  void save(const std::string& path) const;
  static Mlp load(const std::string& path);

  std::vector<Mat> W;
  std::vector<Vec> b;
  Vec slopes;  // one per hidden layer, init 1.0

  Vec norm_center, norm_inv_half;  // input normalization affine map

 private:
  MlpConfig cfg_;
};

// Cached batched evaluation of values and input gradients, plus the
// intermediates needed to pull loss seeds back onto the parameters.
// Losses may depend on both y and the input gradient; backprop handles the
// second-order terms analytically (the reverse pass is differentiated in
// closed form, so no tape is required at this fixed architecture).
class BatchEval {
 public:
  // X_raw is input_dim x B. want_input_grad = false skips the derivative
  // chain for value-only losses.
  void run(const Mlp& net, const Mat& X_raw, bool want_input_grad = true);

  Eigen::Index batch() const { return y_raw.size(); }

  Vec y_raw;   // B, raw units
  Mat g_raw;   // input_dim x B, d y_raw / d x_raw

  // Accumulates into grad (sized param_count) the parameter gradient of
  // sum_b [ ybar[b] * y_raw[b] + dot(gbar.col(b), g_raw.col(b)) ]'s
  // linearization, i.e. seeds are d loss / d y_raw and d loss / d g_raw.
  void backprop(const Mlp& net, const Vec& ybar_raw, const Mat& gbar_raw,
                Vec& grad) const;

 private:
  const Mlp* net_ = nullptr;
  bool with_grad_ = false;
  Mat H0;                    // normalized inputs
  std::vector<Mat> S, H, FP; // per hidden layer
  std::vector<Mat> EPS, DELTA;
  Vec y_net;
  Mat g_norm;
};

// Per-sample loss functional: receives (column, value, input gradient) in
// raw units and writes the seeds; returns the loss contribution.
using PointLoss =
    std::function<double(Eigen::Index, double, const Vec&, double&, Vec&)>;

// Mean loss over the batch and its exact parameter gradient.
double loss_gradient(const Mlp& net, const Mat& X_raw, const PointLoss& fn,
                     Vec& grad_out);

// Net evaluating x -> f(perm(x)): first-layer columns and the normalization
// map are permuted, everything else shared. perm[i] names the source
// coordinate feeding input slot i.
Mlp permute_inputs(const Mlp& net, const std::vector<int>& perm);

struct AdamState {
  explicit AdamState(Eigen::Index n = 0)
      : m(Vec::Zero(n)), v(Vec::Zero(n)) {}
  Vec m, v;
  long long step = 0;
  double lr = 2e-5;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

// Standard bias-corrected Adam update applied in place.
void adam_step(AdamState& st, Vec& params, const Vec& grad);

}  // namespace dgame
