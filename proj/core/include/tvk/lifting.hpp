#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tvk/types.hpp"

namespace tvk {

// Layer sizes [n, h1, ..., out]; ReLU on hidden layers, linear output.
struct MlpSpec {
  std::vector<Index> layer_sizes;

  void validate() const;
  Index input_dim() const { return layer_sizes.front(); }
  Index output_dim() const { return layer_sizes.back(); }
};

struct MlpParams {
  std::vector<Mat> W;  // W[l] is layer_sizes[l+1] x layer_sizes[l]
  std::vector<Vec> b;

  static MlpParams zeros(const MlpSpec& spec);
  static MlpParams zeros_like(const MlpParams& other);
  MlpSpec spec() const;
  Index num_layers() const { return static_cast<Index>(W.size()); }
  Index input_dim() const { return W.front().cols(); }
  Index output_dim() const { return W.back().rows(); }
  Index num_params() const;
  Vec flatten() const;
  void assign(const Vec& flat);
  bool all_finite() const;
};

// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
MlpParams glorot_init(const MlpSpec& spec, std::uint64_t seed);

Vec mlp_forward(const MlpParams& theta, const Vec& x);
Mat mlp_forward(const MlpParams& theta, const Mat& X);

// Input and per-layer pre-activations of one batched forward pass.
struct MlpTrace {
  Mat input;
  std::vector<Mat> z;
  const Mat& output() const { return z.back(); }
};
MlpTrace mlp_forward_trace(const MlpParams& theta, const Mat& X);

// Accumulates d(sum <dOut, net(X)>)/dθ into grad.
void mlp_backward(const MlpParams& theta, const MlpTrace& trace, const Mat& dOut, MlpParams& grad);
void mlp_backward(const MlpParams& theta, const Mat& X, const Mat& dOut, MlpParams& grad);

// Observable g(x, θ). Three shapes: identity (g(x)=x), network (g(x)=net(x)),
// concatenated (g(x)=[x; net(x)]). The network sees (x - shift) .* scale.
class Observable {
 public:
  Observable() = default;
  static Observable identity(Index n);
  static Observable network(MlpParams net, bool concat_state);

  Index state_dim() const { return n_; }
  Index lifted_dim() const;
  bool has_network() const { return has_net_; }
  bool concat_state() const { return concat_; }
  const MlpParams& net() const { return net_; }
  MlpParams& net() { return net_; }
  const Vec& input_shift() const { return shift_; }
  const Vec& input_scale() const { return scale_; }
  void set_input_normalization(const Vec& shift, const Vec& scale);

  Vec lift(const Vec& x) const;
  Mat lift(const Mat& X) const;
  Mat network_input(const Mat& X) const;

  // Rows of g that depend on θ start at this offset.
  Index network_row_offset() const { return concat_ ? n_ : 0; }

  bool operator==(const Observable& o) const;

 private:
  Index n_ = 0;
  bool concat_ = true;
  bool has_net_ = false;
  MlpParams net_;
  Vec shift_;
  Vec scale_;
};

struct AdamWConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  long step = 0;
  MlpParams m;
  MlpParams v;
  AdamWConfig cfg;

  static OptimizerState for_params(const MlpParams& theta, const AdamWConfig& cfg);
};

// Adam moments with decoupled weight decay: θ <- θ(1 - lr*wd) - lr * mhat / (sqrt(vhat) + eps).
void optimizer_step(MlpParams& theta, const MlpParams& grad, OptimizerState& state);

// Max over sample pairs of |g(x)-g(y)| / |x-y|. Throws if every pair coincides.
double lipschitz_estimate(const Observable& g, const std::vector<Vec>& samples);

void save_checkpoint(const std::string& path, const Observable& g);
Observable load_checkpoint(const std::string& path);

}  // namespace tvk
