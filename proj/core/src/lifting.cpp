#include "tvk/lifting.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "tvk/errors.hpp"

namespace tvk {

void MlpSpec::validate() const {
  if (layer_sizes.size() < 3) throw DimensionError("network needs at least one hidden layer");
  for (Index s : layer_sizes)
    if (s <= 0) throw DimensionError("layer sizes must be positive");
}

MlpParams MlpParams::zeros(const MlpSpec& spec) {
  spec.validate();
  MlpParams p;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    p.W.push_back(Mat::Zero(spec.layer_sizes[l + 1], spec.layer_sizes[l]));
    p.b.push_back(Vec::Zero(spec.layer_sizes[l + 1]));
  }
  return p;
}

MlpParams MlpParams::zeros_like(const MlpParams& other) { return zeros(other.spec()); }

MlpSpec MlpParams::spec() const {
  MlpSpec s;
  if (W.empty()) return s;
  s.layer_sizes.push_back(W.front().cols());
  for (const auto& w : W) s.layer_sizes.push_back(w.rows());
  return s;
}

Index MlpParams::num_params() const {
  Index c = 0;
  for (std::size_t l = 0; l < W.size(); ++l) c += W[l].size() + b[l].size();
  return c;
}

Vec MlpParams::flatten() const {
  Vec out(num_params());
  Index o = 0;
  for (std::size_t l = 0; l < W.size(); ++l) {
    for (Index i = 0; i < W[l].rows(); ++i)
      for (Index j = 0; j < W[l].cols(); ++j) out(o++) = W[l](i, j);
    out.segment(o, b[l].size()) = b[l];
    o += b[l].size();
  }
  return out;
}

void MlpParams::assign(const Vec& flat) {
  if (flat.size() != num_params()) throw DimensionError("parameter vector length mismatch");
  Index o = 0;
  for (std::size_t l = 0; l < W.size(); ++l) {
    for (Index i = 0; i < W[l].rows(); ++i)
      for (Index j = 0; j < W[l].cols(); ++j) W[l](i, j) = flat(o++);
    b[l] = flat.segment(o, b[l].size());
    o += b[l].size();
  }
}

bool MlpParams::all_finite() const {
  for (std::size_t l = 0; l < W.size(); ++l)
    if (!W[l].allFinite() || !b[l].allFinite()) return false;
  return true;
}

MlpParams glorot_init(const MlpSpec& spec, std::uint64_t seed) {
  MlpParams p = MlpParams::zeros(spec);
  std::mt19937_64 rng(seed);
  for (auto& w : p.W) {
    const double lim = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> dist(-lim, lim);
    for (Index i = 0; i < w.rows(); ++i)
      for (Index j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
  }
  return p;
}

namespace {

void check_input(const MlpParams& theta, Index rows) {
  if (theta.W.empty()) throw DimensionError("empty network");
  if (rows != theta.input_dim()) throw DimensionError("network input dimension mismatch");
}

}  // namespace

Vec mlp_forward(const MlpParams& theta, const Vec& x) {
  check_input(theta, x.size());
  Mat X = x;
  return mlp_forward(theta, X).col(0);
}

Mat mlp_forward(const MlpParams& theta, const Mat& X) {
  check_input(theta, X.rows());
  Mat a = X;
  for (std::size_t l = 0; l < theta.W.size(); ++l) {
    Mat z = (theta.W[l] * a).colwise() + theta.b[l];
    a = (l + 1 < theta.W.size()) ? Mat(z.cwiseMax(0.0)) : z;
  }
  return a;
}

MlpTrace mlp_forward_trace(const MlpParams& theta, const Mat& X) {
  check_input(theta, X.rows());
  MlpTrace t;
  t.input = X;
  t.z.reserve(theta.W.size());
  for (std::size_t l = 0; l < theta.W.size(); ++l) {
    if (l == 0)
      t.z.push_back((theta.W[0] * X).colwise() + theta.b[0]);
    else
      t.z.push_back((theta.W[l] * t.z[l - 1].cwiseMax(0.0)).colwise() + theta.b[l]);
  }
  return t;
}

void mlp_backward(const MlpParams& theta, const MlpTrace& trace, const Mat& dOut, MlpParams& grad) {
  if (dOut.rows() != theta.output_dim() || dOut.cols() != trace.input.cols())
    throw DimensionError("output gradient shape mismatch");
  Mat delta = dOut;
  for (std::size_t l = theta.W.size(); l-- > 0;) {
    if (l == 0)
      grad.W[0].noalias() += delta * trace.input.transpose();
    else
      grad.W[l].noalias() += delta * trace.z[l - 1].cwiseMax(0.0).transpose();
    grad.b[l] += delta.rowwise().sum();
    if (l > 0) {
      Mat back = theta.W[l].transpose() * delta;
      delta = back.cwiseProduct((trace.z[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
}

void mlp_backward(const MlpParams& theta, const Mat& X, const Mat& dOut, MlpParams& grad) {
  mlp_backward(theta, mlp_forward_trace(theta, X), dOut, grad);
}

Observable Observable::identity(Index n) {
  Observable g;
  g.n_ = n;
  g.concat_ = true;
  g.has_net_ = false;
  return g;
}

Observable Observable::network(MlpParams net, bool concat_state) {
  Observable g;
  g.n_ = net.input_dim();
  g.concat_ = concat_state;
  g.has_net_ = true;
  g.net_ = std::move(net);
  g.shift_ = Vec::Zero(g.n_);
  g.scale_ = Vec::Ones(g.n_);
  return g;
}

Index Observable::lifted_dim() const {
  return (concat_ ? n_ : 0) + (has_net_ ? net_.output_dim() : 0);
}

void Observable::set_input_normalization(const Vec& shift, const Vec& scale) {
  if (shift.size() != n_ || scale.size() != n_) throw DimensionError("normalization length mismatch");
  shift_ = shift;
  scale_ = scale;
}

Mat Observable::network_input(const Mat& X) const {
  return ((X.colwise() - shift_).array().colwise() * scale_.array()).matrix();
}

Vec Observable::lift(const Vec& x) const {
  Mat X = x;
  return lift(X).col(0);
}

Mat Observable::lift(const Mat& X) const {
  if (X.rows() != n_) throw DimensionError("state dimension mismatch in lifting");
  if (!has_net_) return X;
  Mat out(lifted_dim(), X.cols());
  const Index off = network_row_offset();
  if (concat_) out.topRows(n_) = X;
  out.bottomRows(out.rows() - off) = mlp_forward(net_, network_input(X));
  return out;
}

bool Observable::operator==(const Observable& o) const {
  if (n_ != o.n_ || concat_ != o.concat_ || has_net_ != o.has_net_) return false;
  if (!has_net_) return true;
  if (net_.W.size() != o.net_.W.size()) return false;
  for (std::size_t l = 0; l < net_.W.size(); ++l)
    if (net_.W[l] != o.net_.W[l] || net_.b[l] != o.net_.b[l]) return false;
  return shift_ == o.shift_ && scale_ == o.scale_;
}

OptimizerState OptimizerState::for_params(const MlpParams& theta, const AdamWConfig& cfg) {
  OptimizerState s;
  s.m = MlpParams::zeros_like(theta);
  s.v = MlpParams::zeros_like(theta);
  s.cfg = cfg;
  return s;
}

void optimizer_step(MlpParams& theta, const MlpParams& grad, OptimizerState& st) {
  if (grad.W.size() != theta.W.size() || st.m.W.size() != theta.W.size())
    throw DimensionError("optimizer shapes mismatch");
  const AdamWConfig& c = st.cfg;
  st.step += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.step));
  const double decay = 1.0 - c.learning_rate * c.weight_decay;
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    if (p.rows() != g.rows() || p.cols() != g.cols()) throw DimensionError("gradient shape mismatch");
    p *= decay;
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    p.array() -= c.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
  };
  for (std::size_t l = 0; l < theta.W.size(); ++l) {
    update(theta.W[l], grad.W[l], st.m.W[l], st.v.W[l]);
    update(theta.b[l], grad.b[l], st.m.b[l], st.v.b[l]);
  }
}

double lipschitz_estimate(const Observable& g, const std::vector<Vec>& samples) {
  if (samples.size() < 2) throw DimensionError("need at least two samples");
  Mat X(g.state_dim(), static_cast<Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) X.col(static_cast<Index>(i)) = samples[i];
  const Mat G = g.lift(X);
  double best = 0.0;
  bool any = false;
  for (Index i = 0; i < X.cols(); ++i) {
    for (Index j = i + 1; j < X.cols(); ++j) {
      const double dx = (X.col(i) - X.col(j)).norm();
      if (dx == 0.0) continue;
      any = true;
      best = std::max(best, (G.col(i) - G.col(j)).norm() / dx);
    }
  }
  if (!any) throw DimensionError("all samples coincide; Lipschitz ratio undefined");
  return best;
}

namespace {

constexpr const char* kCheckpointFormat = "tvk-observable";
constexpr int kCheckpointVersion = 1;

std::vector<double> to_vector(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec from_json_vec(const nlohmann::json& j, Index expect) {
  auto v = j.get<std::vector<double>>();
  if (static_cast<Index>(v.size()) != expect) throw DimensionError("checkpoint vector length mismatch");
  return Eigen::Map<Vec>(v.data(), expect);
}

}  // namespace

void save_checkpoint(const std::string& path, const Observable& g) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["state_dim"] = g.state_dim();
  j["concat_state"] = g.concat_state();
  j["layers"] = nlohmann::json::array();
  if (g.has_network()) {
    j["input_shift"] = to_vector(g.input_shift());
    j["input_scale"] = to_vector(g.input_scale());
    const MlpParams& p = g.net();
    for (std::size_t l = 0; l < p.W.size(); ++l) {
      std::vector<double> w;
      w.reserve(static_cast<std::size_t>(p.W[l].size()));
      for (Index r = 0; r < p.W[l].rows(); ++r)
        for (Index c = 0; c < p.W[l].cols(); ++c) w.push_back(p.W[l](r, c));
      j["layers"].push_back({{"in", p.W[l].cols()}, {"out", p.W[l].rows()}, {"weight", w}, {"bias", to_vector(p.b[l])}});
    }
  }
  std::ofstream f(path);
  if (!f) throw Error("cannot write checkpoint " + path);
  f << j.dump(1) << '\n';
}

Observable load_checkpoint(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot read checkpoint " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed checkpoint: ") + e.what());
  }
  if (j.value("format", "") != kCheckpointFormat || j.value("version", 0) != kCheckpointVersion)
    throw Error("unsupported checkpoint format in " + path);
  const Index n = j.at("state_dim").get<Index>();
  const auto& layers = j.at("layers");
  if (layers.empty()) return Observable::identity(n);
  MlpSpec spec;
  spec.layer_sizes.push_back(layers.front().at("in").get<Index>());
  for (const auto& L : layers) spec.layer_sizes.push_back(L.at("out").get<Index>());
  if (spec.layer_sizes.front() != n) throw DimensionError("checkpoint input layer does not match state_dim");
  MlpParams p = MlpParams::zeros(spec);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    if (L.at("in").get<Index>() != spec.layer_sizes[l]) throw DimensionError("checkpoint layer chain broken");
    auto w = L.at("weight").get<std::vector<double>>();
    if (static_cast<Index>(w.size()) != p.W[l].size()) throw DimensionError("checkpoint weight size mismatch");
    std::size_t o = 0;
    for (Index r = 0; r < p.W[l].rows(); ++r)
      for (Index c = 0; c < p.W[l].cols(); ++c) p.W[l](r, c) = w[o++];
    p.b[l] = from_json_vec(L.at("bias"), p.b[l].size());
  }
  Observable g = Observable::network(std::move(p), j.at("concat_state").get<bool>());
  g.set_input_normalization(from_json_vec(j.at("input_shift"), n), from_json_vec(j.at("input_scale"), n));
  return g;
}

}  // namespace tvk
