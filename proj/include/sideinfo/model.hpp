#pragma once

// Differentiable maps and the phi/psi/beta stack they plug into.
//
// Conventions shared by every Map:
//  - parameters flatten to one contiguous array; layout is documented per map
//    and stable, so flat indices are meaningful in tests and snapshots;
//  - forward writes out_dim() values; backward ACCUMULATES (+=) into the
//    gradient buffers it is given, either of which may be null;
//  - maps hold no per-sample state, so a const Map is safe to share.

#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sideinfo/matrix.hpp"
#include "sideinfo/rng.hpp"

namespace sideinfo {

enum class MapKind { linear, logistic, mlp };

enum class InitScheme { zeros, scaled_uniform };

class Map {
 public:
  virtual ~Map() = default;
  virtual MapKind kind() const = 0;
  virtual std::size_t in_dim() const = 0;
  virtual std::size_t out_dim() const = 0;
  virtual std::size_t param_count() const = 0;
  virtual void get_params(double* out) const = 0;
  virtual void set_params(const double* in) = 0;
  virtual void forward(const double* x, double* y) const = 0;
  // up has out_dim() entries (dL/dy). Adds dL/dparams into pgrad and dL/dx
  // into xgrad when the buffer is non-null.
  virtual void backward(const double* x, const double* up, double* pgrad,
                        double* xgrad) const = 0;
  virtual void init(InitScheme scheme, Rng& rng) = 0;
  virtual std::unique_ptr<Map> clone() const = 0;

  Vec forward_vec(const Vec& x) const {
    if (x.size() != in_dim()) throw std::invalid_argument("Map::forward: input size mismatch");
    Vec y(out_dim());
    forward(x.data(), y.data());
    return y;
  }

  Vec params() const {
    Vec p(param_count());
    get_params(p.data());
    return p;
  }
};

namespace detail {

// Init bound sqrt(6 / (fan_in + fan_out)); weight draw order is row-major,
// biases stay zero under both schemes.
inline double uniform_init_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace detail

// y = W x (+ b). Parameter layout: W row-major, then bias (when enabled).
class LinearMap final : public Map {
 public:
  LinearMap(std::size_t out, std::size_t in, bool with_bias = false)
      : out_(out), in_(in), with_bias_(with_bias), w_(out, in), b_(with_bias ? out : 0, 0.0) {
    if (out == 0 || in == 0) throw std::invalid_argument("LinearMap: zero dimension");
  }

  MapKind kind() const override { return MapKind::linear; }
  std::size_t in_dim() const override { return in_; }
  std::size_t out_dim() const override { return out_; }
  std::size_t param_count() const override { return out_ * in_ + b_.size(); }
  bool has_bias() const { return with_bias_; }

  Matrix& weights() { return w_; }
  const Matrix& weights() const { return w_; }
  Vec& bias() { return b_; }
  const Vec& bias() const { return b_; }

  void get_params(double* out) const override {
    std::copy(w_.data(), w_.data() + out_ * in_, out);
    std::copy(b_.begin(), b_.end(), out + out_ * in_);
  }

  void set_params(const double* in) override {
    std::copy(in, in + out_ * in_, w_.data());
    std::copy(in + out_ * in_, in + param_count(), b_.begin());
  }

  void forward(const double* x, double* y) const override {
    for (std::size_t o = 0; o < out_; ++o) {
      double acc = with_bias_ ? b_[o] : 0.0;
      const double* row = w_.row(o);
      for (std::size_t i = 0; i < in_; ++i) acc += row[i] * x[i];
      y[o] = acc;
    }
  }

  void backward(const double* x, const double* up, double* pgrad,
                double* xgrad) const override {
    for (std::size_t o = 0; o < out_; ++o) {
      const double u = up[o];
      if (pgrad) {
        double* wg = pgrad + o * in_;
        for (std::size_t i = 0; i < in_; ++i) wg[i] += u * x[i];
        if (with_bias_) pgrad[out_ * in_ + o] += u;
      }
      if (xgrad) {
        const double* row = w_.row(o);
        for (std::size_t i = 0; i < in_; ++i) xgrad[i] += u * row[i];
      }
    }
  }

  void init(InitScheme scheme, Rng& rng) override {
    std::fill(b_.begin(), b_.end(), 0.0);
    if (scheme == InitScheme::zeros) {
      std::fill(w_.data(), w_.data() + out_ * in_, 0.0);
      return;
    }
    const double a = detail::uniform_init_bound(in_, out_);
    for (std::size_t o = 0; o < out_; ++o)
      for (std::size_t i = 0; i < in_; ++i) w_(o, i) = rng.uniform(-a, a);
  }

  std::unique_ptr<Map> clone() const override { return std::make_unique<LinearMap>(*this); }

 private:
  std::size_t out_, in_;
  bool with_bias_;
  Matrix w_;
  Vec b_;
};

// p = sigmoid(w.x + b). Output is a single probability. Parameter layout:
// w, then bias (when enabled; default on).
class LogisticHead final : public Map {
 public:
  explicit LogisticHead(std::size_t in, bool with_bias = true)
      : in_(in), with_bias_(with_bias), w_(in, 0.0) {
    if (in == 0) throw std::invalid_argument("LogisticHead: zero dimension");
  }

  MapKind kind() const override { return MapKind::logistic; }
  std::size_t in_dim() const override { return in_; }
  std::size_t out_dim() const override { return 1; }
  std::size_t param_count() const override { return in_ + (with_bias_ ? 1 : 0); }
  bool has_bias() const { return with_bias_; }

  Vec& weights() { return w_; }
  const Vec& weights() const { return w_; }
  double& bias() { return b_; }
  double bias() const { return b_; }

  void get_params(double* out) const override {
    std::copy(w_.begin(), w_.end(), out);
    if (with_bias_) out[in_] = b_;
  }

  void set_params(const double* in) override {
    std::copy(in, in + in_, w_.begin());
    if (with_bias_) b_ = in[in_];
  }

  void forward(const double* x, double* y) const override {
    double t = with_bias_ ? b_ : 0.0;
    for (std::size_t i = 0; i < in_; ++i) t += w_[i] * x[i];
    y[0] = detail::sigmoid(t);
  }

  void backward(const double* x, const double* up, double* pgrad,
                double* xgrad) const override {
    double p;
    forward(x, &p);
    const double g = up[0] * p * (1.0 - p);
    if (pgrad) {
      for (std::size_t i = 0; i < in_; ++i) pgrad[i] += g * x[i];
      if (with_bias_) pgrad[in_] += g;
    }
    if (xgrad)
      for (std::size_t i = 0; i < in_; ++i) xgrad[i] += g * w_[i];
  }

  void init(InitScheme scheme, Rng& rng) override {
    b_ = 0.0;
    if (scheme == InitScheme::zeros) {
      std::fill(w_.begin(), w_.end(), 0.0);
      return;
    }
    const double a = detail::uniform_init_bound(in_, 1);
    for (double& w : w_) w = rng.uniform(-a, a);
  }

  std::unique_ptr<Map> clone() const override { return std::make_unique<LogisticHead>(*this); }

 private:
  std::size_t in_;
  bool with_bias_;
  Vec w_;
  double b_ = 0.0;
};

// Affine layers with a rectifier between consecutive layers (none after the
// last). The rectifier derivative at exactly 0 is taken as 0. Parameter
// layout: layer 0 params, layer 1 params, ...
class MlpStack final : public Map {
 public:
  // dims = {in, h1, ..., out}; every layer carries a bias.
  explicit MlpStack(const std::vector<std::size_t>& dims) {
    if (dims.size() < 2) throw std::invalid_argument("MlpStack: need at least two dims");
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
      layers_.emplace_back(dims[l + 1], dims[l], /*with_bias=*/true);
  }

  MapKind kind() const override { return MapKind::mlp; }
  std::size_t in_dim() const override { return layers_.front().in_dim(); }
  std::size_t out_dim() const override { return layers_.back().out_dim(); }

  std::size_t param_count() const override {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.param_count();
    return n;
  }

  const std::vector<LinearMap>& layers() const { return layers_; }

  void get_params(double* out) const override {
    for (const auto& l : layers_) {
      l.get_params(out);
      out += l.param_count();
    }
  }

  void set_params(const double* in) override {
    for (auto& l : layers_) {
      l.set_params(in);
      in += l.param_count();
    }
  }

  void forward(const double* x, double* y) const override {
    Vec cur(x, x + in_dim());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Vec next(layers_[l].out_dim());
      layers_[l].forward(cur.data(), next.data());
      if (l + 1 < layers_.size())
        for (double& v : next) v = v > 0.0 ? v : 0.0;
      cur = std::move(next);
    }
    std::copy(cur.begin(), cur.end(), y);
  }

  void backward(const double* x, const double* up, double* pgrad,
                double* xgrad) const override {
    const std::size_t L = layers_.size();
    // Recompute the forward pass, keeping pre-activations per layer.
    std::vector<Vec> inputs(L);   // input to each layer (post-rectifier)
    std::vector<Vec> pre(L);      // affine outputs before the rectifier
    Vec cur(x, x + in_dim());
    for (std::size_t l = 0; l < L; ++l) {
      inputs[l] = cur;
      Vec next(layers_[l].out_dim());
      layers_[l].forward(cur.data(), next.data());
      pre[l] = next;
      if (l + 1 < L)
        for (double& v : next) v = v > 0.0 ? v : 0.0;
      cur = std::move(next);
    }

    Vec grad(up, up + out_dim());
    std::size_t offset = param_count();
    for (std::size_t l = L; l-- > 0;) {
      if (l + 1 < L)  // gate through the rectifier; derivative at 0 is 0
        for (std::size_t i = 0; i < grad.size(); ++i)
          if (!(pre[l][i] > 0.0)) grad[i] = 0.0;
      offset -= layers_[l].param_count();
      Vec down(layers_[l].in_dim(), 0.0);
      layers_[l].backward(inputs[l].data(), grad.data(),
                          pgrad ? pgrad + offset : nullptr,
                          l == 0 && !xgrad ? nullptr : down.data());
      if (l == 0) {
        if (xgrad)
          for (std::size_t i = 0; i < down.size(); ++i) xgrad[i] += down[i];
      } else {
        grad = std::move(down);
      }
    }
  }

  void init(InitScheme scheme, Rng& rng) override {
    for (auto& l : layers_) l.init(scheme, rng);
  }

  std::unique_ptr<Map> clone() const override { return std::make_unique<MlpStack>(*this); }

 private:
  std::vector<LinearMap> layers_;
};

// The trained object: representation map phi, predictor psi (probability
// output), optional auxiliary map beta. Parameters of the three maps are
// disjoint by construction.
struct ModelStack {
  std::unique_ptr<Map> phi;
  std::unique_ptr<Map> psi;
  std::unique_ptr<Map> beta;  // may be null

  ModelStack() = default;
  ModelStack(std::unique_ptr<Map> phi_, std::unique_ptr<Map> psi_,
             std::unique_ptr<Map> beta_ = nullptr)
      : phi(std::move(phi_)), psi(std::move(psi_)), beta(std::move(beta_)) {}

  ModelStack(const ModelStack& o)
      : phi(o.phi ? o.phi->clone() : nullptr),
        psi(o.psi ? o.psi->clone() : nullptr),
        beta(o.beta ? o.beta->clone() : nullptr) {}

  ModelStack& operator=(const ModelStack& o) {
    if (this != &o) {
      phi = o.phi ? o.phi->clone() : nullptr;
      psi = o.psi ? o.psi->clone() : nullptr;
      beta = o.beta ? o.beta->clone() : nullptr;
    }
    return *this;
  }

  ModelStack(ModelStack&&) = default;
  ModelStack& operator=(ModelStack&&) = default;

  void init(InitScheme scheme, Rng& rng) {
    // Fixed order phi, psi, beta so a seed pins the draw.
    if (phi) phi->init(scheme, rng);
    if (psi) psi->init(scheme, rng);
    if (beta) beta->init(scheme, rng);
  }

  // p = psi(phi(x))
  double predict(const double* x) const {
    Vec s(phi->out_dim());
    phi->forward(x, s.data());
    Vec p(psi->out_dim());
    psi->forward(s.data(), p.data());
    return p[0];
  }

  double accuracy(const Matrix& x, const std::vector<int>& y) const {
    if (x.rows() != y.size() || x.rows() == 0)
      throw std::invalid_argument("accuracy: bad evaluation set");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const int pred = predict(x.row(i)) >= 0.5 ? 1 : 0;
      hits += (pred == y[i]);
    }
    return static_cast<double>(hits) / static_cast<double>(x.rows());
  }
};

}  // namespace sideinfo
