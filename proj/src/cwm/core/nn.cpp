#include "cwm/core/nn.hpp"

#include <cmath>

#include "cwm/core/error.hpp"

namespace cwm::nn {

void ParamList::append(const ParamList& other) {
  params_.insert(params_.end(), other.params_.begin(), other.params_.end());
  buffers_.insert(buffers_.end(), other.buffers_.begin(), other.buffers_.end());
}

index_t ParamList::count() const {
  index_t n = 0;
  for (const auto& p : params_) n += p.var.numel();
  return n;
}

void ParamList::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

Var make_param(Shape shape, Init init, index_t fan_in, index_t fan_out, Rng& rng) {
  Tensor t(std::move(shape));
  switch (init) {
    case Init::kZero:
      break;
    case Init::kGlorot: {
      const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
      for (real& v : t.values()) v = static_cast<real>(rng.uniform(-limit, limit));
      break;
    }
    case Init::kHe: {
      const double limit = std::sqrt(6.0 / double(fan_in));
      for (real& v : t.values()) v = static_cast<real>(rng.uniform(-limit, limit));
      break;
    }
  }
  return Var(std::move(t), true);
}

Linear::Linear(index_t in, index_t out, Rng& rng, Init init, bool bias) {
  weight_ = make_param({in, out}, init, in, out, rng);
  if (bias) bias_ = Var(Tensor(Shape{out}), true);
}

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.add(prefix + ".weight", weight_);
  if (bias_.defined()) out.add(prefix + ".bias", bias_);
}

Conv2d::Conv2d(index_t in, index_t out, int kernel, int stride, Rng& rng, bool bias)
    : kernel_(kernel), stride_(stride) {
  const index_t k2 = index_t(kernel) * kernel;
  weight_ = make_param({out, in, kernel, kernel}, Init::kHe, in * k2, out * k2, rng);
  if (bias) bias_ = Var(Tensor(Shape{out}), true);
}

void Conv2d::collect(const std::string& prefix, ParamList& out) const {
  out.add(prefix + ".weight", weight_);
  if (bias_.defined()) out.add(prefix + ".bias", bias_);
}

BatchNorm::BatchNorm(index_t channels)
    : gamma_(Tensor(Shape{channels}, real(1)), true), beta_(Tensor(Shape{channels}), true) {
  stats_.running_mean = Tensor(Shape{channels}, real(0));
  stats_.running_var = Tensor(Shape{channels}, real(1));
}

void BatchNorm::collect(const std::string& prefix, ParamList& out) {
  out.add(prefix + ".gamma", gamma_);
  out.add(prefix + ".beta", beta_);
  out.add_buffer(prefix + ".running_mean", &stats_.running_mean);
  out.add_buffer(prefix + ".running_var", &stats_.running_var);
}

DenseStack::DenseStack(index_t in, index_t width, int layers, Rng& rng) : out_width_(layers > 0 ? width : in) {
  index_t w = in;
  for (int i = 0; i < layers; ++i) {
    layers_.emplace_back(w, width, rng);
    w = width;
  }
}

Var DenseStack::operator()(const Var& x) const {
  Var h = x;
  for (const Linear& l : layers_) h = elu(l(h));
  return h;
}

void DenseStack::collect(const std::string& prefix, ParamList& out) const {
  for (size_t i = 0; i < layers_.size(); ++i) layers_[i].collect(prefix + ".h" + std::to_string(i), out);
}

Mlp::Mlp(index_t in, index_t hidden, int layers, index_t out, Rng& rng, bool zero_output)
    : hidden_(in, hidden, layers, rng),
      out_(hidden_.out_features(), out, rng, zero_output ? Init::kZero : Init::kGlorot) {}

void Mlp::collect(const std::string& prefix, ParamList& out) const {
  hidden_.collect(prefix, out);
  out_.collect(prefix + ".out", out);
}

GruCell::GruCell(index_t input, index_t size, Rng& rng) : proj_(input + size, 3 * size, rng), size_(size) {}

Var GruCell::operator()(const Var& x, const Var& h) const {
  const Var parts = proj_(concat_cols({x, h}));
  const Var reset = sigmoid(slice_cols(parts, 0, size_));
  const Var cand = tanh(mul(reset, slice_cols(parts, size_, 2 * size_)));
  const Var update = sigmoid(add_scalar(slice_cols(parts, 2 * size_, 3 * size_), real(-1)));
  // h' = update * cand + (1 - update) * h = h + update * (cand - h)
  return add(h, mul(update, sub(cand, h)));
}

void GruCell::collect(const std::string& prefix, ParamList& out) const { proj_.collect(prefix + ".proj", out); }

}  // namespace cwm::nn
