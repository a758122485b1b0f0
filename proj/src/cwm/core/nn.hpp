#pragma once

#include <string>
#include <vector>

#include "cwm/core/ops.hpp"
#include "cwm/core/rng.hpp"

namespace cwm::nn {

struct NamedParam {
  std::string name;
  Var var;
};

struct NamedBuffer {
  std::string name;
  Tensor* tensor;
};

/// Flat view over the learnable parameters (and non-learnable buffers such as
/// batch-norm running statistics) of one or more modules.
class ParamList {
 public:
  void add(std::string name, Var var) { params_.push_back({std::move(name), std::move(var)}); }
  void add_buffer(std::string name, Tensor* t) { buffers_.push_back({std::move(name), t}); }
  void append(const ParamList& other);

  const std::vector<NamedParam>& params() const { return params_; }
  const std::vector<NamedBuffer>& buffers() const { return buffers_; }
  std::vector<NamedParam>& params() { return params_; }

  index_t count() const;
  void zero_grad();

 private:
  std::vector<NamedParam> params_;
  std::vector<NamedBuffer> buffers_;
};

enum class Init { kGlorot, kHe, kZero };

Var make_param(Shape shape, Init init, index_t fan_in, index_t fan_out, Rng& rng);

class Linear {
 public:
  Linear() = default;
  Linear(index_t in, index_t out, Rng& rng, Init init = Init::kGlorot, bool bias = true);
  Var operator()(const Var& x) const { return linear(x, weight_, bias_); }
  void collect(const std::string& prefix, ParamList& out) const;
  index_t in_features() const { return weight_.dim(0); }
  index_t out_features() const { return weight_.dim(1); }

 private:
  Var weight_;
  Var bias_;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(index_t in, index_t out, int kernel, int stride, Rng& rng, bool bias = false);
  Var operator()(const Var& x) const { return conv2d(x, weight_, bias_, stride_, kernel_ / 2); }
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  Var weight_;
  Var bias_;
  int kernel_ = 3;
  int stride_ = 1;
};

class BatchNorm {
 public:
  BatchNorm() = default;
  explicit BatchNorm(index_t channels);
  Var operator()(const Var& x, bool training) { return batch_norm(x, gamma_, beta_, stats_, training); }
  void collect(const std::string& prefix, ParamList& out);

 private:
  Var gamma_;
  Var beta_;
  BatchNormStats stats_;
};

/// `layers` dense layers of width `width`, each followed by ELU.
class DenseStack {
 public:
  DenseStack() = default;
  DenseStack(index_t in, index_t width, int layers, Rng& rng);
  Var operator()(const Var& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
  index_t out_features() const { return out_width_; }

 private:
  std::vector<Linear> layers_;
  index_t out_width_ = 0;
};

/// Dense ELU network: `layers` hidden layers of width `hidden`, then a linear
/// output layer.
class Mlp {
 public:
  Mlp() = default;
  Mlp(index_t in, index_t hidden, int layers, index_t out, Rng& rng, bool zero_output = false);
  Var operator()(const Var& x) const { return out_(hidden_(x)); }
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  DenseStack hidden_;
  Linear out_;
};

/// Gated recurrent cell over a single fused projection of [input, state]:
///   r, c, u = split(W [x, h] + b)
///   h' = sigmoid(u - 1) * tanh(sigmoid(r) * c) + (1 - sigmoid(u - 1)) * h
/// The -1 update bias keeps the cell close to copying its state at init.
class GruCell {
 public:
  GruCell() = default;
  GruCell(index_t input, index_t size, Rng& rng);
  Var operator()(const Var& x, const Var& h) const;
  void collect(const std::string& prefix, ParamList& out) const;
  index_t size() const { return size_; }

 private:
  Linear proj_;
  index_t size_ = 0;
};

}  // namespace cwm::nn
