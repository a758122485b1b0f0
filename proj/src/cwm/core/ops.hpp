#pragma once

#include <vector>

#include "cwm/core/autograd.hpp"

namespace cwm {

// Binary ops accept `b` with the same shape as `a`, or with a shape equal to
// a trailing suffix of `a`'s shape (broadcast over leading dimensions).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);

Var scale(const Var& a, real s);
Var add_scalar(const Var& a, real s);
Var neg(const Var& a);

Var relu(const Var& x);
Var elu(const Var& x);
Var tanh(const Var& x);
Var sigmoid(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var softplus(const Var& x);
Var square(const Var& x);

/// Sum of all elements, shape (1).
Var sum(const Var& x);
Var mean(const Var& x);
/// Reduces every dimension but the first: (n, ...) -> (n).
Var sum_rows(const Var& x);

/// (m, k) x (k, n) -> (m, n)
Var matmul(const Var& a, const Var& b);
/// x (n, in), weight (in, out), bias (out) -> (n, out). `bias` may be undefined.
Var linear(const Var& x, const Var& weight, const Var& bias);

Var reshape(const Var& x, Shape shape);
/// Concatenates 2-D tensors along columns.
Var concat_cols(const std::vector<Var>& xs);
/// Columns [begin, end) of a 2-D tensor.
Var slice_cols(const Var& x, index_t begin, index_t end);
/// Stacks n tensors of shape (b, ...) into (b, n, ...).
Var stack_axis1(const std::vector<Var>& xs);
/// Inverse of stack_axis1 for one index: (b, n, ...) -> (b, ...).
Var select_axis1(const Var& x, index_t i);
/// (b, ...) -> (b * r, ...), each row repeated r times consecutively.
Var repeat_rows(const Var& x, index_t r);

/// Softmax / log-softmax over the last dimension.
Var softmax_last(const Var& x);
Var log_softmax_last(const Var& x);

/// Forward value `sample + (probs - probs_ref)`; gradient passes to `probs`
/// unchanged. With `probs_ref == probs.value()` the forward value is `sample`.
Var straight_through(const Tensor& sample, const Var& probs, const Tensor& probs_ref);

// Image ops, NCHW layout.

/// Square kernel, symmetric zero padding. `bias` may be undefined.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad);
Var avg_pool2(const Var& x);
Var upsample_nearest2(const Var& x);

struct BatchNormStats {
  Tensor running_mean;
  Tensor running_var;
};
/// Normalizes over every axis except axis 1. Training mode uses batch
/// statistics and updates `stats`; evaluation mode uses `stats`.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormStats& stats, bool training,
               real momentum = real(0.1), real eps = real(1e-5));

/// (n, c, h, w) -> (n, h*w, c)
Var nchw_to_tokens(const Var& x);
/// (n, h*w, c) -> (n, c, h, w)
Var tokens_to_nchw(const Var& x, index_t h, index_t w);
/// Picks `k` rows per batch element: x (n, l, c), idx of size n*k -> (n, k, c).
Var gather_tokens(const Var& x, const std::vector<index_t>& idx, index_t k);
/// Picks rows of a shared table: table (l, c), idx of size n*k -> (n, k, c).
Var gather_table_rows(const Var& table, const std::vector<index_t>& idx, index_t n, index_t k);
/// Scaled dot-product attention split over `heads`. q (n, lq, c), k/v (n, lk, c).
/// An empty key set yields zeros.
Var multihead_attention(const Var& q, const Var& k, const Var& v, int heads);

}  // namespace cwm
