#include "cwm/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "cwm/core/blas.hpp"
#include "cwm/core/error.hpp"

namespace cwm {

namespace {

// Number of leading repetitions of `b` inside `a`; throws unless b's shape is
// a suffix of a's shape.
index_t broadcast_outer(const Tensor& a, const Tensor& b, const char* op) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa == sb) return 1;
  bool ok = sb.size() <= sa.size();
  for (size_t i = 0; ok && i < sb.size(); ++i) ok = sa[sa.size() - sb.size() + i] == sb[i];
  if (!ok || b.numel() == 0)
    throw_runtime(std::string(op) + ": cannot broadcast " + shape_str(sb) + " onto " + shape_str(sa));
  return a.numel() / b.numel();
}

template <typename F, typename DF>
Var unary(const Var& x, F f, DF df) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  const index_t n = xv.numel();
  for (index_t i = 0; i < n; ++i) out[i] = f(xv[i]);
  return make_op(std::move(out), {x}, [px = x.node(), df](Node& self) {
    if (!px->requires_grad) return;
    Tensor& gx = px->ensure_grad();
    const index_t n = self.value.numel();
    for (index_t i = 0; i < n; ++i) gx[i] += self.grad[i] * df(px->value[i], self.value[i]);
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const index_t outer = broadcast_outer(av, bv, "add");
  const index_t inner = bv.numel();
  Tensor out = av;
  for (index_t o = 0; o < outer; ++o)
    for (index_t i = 0; i < inner; ++i) out[o * inner + i] += bv[i];
  return make_op(std::move(out), {a, b}, [pa = a.node(), pb = b.node(), outer, inner](Node& self) {
    if (pa->requires_grad) pa->ensure_grad() += self.grad;
    if (pb->requires_grad) {
      Tensor& gb = pb->ensure_grad();
      for (index_t o = 0; o < outer; ++o)
        for (index_t i = 0; i < inner; ++i) gb[i] += self.grad[o * inner + i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const index_t outer = broadcast_outer(av, bv, "sub");
  const index_t inner = bv.numel();
  Tensor out = av;
  for (index_t o = 0; o < outer; ++o)
    for (index_t i = 0; i < inner; ++i) out[o * inner + i] -= bv[i];
  return make_op(std::move(out), {a, b}, [pa = a.node(), pb = b.node(), outer, inner](Node& self) {
    if (pa->requires_grad) pa->ensure_grad() += self.grad;
    if (pb->requires_grad) {
      Tensor& gb = pb->ensure_grad();
      for (index_t o = 0; o < outer; ++o)
        for (index_t i = 0; i < inner; ++i) gb[i] -= self.grad[o * inner + i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const index_t outer = broadcast_outer(av, bv, "mul");
  const index_t inner = bv.numel();
  Tensor out(av.shape());
  for (index_t o = 0; o < outer; ++o)
    for (index_t i = 0; i < inner; ++i) out[o * inner + i] = av[o * inner + i] * bv[i];
  return make_op(std::move(out), {a, b}, [pa = a.node(), pb = b.node(), outer, inner](Node& self) {
    const Tensor& g = self.grad;
    if (pa->requires_grad) {
      Tensor& ga = pa->ensure_grad();
      for (index_t o = 0; o < outer; ++o)
        for (index_t i = 0; i < inner; ++i) ga[o * inner + i] += g[o * inner + i] * pb->value[i];
    }
    if (pb->requires_grad) {
      Tensor& gb = pb->ensure_grad();
      for (index_t o = 0; o < outer; ++o)
        for (index_t i = 0; i < inner; ++i) gb[i] += g[o * inner + i] * pa->value[o * inner + i];
    }
  });
}

Var scale(const Var& a, real s) {
  return unary(a, [s](real v) { return v * s; }, [s](real, real) { return s; });
}

Var add_scalar(const Var& a, real s) {
  return unary(a, [s](real v) { return v + s; }, [](real, real) { return real(1); });
}

Var neg(const Var& a) { return scale(a, real(-1)); }

Var relu(const Var& x) {
  return unary(
      x, [](real v) { return v > 0 ? v : real(0); }, [](real v, real) { return v > 0 ? real(1) : real(0); });
}

Var elu(const Var& x) {
  return unary(
      x, [](real v) { return v > 0 ? v : std::expm1(v); },
      [](real v, real y) { return v > 0 ? real(1) : y + real(1); });
}

Var tanh(const Var& x) {
  return unary(x, [](real v) { return std::tanh(v); }, [](real, real y) { return real(1) - y * y; });
}

Var sigmoid(const Var& x) {
  return unary(
      x, [](real v) { return real(1) / (real(1) + std::exp(-v)); }, [](real, real y) { return y * (real(1) - y); });
}

Var exp(const Var& x) {
  return unary(x, [](real v) { return std::exp(v); }, [](real, real y) { return y; });
}

Var log(const Var& x) {
  return unary(x, [](real v) { return std::log(v); }, [](real v, real) { return real(1) / v; });
}

Var softplus(const Var& x) {
  return unary(
      x, [](real v) { return v > 20 ? v : std::log1p(std::exp(v)); },
      [](real v, real) { return real(1) / (real(1) + std::exp(-v)); });
}

Var square(const Var& x) {
  return unary(x, [](real v) { return v * v; }, [](real v, real) { return real(2) * v; });
}

Var sum(const Var& x) {
  double s = 0;
  for (real v : x.value().values()) s += v;
  return make_op(Tensor::scalar(static_cast<real>(s)), {x}, [px = x.node()](Node& self) {
    if (!px->requires_grad) return;
    Tensor& gx = px->ensure_grad();
    const real g = self.grad[0];
    for (index_t i = 0; i < gx.numel(); ++i) gx[i] += g;
  });
}

Var mean(const Var& x) {
  const index_t n = x.numel();
  if (n == 0) throw_runtime("mean of an empty tensor");
  return scale(sum(x), real(1) / static_cast<real>(n));
}

Var sum_rows(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.rank() < 1) throw_runtime("sum_rows needs rank >= 1");
  const index_t rows = xv.dim(0);
  const index_t cols = rows ? xv.numel() / rows : 0;
  Tensor out(Shape{rows});
  for (index_t r = 0; r < rows; ++r) {
    double s = 0;
    for (index_t c = 0; c < cols; ++c) s += xv[r * cols + c];
    out[r] = static_cast<real>(s);
  }
  return make_op(std::move(out), {x}, [px = x.node(), rows, cols](Node& self) {
    if (!px->requires_grad) return;
    Tensor& gx = px->ensure_grad();
    for (index_t r = 0; r < rows; ++r)
      for (index_t c = 0; c < cols; ++c) gx[r * cols + c] += self.grad[r];
  });
}

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
    throw_runtime("matmul shape mismatch " + shape_str(av.shape()) + " x " + shape_str(bv.shape()));
  const index_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out(Shape{m, n});
  blas::gemm(false, false, m, n, k, 1, av.data(), k, bv.data(), n, 0, out.data(), n);
  return make_op(std::move(out), {a, b}, [pa = a.node(), pb = b.node(), m, k, n](Node& self) {
    if (pa->requires_grad)
      blas::gemm(false, true, m, k, n, 1, self.grad.data(), n, pb->value.data(), n, 1, pa->ensure_grad().data(), k);
    if (pb->requires_grad)
      blas::gemm(true, false, k, n, m, 1, pa->value.data(), k, self.grad.data(), n, 1, pb->ensure_grad().data(), n);
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(0))
    throw_runtime("linear shape mismatch " + shape_str(xv.shape()) + " x " + shape_str(wv.shape()));
  const index_t m = xv.dim(0), k = xv.dim(1), n = wv.dim(1);
  Tensor out(Shape{m, n});
  const bool has_bias = bias.defined();
  if (has_bias) {
    if (bias.numel() != n) throw_runtime("linear bias size mismatch");
    for (index_t r = 0; r < m; ++r) std::memcpy(out.data() + r * n, bias.value().data(), sizeof(real) * size_t(n));
  }
  blas::gemm(false, false, m, n, k, 1, xv.data(), k, wv.data(), n, has_bias ? 1 : 0, out.data(), n);
  std::vector<Var> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_op(std::move(out), std::move(inputs),
                 [px = x.node(), pw = weight.node(), pb = has_bias ? bias.node() : nullptr, m, k, n](Node& self) {
                   const real* g = self.grad.data();
                   if (px->requires_grad)
                     blas::gemm(false, true, m, k, n, 1, g, n, pw->value.data(), n, 1, px->ensure_grad().data(), k);
                   if (pw->requires_grad)
                     blas::gemm(true, false, k, n, m, 1, px->value.data(), k, g, n, 1, pw->ensure_grad().data(), n);
                   if (pb && pb->requires_grad) {
                     Tensor& gb = pb->ensure_grad();
                     for (index_t r = 0; r < m; ++r)
                       for (index_t c = 0; c < n; ++c) gb[c] += g[r * n + c];
                   }
                 });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_op(std::move(out), {x}, [px = x.node()](Node& self) {
    if (px->requires_grad) px->ensure_grad() += self.grad;
  });
}

Var concat_cols(const std::vector<Var>& xs) {
  if (xs.empty()) throw_runtime("concat_cols of nothing");
  const index_t rows = xs[0].value().dim(0);
  std::vector<index_t> widths;
  index_t total = 0;
  for (const Var& v : xs) {
    if (v.value().rank() != 2 || v.value().dim(0) != rows)
      throw_runtime("concat_cols expects 2-D inputs with equal rows, got " + shape_str(v.shape()));
    widths.push_back(v.value().dim(1));
    total += widths.back();
  }
  Tensor out(Shape{rows, total});
  index_t offset = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const Tensor& v = xs[i].value();
    for (index_t r = 0; r < rows; ++r)
      std::memcpy(out.data() + r * total + offset, v.data() + r * widths[i], sizeof(real) * size_t(widths[i]));
    offset += widths[i];
  }
  std::vector<Node*> nodes;
  for (const Var& v : xs) nodes.push_back(v.node());
  return make_op(std::move(out), xs, [nodes, widths, rows, total](Node& self) {
    index_t offset = 0;
    for (size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i]->requires_grad) {
        Tensor& g = nodes[i]->ensure_grad();
        for (index_t r = 0; r < rows; ++r)
          for (index_t c = 0; c < widths[i]; ++c) g[r * widths[i] + c] += self.grad[r * total + offset + c];
      }
      offset += widths[i];
    }
  });
}

Var slice_cols(const Var& x, index_t begin, index_t end) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || begin < 0 || end > xv.dim(1) || begin > end)
    throw_runtime("slice_cols out of range for " + shape_str(xv.shape()));
  const index_t rows = xv.dim(0), cols = xv.dim(1), width = end - begin;
  Tensor out(Shape{rows, width});
  for (index_t r = 0; r < rows; ++r)
    std::memcpy(out.data() + r * width, xv.data() + r * cols + begin, sizeof(real) * size_t(width));
  return make_op(std::move(out), {x}, [px = x.node(), rows, cols, begin, width](Node& self) {
    if (!px->requires_grad) return;
    Tensor& g = px->ensure_grad();
    for (index_t r = 0; r < rows; ++r)
      for (index_t c = 0; c < width; ++c) g[r * cols + begin + c] += self.grad[r * width + c];
  });
}

Var stack_axis1(const std::vector<Var>& xs) {
  if (xs.empty()) throw_runtime("stack_axis1 of nothing");
  const Shape& s0 = xs[0].shape();
  if (s0.empty()) throw_runtime("stack_axis1 needs rank >= 1");
  for (const Var& v : xs)
    if (v.shape() != s0) throw_runtime("stack_axis1 shape mismatch");
  const index_t b = s0[0];
  const index_t inner = b ? xs[0].numel() / b : 0;
  const index_t n = static_cast<index_t>(xs.size());
  Shape shape{b, n};
  shape.insert(shape.end(), s0.begin() + 1, s0.end());
  Tensor out(shape);
  for (index_t i = 0; i < n; ++i) {
    const Tensor& v = xs[size_t(i)].value();
    for (index_t r = 0; r < b; ++r)
      std::memcpy(out.data() + (r * n + i) * inner, v.data() + r * inner, sizeof(real) * size_t(inner));
  }
  std::vector<Node*> nodes;
  for (const Var& v : xs) nodes.push_back(v.node());
  return make_op(std::move(out), xs, [nodes, b, n, inner](Node& self) {
    for (index_t i = 0; i < n; ++i) {
      Node* p = nodes[size_t(i)];
      if (!p->requires_grad) continue;
      Tensor& g = p->ensure_grad();
      for (index_t r = 0; r < b; ++r)
        for (index_t c = 0; c < inner; ++c) g[r * inner + c] += self.grad[(r * n + i) * inner + c];
    }
  });
}

Var select_axis1(const Var& x, index_t i) {
  const Shape& s = x.shape();
  if (s.size() < 2 || i < 0 || i >= s[1]) throw_runtime("select_axis1 out of range for " + shape_str(s));
  const index_t b = s[0], n = s[1];
  const index_t inner = (b * n != 0) ? x.numel() / (b * n) : 0;
  Shape shape{b};
  shape.insert(shape.end(), s.begin() + 2, s.end());
  Tensor out(shape);
  for (index_t r = 0; r < b; ++r)
    std::memcpy(out.data() + r * inner, x.value().data() + (r * n + i) * inner, sizeof(real) * size_t(inner));
  return make_op(std::move(out), {x}, [px = x.node(), b, n, i, inner](Node& self) {
    if (!px->requires_grad) return;
    Tensor& g = px->ensure_grad();
    for (index_t r = 0; r < b; ++r)
      for (index_t c = 0; c < inner; ++c) g[(r * n + i) * inner + c] += self.grad[r * inner + c];
  });
}

Var repeat_rows(const Var& x, index_t r) {
  const Shape& s = x.shape();
  if (s.empty() || r < 1) throw_runtime("repeat_rows needs rank >= 1 and r >= 1");
  const index_t b = s[0];
  const index_t inner = b ? x.numel() / b : 0;
  Shape shape = s;
  shape[0] = b * r;
  Tensor out(shape);
  for (index_t i = 0; i < b; ++i)
    for (index_t j = 0; j < r; ++j)
      std::memcpy(out.data() + (i * r + j) * inner, x.value().data() + i * inner, sizeof(real) * size_t(inner));
  return make_op(std::move(out), {x}, [px = x.node(), b, r, inner](Node& self) {
    if (!px->requires_grad) return;
    Tensor& g = px->ensure_grad();
    for (index_t i = 0; i < b; ++i)
      for (index_t j = 0; j < r; ++j)
        for (index_t c = 0; c < inner; ++c) g[i * inner + c] += self.grad[(i * r + j) * inner + c];
  });
}

Var softmax_last(const Var& x) {
  const Tensor& xv = x.value();
  const index_t k = xv.dim(-1);
  const index_t rows = k ? xv.numel() / k : 0;
  Tensor out(xv.shape());
  for (index_t r = 0; r < rows; ++r) {
    const real* in = xv.data() + r * k;
    real* o = out.data() + r * k;
    const real m = *std::max_element(in, in + k);
    real z = 0;
    for (index_t j = 0; j < k; ++j) z += (o[j] = std::exp(in[j] - m));
    for (index_t j = 0; j < k; ++j) o[j] /= z;
  }
  return make_op(std::move(out), {x}, [px = x.node(), rows, k](Node& self) {
    if (!px->requires_grad) return;
    Tensor& g = px->ensure_grad();
    for (index_t r = 0; r < rows; ++r) {
      const real* y = self.value.data() + r * k;
      const real* gy = self.grad.data() + r * k;
      real dot = 0;
      for (index_t j = 0; j < k; ++j) dot += y[j] * gy[j];
      for (index_t j = 0; j < k; ++j) g[r * k + j] += y[j] * (gy[j] - dot);
    }
  });
}

Var log_softmax_last(const Var& x) {
  const Tensor& xv = x.value();
  const index_t k = xv.dim(-1);
  const index_t rows = k ? xv.numel() / k : 0;
  Tensor out(xv.shape());
  for (index_t r = 0; r < rows; ++r) {
    const real* in = xv.data() + r * k;
    real* o = out.data() + r * k;
    const real m = *std::max_element(in, in + k);
    real z = 0;
    for (index_t j = 0; j < k; ++j) z += std::exp(in[j] - m);
    const real lz = m + std::log(z);
    for (index_t j = 0; j < k; ++j) o[j] = in[j] - lz;
  }
  return make_op(std::move(out), {x}, [px = x.node(), rows, k](Node& self) {
    if (!px->requires_grad) return;
    Tensor& g = px->ensure_grad();
    for (index_t r = 0; r < rows; ++r) {
      const real* y = self.value.data() + r * k;
      const real* gy = self.grad.data() + r * k;
      real total = 0;
      for (index_t j = 0; j < k; ++j) total += gy[j];
      for (index_t j = 0; j < k; ++j) g[r * k + j] += gy[j] - std::exp(y[j]) * total;
    }
  });
}

Var straight_through(const Tensor& sample, const Var& probs, const Tensor& probs_ref) {
  const Tensor& pv = probs.value();
  if (!sample.same_shape(pv) || !probs_ref.same_shape(pv))
    throw_runtime("straight_through shape mismatch " + shape_str(sample.shape()) + " vs " + shape_str(pv.shape()));
  Tensor out(pv.shape());
  for (index_t i = 0; i < out.numel(); ++i) out[i] = sample[i] + (pv[i] - probs_ref[i]);
  return make_op(std::move(out), {probs}, [pp = probs.node()](Node& self) {
    if (pp->requires_grad) pp->ensure_grad() += self.grad;
  });
}

}  // namespace cwm
