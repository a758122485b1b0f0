#include <algorithm>
#include <cmath>
#include <cstring>

#include "cwm/core/blas.hpp"
#include "cwm/core/error.hpp"
#include "cwm/core/ops.hpp"

namespace cwm {

namespace {

struct ConvGeom {
  index_t n, ci, h, w, co, k, ho, wo;
  int stride, pad;
  index_t col_rows() const { return ci * k * k; }
  index_t col_cols() const { return ho * wo; }
};

void im2col(const real* img, const ConvGeom& g, real* col) {
  const index_t hw_out = g.ho * g.wo;
  for (index_t c = 0; c < g.ci; ++c) {
    const real* plane = img + c * g.h * g.w;
    for (index_t ky = 0; ky < g.k; ++ky) {
      for (index_t kx = 0; kx < g.k; ++kx) {
        real* dst = col + ((c * g.k + ky) * g.k + kx) * hw_out;
        for (index_t oy = 0; oy < g.ho; ++oy) {
          const index_t iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst + oy * g.wo, dst + (oy + 1) * g.wo, real(0));
            continue;
          }
          const real* row = plane + iy * g.w;
          for (index_t ox = 0; ox < g.wo; ++ox) {
            const index_t ix = ox * g.stride - g.pad + kx;
            dst[oy * g.wo + ox] = (ix >= 0 && ix < g.w) ? row[ix] : real(0);
          }
        }
      }
    }
  }
}

void col2im(const real* col, const ConvGeom& g, real* img) {
  const index_t hw_out = g.ho * g.wo;
  for (index_t c = 0; c < g.ci; ++c) {
    real* plane = img + c * g.h * g.w;
    for (index_t ky = 0; ky < g.k; ++ky) {
      for (index_t kx = 0; kx < g.k; ++kx) {
        const real* src = col + ((c * g.k + ky) * g.k + kx) * hw_out;
        for (index_t oy = 0; oy < g.ho; ++oy) {
          const index_t iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          real* row = plane + iy * g.w;
          for (index_t ox = 0; ox < g.wo; ++ox) {
            const index_t ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) row[ix] += src[oy * g.wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  if (xv.rank() != 4 || wv.rank() != 4 || wv.dim(1) != xv.dim(1) || wv.dim(2) != wv.dim(3))
    throw_runtime("conv2d shape mismatch " + shape_str(xv.shape()) + " with kernel " + shape_str(wv.shape()));
  ConvGeom g{};
  g.n = xv.dim(0);
  g.ci = xv.dim(1);
  g.h = xv.dim(2);
  g.w = xv.dim(3);
  g.co = wv.dim(0);
  g.k = wv.dim(2);
  g.stride = stride;
  g.pad = pad;
  g.ho = (g.h + 2 * pad - g.k) / stride + 1;
  g.wo = (g.w + 2 * pad - g.k) / stride + 1;
  if (g.ho <= 0 || g.wo <= 0) throw_runtime("conv2d output would be empty");
  const bool has_bias = bias.defined();

  Tensor out(Shape{g.n, g.co, g.ho, g.wo});
  const bool pointwise = g.k == 1 && stride == 1 && pad == 0;
  std::vector<real> col(pointwise ? 0 : size_t(g.col_rows() * g.col_cols()));
  const index_t in_stride = g.ci * g.h * g.w;
  const index_t out_stride = g.co * g.ho * g.wo;
  for (index_t i = 0; i < g.n; ++i) {
    const real* src = xv.data() + i * in_stride;
    if (!pointwise) {
      im2col(src, g, col.data());
      src = col.data();
    }
    real* dst = out.data() + i * out_stride;
    if (has_bias) {
      for (index_t c = 0; c < g.co; ++c) std::fill(dst + c * g.ho * g.wo, dst + (c + 1) * g.ho * g.wo, bias.value()[c]);
    }
    blas::gemm(false, false, g.co, g.col_cols(), g.col_rows(), 1, wv.data(), g.col_rows(), src, g.col_cols(),
               has_bias ? 1 : 0, dst, g.col_cols());
  }

  std::vector<Var> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_op(std::move(out), std::move(inputs),
                 [px = x.node(), pw = weight.node(), pb = has_bias ? bias.node() : nullptr, g, pointwise, in_stride,
                  out_stride](Node& self) {
                   const index_t rows = g.col_rows(), cols = g.col_cols();
                   std::vector<real> col(pointwise ? 0 : size_t(rows * cols));
                   std::vector<real> dcol(pointwise ? 0 : size_t(rows * cols));
                   real* gw = pw->requires_grad ? pw->ensure_grad().data() : nullptr;
                   real* gx = px->requires_grad ? px->ensure_grad().data() : nullptr;
                   for (index_t i = 0; i < g.n; ++i) {
                     const real* go = self.grad.data() + i * out_stride;
                     if (gw) {
                       const real* src = px->value.data() + i * in_stride;
                       if (!pointwise) {
                         im2col(src, g, col.data());
                         src = col.data();
                       }
                       blas::gemm(false, true, g.co, rows, cols, 1, go, cols, src, cols, 1, gw, rows);
                     }
                     if (gx) {
                       if (pointwise) {
                         blas::gemm(true, false, rows, cols, g.co, 1, pw->value.data(), rows, go, cols, 1,
                                    gx + i * in_stride, cols);
                       } else {
                         blas::gemm(true, false, rows, cols, g.co, 1, pw->value.data(), rows, go, cols, 0, dcol.data(),
                                    cols);
                         col2im(dcol.data(), g, gx + i * in_stride);
                       }
                     }
                   }
                   if (pb && pb->requires_grad) {
                     Tensor& gb = pb->ensure_grad();
                     const index_t hw = g.ho * g.wo;
                     for (index_t i = 0; i < g.n; ++i)
                       for (index_t c = 0; c < g.co; ++c) {
                         const real* go = self.grad.data() + i * out_stride + c * hw;
                         real s = 0;
                         for (index_t j = 0; j < hw; ++j) s += go[j];
                         gb[c] += s;
                       }
                   }
                 });
}

Var avg_pool2(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 4 || xv.dim(2) % 2 || xv.dim(3) % 2)
    throw_runtime("avg_pool2 needs NCHW with even spatial size, got " + shape_str(xv.shape()));
  const index_t planes = xv.dim(0) * xv.dim(1), h = xv.dim(2), w = xv.dim(3), ho = h / 2, wo = w / 2;
  Tensor out(Shape{xv.dim(0), xv.dim(1), ho, wo});
  for (index_t p = 0; p < planes; ++p) {
    const real* in = xv.data() + p * h * w;
    real* o = out.data() + p * ho * wo;
    for (index_t y = 0; y < ho; ++y)
      for (index_t xx = 0; xx < wo; ++xx)
        o[y * wo + xx] = real(0.25) * (in[2 * y * w + 2 * xx] + in[2 * y * w + 2 * xx + 1] +
                                       in[(2 * y + 1) * w + 2 * xx] + in[(2 * y + 1) * w + 2 * xx + 1]);
  }
  return make_op(std::move(out), {x}, [px = x.node(), planes, h, w, ho, wo](Node& self) {
    if (!px->requires_grad) return;
    Tensor& g = px->ensure_grad();
    for (index_t p = 0; p < planes; ++p) {
      real* gi = g.data() + p * h * w;
      const real* go = self.grad.data() + p * ho * wo;
      for (index_t y = 0; y < ho; ++y)
        for (index_t xx = 0; xx < wo; ++xx) {
          const real v = real(0.25) * go[y * wo + xx];
          gi[2 * y * w + 2 * xx] += v;
          gi[2 * y * w + 2 * xx + 1] += v;
          gi[(2 * y + 1) * w + 2 * xx] += v;
          gi[(2 * y + 1) * w + 2 * xx + 1] += v;
        }
    }
  });
}

Var upsample_nearest2(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 4) throw_runtime("upsample_nearest2 needs NCHW, got " + shape_str(xv.shape()));
  const index_t planes = xv.dim(0) * xv.dim(1), h = xv.dim(2), w = xv.dim(3), ho = 2 * h, wo = 2 * w;
  Tensor out(Shape{xv.dim(0), xv.dim(1), ho, wo});
  for (index_t p = 0; p < planes; ++p) {
    const real* in = xv.data() + p * h * w;
    real* o = out.data() + p * ho * wo;
    for (index_t y = 0; y < ho; ++y)
      for (index_t xx = 0; xx < wo; ++xx) o[y * wo + xx] = in[(y / 2) * w + xx / 2];
  }
  return make_op(std::move(out), {x}, [px = x.node(), planes, h, w, ho, wo](Node& self) {
    if (!px->requires_grad) return;
    Tensor& g = px->ensure_grad();
    for (index_t p = 0; p < planes; ++p) {
      real* gi = g.data() + p * h * w;
      const real* go = self.grad.data() + p * ho * wo;
      for (index_t y = 0; y < ho; ++y)
        for (index_t xx = 0; xx < wo; ++xx) gi[(y / 2) * w + xx / 2] += go[y * wo + xx];
    }
  });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormStats& stats, bool training, real momentum,
               real eps) {
  const Tensor& xv = x.value();
  if (xv.rank() < 2) throw_runtime("batch_norm needs rank >= 2");
  const index_t n = xv.dim(0), c = xv.dim(1);
  const index_t inner = (n * c != 0) ? xv.numel() / (n * c) : 0;
  const index_t count = n * inner;
  if (gamma.numel() != c || beta.numel() != c) throw_runtime("batch_norm parameter size mismatch");
  if (stats.running_mean.numel() != c) {
    stats.running_mean = Tensor(Shape{c}, real(0));
    stats.running_var = Tensor(Shape{c}, real(1));
  }

  Tensor mean(Shape{c}), inv_std(Shape{c});
  for (index_t ch = 0; ch < c; ++ch) {
    if (training) {
      double s = 0, s2 = 0;
      for (index_t i = 0; i < n; ++i) {
        const real* p = xv.data() + (i * c + ch) * inner;
        for (index_t j = 0; j < inner; ++j) s += p[j];
      }
      const double mu = count ? s / double(count) : 0.0;
      for (index_t i = 0; i < n; ++i) {
        const real* p = xv.data() + (i * c + ch) * inner;
        for (index_t j = 0; j < inner; ++j) {
          const double d = p[j] - mu;
          s2 += d * d;
        }
      }
      const double var = count ? s2 / double(count) : 0.0;
      mean[ch] = static_cast<real>(mu);
      inv_std[ch] = static_cast<real>(1.0 / std::sqrt(var + eps));
      const double unbiased = count > 1 ? s2 / double(count - 1) : var;
      stats.running_mean[ch] = (1 - momentum) * stats.running_mean[ch] + momentum * real(mu);
      stats.running_var[ch] = (1 - momentum) * stats.running_var[ch] + momentum * real(unbiased);
    } else {
      mean[ch] = stats.running_mean[ch];
      inv_std[ch] = real(1) / std::sqrt(stats.running_var[ch] + eps);
    }
  }

  Tensor xhat(xv.shape()), out(xv.shape());
  for (index_t i = 0; i < n; ++i)
    for (index_t ch = 0; ch < c; ++ch) {
      const index_t base = (i * c + ch) * inner;
      const real g = gamma.value()[ch], b = beta.value()[ch], mu = mean[ch], is = inv_std[ch];
      for (index_t j = 0; j < inner; ++j) {
        const real h = (xv[base + j] - mu) * is;
        xhat[base + j] = h;
        out[base + j] = g * h + b;
      }
    }

  return make_op(std::move(out), {x, gamma, beta},
                 [px = x.node(), pg = gamma.node(), pb = beta.node(), xhat = std::move(xhat),
                  inv_std = std::move(inv_std), n, c, inner, count, training](Node& self) {
                   const Tensor& go = self.grad;
                   Tensor dgamma(Shape{c}), dbeta(Shape{c});
                   for (index_t i = 0; i < n; ++i)
                     for (index_t ch = 0; ch < c; ++ch) {
                       const index_t base = (i * c + ch) * inner;
                       for (index_t j = 0; j < inner; ++j) {
                         dgamma[ch] += go[base + j] * xhat[base + j];
                         dbeta[ch] += go[base + j];
                       }
                     }
                   if (pg->requires_grad) pg->ensure_grad() += dgamma;
                   if (pb->requires_grad) pb->ensure_grad() += dbeta;
                   if (!px->requires_grad) return;
                   Tensor& gx = px->ensure_grad();
                   for (index_t i = 0; i < n; ++i)
                     for (index_t ch = 0; ch < c; ++ch) {
                       const index_t base = (i * c + ch) * inner;
                       const real scale = pg->value[ch] * inv_std[ch];
                       if (training) {
                         const real inv_count = real(1) / real(count);
                         const real mg = dbeta[ch] * inv_count, mgh = dgamma[ch] * inv_count;
                         for (index_t j = 0; j < inner; ++j)
                           gx[base + j] += scale * (go[base + j] - mg - xhat[base + j] * mgh);
                       } else {
                         for (index_t j = 0; j < inner; ++j) gx[base + j] += scale * go[base + j];
                       }
                     }
                 });
}

Var nchw_to_tokens(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 4) throw_runtime("nchw_to_tokens needs rank 4");
  const index_t n = xv.dim(0), c = xv.dim(1), hw = xv.dim(2) * xv.dim(3);
  Tensor out(Shape{n, hw, c});
  for (index_t i = 0; i < n; ++i)
    for (index_t ch = 0; ch < c; ++ch)
      for (index_t p = 0; p < hw; ++p) out[(i * hw + p) * c + ch] = xv[(i * c + ch) * hw + p];
  return make_op(std::move(out), {x}, [px = x.node(), n, c, hw](Node& self) {
    if (!px->requires_grad) return;
    Tensor& g = px->ensure_grad();
    for (index_t i = 0; i < n; ++i)
      for (index_t ch = 0; ch < c; ++ch)
        for (index_t p = 0; p < hw; ++p) g[(i * c + ch) * hw + p] += self.grad[(i * hw + p) * c + ch];
  });
}

Var tokens_to_nchw(const Var& x, index_t h, index_t w) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3 || xv.dim(1) != h * w) throw_runtime("tokens_to_nchw shape mismatch " + shape_str(xv.shape()));
  const index_t n = xv.dim(0), hw = h * w, c = xv.dim(2);
  Tensor out(Shape{n, c, h, w});
  for (index_t i = 0; i < n; ++i)
    for (index_t p = 0; p < hw; ++p)
      for (index_t ch = 0; ch < c; ++ch) out[(i * c + ch) * hw + p] = xv[(i * hw + p) * c + ch];
  return make_op(std::move(out), {x}, [px = x.node(), n, c, hw](Node& self) {
    if (!px->requires_grad) return;
    Tensor& g = px->ensure_grad();
    for (index_t i = 0; i < n; ++i)
      for (index_t p = 0; p < hw; ++p)
        for (index_t ch = 0; ch < c; ++ch) g[(i * hw + p) * c + ch] += self.grad[(i * c + ch) * hw + p];
  });
}

Var gather_tokens(const Var& x, const std::vector<index_t>& idx, index_t k) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3) throw_runtime("gather_tokens needs (n, l, c)");
  const index_t n = xv.dim(0), l = xv.dim(1), c = xv.dim(2);
  if (static_cast<index_t>(idx.size()) != n * k) throw_runtime("gather_tokens index count mismatch");
  Tensor out(Shape{n, k, c});
  for (index_t i = 0; i < n; ++i)
    for (index_t j = 0; j < k; ++j) {
      const index_t src = idx[size_t(i * k + j)];
      if (src < 0 || src >= l) throw_runtime("gather_tokens index out of range");
      std::memcpy(out.data() + (i * k + j) * c, xv.data() + (i * l + src) * c, sizeof(real) * size_t(c));
    }
  return make_op(std::move(out), {x}, [px = x.node(), idx, n, l, k, c](Node& self) {
    if (!px->requires_grad) return;
    Tensor& g = px->ensure_grad();
    for (index_t i = 0; i < n; ++i)
      for (index_t j = 0; j < k; ++j) {
        const index_t src = idx[size_t(i * k + j)];
        for (index_t ch = 0; ch < c; ++ch) g[(i * l + src) * c + ch] += self.grad[(i * k + j) * c + ch];
      }
  });
}

Var gather_table_rows(const Var& table, const std::vector<index_t>& idx, index_t n, index_t k) {
  const Tensor& tv = table.value();
  if (tv.rank() != 2) throw_runtime("gather_table_rows needs a 2-D table");
  const index_t l = tv.dim(0), c = tv.dim(1);
  if (static_cast<index_t>(idx.size()) != n * k) throw_runtime("gather_table_rows index count mismatch");
  Tensor out(Shape{n, k, c});
  for (index_t r = 0; r < n * k; ++r) {
    const index_t src = idx[size_t(r)];
    if (src < 0 || src >= l) throw_runtime("gather_table_rows index out of range");
    std::memcpy(out.data() + r * c, tv.data() + src * c, sizeof(real) * size_t(c));
  }
  return make_op(std::move(out), {table}, [pt = table.node(), idx, n, k, c](Node& self) {
    if (!pt->requires_grad) return;
    Tensor& g = pt->ensure_grad();
    for (index_t r = 0; r < n * k; ++r)
      for (index_t ch = 0; ch < c; ++ch) g[idx[size_t(r)] * c + ch] += self.grad[r * c + ch];
  });
}

namespace {

// Copies head `h` of a (l, c) token block into a contiguous (l, d) buffer.
void extract_head(const real* src, index_t l, index_t c, index_t h, index_t d, real* dst) {
  for (index_t i = 0; i < l; ++i) std::memcpy(dst + i * d, src + i * c + h * d, sizeof(real) * size_t(d));
}

void accumulate_head(const real* src, index_t l, index_t c, index_t h, index_t d, real* dst) {
  for (index_t i = 0; i < l; ++i)
    for (index_t j = 0; j < d; ++j) dst[i * c + h * d + j] += src[i * d + j];
}

void softmax_rows(real* s, index_t rows, index_t cols) {
  for (index_t r = 0; r < rows; ++r) {
    real* row = s + r * cols;
    const real m = *std::max_element(row, row + cols);
    real z = 0;
    for (index_t j = 0; j < cols; ++j) z += (row[j] = std::exp(row[j] - m));
    for (index_t j = 0; j < cols; ++j) row[j] /= z;
  }
}

}  // namespace

Var multihead_attention(const Var& q, const Var& k, const Var& v, int heads) {
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  if (qv.rank() != 3 || kv.rank() != 3 || !kv.same_shape(vv) || qv.dim(0) != kv.dim(0) || qv.dim(2) != kv.dim(2))
    throw_runtime("multihead_attention shape mismatch");
  const index_t n = qv.dim(0), lq = qv.dim(1), lk = kv.dim(1), c = qv.dim(2);
  if (heads < 1 || c % heads) throw_config("channel count " + std::to_string(c) + " not divisible by " +
                                           std::to_string(heads) + " attention heads");
  const index_t d = c / heads;
  const real inv_sqrt_d = real(1) / std::sqrt(real(d));
  Tensor out(Shape{n, lq, c});
  if (lk > 0) {
    std::vector<real> qh(size_t(lq * d)), kh(size_t(lk * d)), vh(size_t(lk * d)), s(size_t(lq * lk)),
        oh(size_t(lq * d));
    for (index_t i = 0; i < n; ++i)
      for (index_t h = 0; h < heads; ++h) {
        extract_head(qv.data() + i * lq * c, lq, c, h, d, qh.data());
        extract_head(kv.data() + i * lk * c, lk, c, h, d, kh.data());
        extract_head(vv.data() + i * lk * c, lk, c, h, d, vh.data());
        blas::gemm(false, true, lq, lk, d, inv_sqrt_d, qh.data(), d, kh.data(), d, 0, s.data(), lk);
        softmax_rows(s.data(), lq, lk);
        blas::gemm(false, false, lq, d, lk, 1, s.data(), lk, vh.data(), d, 0, oh.data(), d);
        for (index_t r = 0; r < lq; ++r)
          std::memcpy(out.data() + (i * lq + r) * c + h * d, oh.data() + r * d, sizeof(real) * size_t(d));
      }
  }
  return make_op(std::move(out), {q, k, v},
                 [pq = q.node(), pk = k.node(), pv = v.node(), n, lq, lk, c, d, heads, inv_sqrt_d](Node& self) {
                   if (lk == 0) return;
                   std::vector<real> qh(size_t(lq * d)), kh(size_t(lk * d)), vh(size_t(lk * d)), p(size_t(lq * lk)),
                       dp(size_t(lq * lk)), go(size_t(lq * d)), tmp_q(size_t(lq * d)), tmp_k(size_t(lk * d));
                   Tensor* gq = pq->requires_grad ? &pq->ensure_grad() : nullptr;
                   Tensor* gk = pk->requires_grad ? &pk->ensure_grad() : nullptr;
                   Tensor* gv = pv->requires_grad ? &pv->ensure_grad() : nullptr;
                   for (index_t i = 0; i < n; ++i)
                     for (index_t h = 0; h < heads; ++h) {
                       extract_head(pq->value.data() + i * lq * c, lq, c, h, d, qh.data());
                       extract_head(pk->value.data() + i * lk * c, lk, c, h, d, kh.data());
                       extract_head(pv->value.data() + i * lk * c, lk, c, h, d, vh.data());
                       extract_head(self.grad.data() + i * lq * c, lq, c, h, d, go.data());
                       blas::gemm(false, true, lq, lk, d, inv_sqrt_d, qh.data(), d, kh.data(), d, 0, p.data(), lk);
                       softmax_rows(p.data(), lq, lk);
                       if (gv) {
                         blas::gemm(true, false, lk, d, lq, 1, p.data(), lk, go.data(), d, 0, tmp_k.data(), d);
                         accumulate_head(tmp_k.data(), lk, c, h, d, gv->data() + i * lk * c);
                       }
                       if (!gq && !gk) continue;
                       blas::gemm(false, true, lq, lk, d, 1, go.data(), d, vh.data(), d, 0, dp.data(), lk);
                       for (index_t r = 0; r < lq; ++r) {
                         real dot = 0;
                         for (index_t j = 0; j < lk; ++j) dot += p[size_t(r * lk + j)] * dp[size_t(r * lk + j)];
                         for (index_t j = 0; j < lk; ++j)
                           dp[size_t(r * lk + j)] = p[size_t(r * lk + j)] * (dp[size_t(r * lk + j)] - dot);
                       }
                       if (gq) {
                         blas::gemm(false, false, lq, d, lk, inv_sqrt_d, dp.data(), lk, kh.data(), d, 0, tmp_q.data(),
                                    d);
                         accumulate_head(tmp_q.data(), lq, c, h, d, gq->data() + i * lq * c);
                       }
                       if (gk) {
                         blas::gemm(true, false, lk, d, lq, inv_sqrt_d, dp.data(), lk, qh.data(), d, 0, tmp_k.data(),
                                    d);
                         accumulate_head(tmp_k.data(), lk, c, h, d, gk->data() + i * lk * c);
                       }
                     }
                 });
}

}  // namespace cwm
