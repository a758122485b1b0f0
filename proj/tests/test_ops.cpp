#include <cmath>

#include "cwm/core/ops.hpp"
#include "doctest.h"
#include "support/gradcheck.hpp"

using namespace cwm;
using cwm::testing::directional_check;

namespace {

Var random_param(Shape shape, Rng& rng, double lo = -1, double hi = 1) {
  Tensor t(std::move(shape));
  for (real& v : t.values()) v = rng.uniform(lo, hi);
  return Var(std::move(t), true);
}

// Contracts an arbitrary output with fixed random weights so every output
// element contributes to the checked scalar.
Var contract(const Var& y, std::uint64_t seed) {
  Rng r(seed);
  Tensor w(y.shape());
  for (real& v : w.values()) v = r.uniform(-1, 1);
  return sum(mul(y, constant(std::move(w))));
}

void check(const std::function<Var()>& f, const std::vector<Var>& params, const char* what) {
  Rng rng(99);
  for (int rep = 0; rep < 3; ++rep) {
    auto r = directional_check(f, params, rng);
    INFO(what << " analytic=" << r.analytic << " numeric=" << r.numeric);
    CHECK(r.rel_error < 1e-6);
  }
}

}  // namespace

TEST_CASE("elementwise ops match finite differences") {
  Rng rng(1);
  Var a = random_param({3, 4}, rng);
  Var b = random_param({3, 4}, rng);
  Var row = random_param({4}, rng);
  Var pos = random_param({3, 4}, rng, 0.5, 2.0);
  check([&] { return contract(add(a, row), 1); }, {a, row}, "add broadcast");
  check([&] { return contract(sub(a, b), 2); }, {a, b}, "sub");
  check([&] { return contract(mul(a, row), 3); }, {a, row}, "mul broadcast");
  check([&] { return contract(elu(a), 4); }, {a}, "elu");
  check([&] { return contract(tanh(a), 5); }, {a}, "tanh");
  check([&] { return contract(sigmoid(a), 6); }, {a}, "sigmoid");
  check([&] { return contract(exp(a), 7); }, {a}, "exp");
  check([&] { return contract(log(pos), 8); }, {pos}, "log");
  check([&] { return contract(softplus(a), 9); }, {a}, "softplus");
  check([&] { return contract(square(a), 10); }, {a}, "square");
  check([&] { return contract(sum_rows(a), 11); }, {a}, "sum_rows");
  check([&] { return mean(square(a)); }, {a}, "mean");
}

TEST_CASE("dense and shape ops match finite differences") {
  Rng rng(2);
  Var x = random_param({5, 3}, rng);
  Var w = random_param({3, 4}, rng);
  Var bias = random_param({4}, rng);
  Var y = random_param({5, 2}, rng);
  check([&] { return contract(linear(x, w, bias), 1); }, {x, w, bias}, "linear");
  check([&] { return contract(matmul(x, w), 2); }, {x, w}, "matmul");
  check([&] { return contract(concat_cols({x, y}), 3); }, {x, y}, "concat");
  check([&] { return contract(slice_cols(x, 1, 3), 4); }, {x}, "slice");
  check([&] { return contract(stack_axis1({x, x, y.dim(1) == 2 ? x : x}), 5); }, {x}, "stack");
  Var s3 = random_param({2, 3, 4}, rng);
  check([&] { return contract(select_axis1(s3, 1), 6); }, {s3}, "select");
  check([&] { return contract(repeat_rows(x, 3), 7); }, {x}, "repeat_rows");
  check([&] { return contract(softmax_last(s3), 8); }, {s3}, "softmax");
  check([&] { return contract(log_softmax_last(s3), 9); }, {s3}, "log_softmax");
}

TEST_CASE("image ops match finite differences") {
  Rng rng(3);
  Var x = random_param({2, 3, 6, 6}, rng);
  Var k3 = random_param({4, 3, 3, 3}, rng);
  Var k1 = random_param({4, 3, 1, 1}, rng);
  Var cb = random_param({4}, rng);
  check([&] { return contract(conv2d(x, k3, cb, 1, 1), 1); }, {x, k3, cb}, "conv3x3");
  check([&] { return contract(conv2d(x, k3, Var(), 2, 1), 2); }, {x, k3}, "conv3x3 stride2");
  check([&] { return contract(conv2d(x, k1, cb, 1, 0), 3); }, {x, k1, cb}, "conv1x1");
  check([&] { return contract(avg_pool2(x), 4); }, {x}, "avgpool");
  check([&] { return contract(upsample_nearest2(x), 5); }, {x}, "upsample");

  Var gamma = random_param({3}, rng, 0.5, 1.5);
  Var beta = random_param({3}, rng);
  BatchNormStats stats{Tensor(Shape{3}), Tensor(Shape{3}, 1)};
  check([&] { return contract(batch_norm(x, gamma, beta, stats, true), 6); }, {x, gamma, beta}, "batchnorm train");
  check([&] { return contract(batch_norm(x, gamma, beta, stats, false), 7); }, {x, gamma, beta}, "batchnorm eval");

  check([&] { return contract(tokens_to_nchw(nchw_to_tokens(x), 6, 6), 8); }, {x}, "token round trip");
  Var tok = random_param({2, 9, 4}, rng);
  Var table = random_param({9, 4}, rng);
  const std::vector<index_t> idx{0, 3, 8, 1, 2, 7};
  check([&] { return contract(gather_tokens(tok, idx, 3), 9); }, {tok}, "gather tokens");
  check([&] { return contract(gather_table_rows(table, idx, 2, 3), 10); }, {table}, "gather table");

  Var q = random_param({2, 5, 4}, rng);
  Var k = random_param({2, 3, 4}, rng);
  Var v = random_param({2, 3, 4}, rng);
  check([&] { return contract(multihead_attention(q, k, v, 2), 11); }, {q, k, v}, "attention");
}

TEST_CASE("straight-through forward is the sample, gradient is the probabilities'") {
  Rng rng(4);
  Var logits = random_param({2, 3}, rng);
  const Var p = softmax_last(logits);
  Tensor sample(Shape{2, 3});
  sample[1] = 1;
  sample[3] = 1;
  const Var st = straight_through(sample, p, p.value());
  CHECK(bitwise_equal(st.value(), sample));
}

TEST_CASE("attention over an empty key set is zero") {
  Var q(Tensor(Shape{1, 4, 4}, 1.0), true);
  Var k(Tensor(Shape{1, 0, 4}), true);
  Var v(Tensor(Shape{1, 0, 4}), true);
  const Var out = multihead_attention(q, k, v, 2);
  for (real x : out.value().values()) CHECK(x == 0);
}

TEST_CASE("mismatched shapes are rejected") {
  Var a(Tensor(Shape{2, 3}), true);
  Var b(Tensor(Shape{3, 2}), true);
  CHECK_THROWS(add(a, b));
  CHECK_THROWS(matmul(a, a));
  Var q(Tensor(Shape{1, 4, 6}), true);
  CHECK_THROWS(multihead_attention(q, q, q, 4));
}
