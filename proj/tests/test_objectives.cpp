#include <cmath>
#include <numbers>

#include "cwm/objectives/losses.hpp"
#include "doctest.h"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"
#include "support/tiny.hpp"

using namespace cwm;
using namespace cwm::objectives;
using cwm::testing::directional_check;
using cwm::testing::randomize;
using cwm::testing::vars_of;

namespace {

model::CategoricalDist dist_from(std::vector<double> logits, index_t b, index_t v, index_t k) {
  Tensor t(Shape{b, v, k});
  for (size_t i = 0; i < logits.size(); ++i) t[index_t(i)] = real(logits[i]);
  return model::CategoricalDist{Var(std::move(t), true)};
}

// Independent KL: explicit probabilities, sum p (log p - log q).
double kl_oracle(const std::vector<double>& lp, const std::vector<double>& lq, index_t k) {
  double total = 0;
  for (size_t v = 0; v < lp.size() / size_t(k); ++v) {
    double zp = 0, zq = 0;
    for (index_t c = 0; c < k; ++c) {
      zp += std::exp(lp[v * k + c]);
      zq += std::exp(lq[v * k + c]);
    }
    for (index_t c = 0; c < k; ++c) {
      const double p = std::exp(lp[v * k + c]) / zp, q = std::exp(lq[v * k + c]) / zq;
      if (p > 0) total += p * (std::log(p) - std::log(q));
    }
  }
  return total;
}

}  // namespace

TEST_CASE("kl_categorical") {
  SUBCASE("identical distributions give zero") {
    auto p = dist_from({0.3, -1.0, 2.0, 0.1, 0.1, 0.1}, 1, 2, 3);
    CHECK(kl_categorical(p, p).value()[0] == 0);
  }
  SUBCASE("one-hot against uniform is ln 2") {
    auto post = dist_from({0.0, -1e4}, 1, 1, 2);
    auto prior = dist_from({0.0, 0.0}, 1, 1, 2);
    CHECK(kl_categorical(post, prior).value()[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("three uniform pairs give zero") {
    auto u = dist_from(std::vector<double>(6, 0.0), 1, 3, 2);
    CHECK(kl_categorical(u, u).value()[0] == 0);
  }
  SUBCASE("matches an independent oracle and per-row reduction") {
    Rng rng(5);
    std::vector<double> a(24), b(24);
    for (auto& x : a) x = rng.normal();
    for (auto& x : b) x = rng.normal();
    auto pa = dist_from(a, 2, 3, 4), pb = dist_from(b, 2, 3, 4);
    const Tensor kl = kl_categorical(pa, pb).value();
    REQUIRE(kl.numel() == 2);
    CHECK(kl[0] == doctest::Approx(kl_oracle({a.begin(), a.begin() + 12}, {b.begin(), b.begin() + 12}, 4)));
    CHECK(kl[1] == doctest::Approx(kl_oracle({a.begin() + 12, a.end()}, {b.begin() + 12, b.end()}, 4)));
    const Tensor bal = kl_balanced(pa, pb, 0.8).value();
    CHECK(max_abs_diff(kl, bal) < 1e-12);
  }
  SUBCASE("shape mismatch is an error") {
    auto a = dist_from(std::vector<double>(4, 0.0), 1, 2, 2);
    auto b = dist_from(std::vector<double>(6, 0.0), 1, 3, 2);
    CHECK_THROWS(kl_categorical(a, b));
  }
}

TEST_CASE("gaussian_nll") {
  const double half_log_2pi = 0.5 * std::log(2 * std::numbers::pi);
  Var pred(Tensor(Shape{2, 3}, 0.25), true);
  CHECK(gaussian_nll(pred, pred).value()[0] == doctest::Approx(6 * half_log_2pi));
  Var one(Tensor::scalar(1), true), zero(Tensor::scalar(0), true);
  CHECK(gaussian_nll(one, zero).value()[0] == doctest::Approx(1.41894).epsilon(1e-5));
  Var p2(Tensor(Shape{4, 3}, 0.25), true), t2(Tensor(Shape{4, 3}, -0.5), true);
  Var p1(Tensor(Shape{2, 3}, 0.25), true), t1(Tensor(Shape{2, 3}, -0.5), true);
  CHECK(gaussian_nll(p2, t2).value()[0] == doctest::Approx(2 * gaussian_nll(p1, t1).value()[0]));
  CHECK_THROWS(gaussian_nll(p1, p2));
}

TEST_CASE("pretrain loss: report identities and weights") {
  Rng init(7);
  model::WorldModel wm(testing::tiny_config(), init);
  Rng data(8);
  auto batch = testing::random_video_batch(2, 3, 8, data);

  Rng r1(9);
  LossReport rep = pretrain_loss(wm, batch, LossWeights::pretrain(), r1);
  CHECK(std::isfinite(rep.total_value));
  CHECK(rep.kl_af == doctest::Approx(0).epsilon(1e-12));
  CHECK(rep.total_value == doctest::Approx(rep.image_nll + rep.kl_af));

  LossWeights w0 = LossWeights::pretrain();
  w0.beta_z = 0;
  Rng rng_a(3);
  randomize(wm.theta(), rng_a, 0.2);
  Rng r2(9), r3(9), r4(9);
  LossReport a = pretrain_loss(wm, batch, w0, r2);
  CHECK(a.total_value == doctest::Approx(a.image_nll).epsilon(1e-12));
  LossReport b = pretrain_loss(wm, batch, LossWeights::pretrain(), r3);
  REQUIRE(b.kl_af > 0);
  LossWeights w2 = LossWeights::pretrain();
  w2.beta_z = 2;
  LossReport c = pretrain_loss(wm, batch, w2, r4);
  CHECK(c.total_value > b.total_value);
  CHECK(b.total_value > a.total_value);
  CHECK(c.total_value == doctest::Approx(c.image_nll + 2 * c.kl_af));
}

TEST_CASE("pretrain loss gradients match finite differences") {
  for (auto mode : {vision::Conditioning::kCrossAttention, vision::Conditioning::kNone, vision::Conditioning::kConcat}) {
    Rng init(11);
    model::WorldModel wm(testing::tiny_config(mode), init);
    Rng jitter(12);
    randomize(wm.theta(), jitter, 0.4);
    Rng data(13);
    auto batch = testing::random_video_batch(2, 3, 8, data);
    model::SampleTape tape;
    auto f = [&] {
      if (tape.size()) tape.rewind_for_replay();
      Rng r(21);
      LossOptions opt;
      opt.tape = &tape;
      return pretrain_loss(wm, batch, LossWeights::pretrain(), r, opt).total;
    };
    Rng dir(14);
    auto all = vars_of(wm.theta());
    auto res = directional_check(f, all, dir);
    INFO("analytic " << res.analytic << " numeric " << res.numeric);
    CHECK(std::abs(res.analytic) > 1e-6);
    CHECK(res.rel_error < 1e-3);
  }
}

TEST_CASE("finetune loss: dual reward heads and weights") {
  Rng init(17);
  model::WorldModel wm(testing::tiny_config(), init);
  Rng data(18);
  auto batch = testing::random_rl_batch(2, 3, 8, 2, data);
  LossWeights w = LossWeights::finetune();
  w.lambda_int = 0;
  Rng r1(5);
  auto out = finetune_loss(wm, batch, w, r1);
  CHECK(out.report.behavioral_reward_nll == out.report.representative_reward_nll);
  CHECK(out.report.total_value ==
        doctest::Approx(out.report.image_nll + out.report.behavioral_reward_nll +
                        out.report.representative_reward_nll + out.report.kl_ac));
  CHECK(out.starts.h.dim(0) == 6);
  CHECK_FALSE(out.starts.h.requires_grad());

  Rng jitter(2);
  randomize(wm.theta(), jitter, 0.3);
  randomize(wm.phi(), jitter, 0.3);
  Rng r2(5);
  auto ft = finetune_loss(wm, batch, LossWeights::finetune(), r2);
  CHECK(ft.report.kl_af > 0);
  CHECK(ft.report.total_value ==
        doctest::Approx(ft.report.image_nll + ft.report.behavioral_reward_nll +
                        ft.report.representative_reward_nll + ft.report.kl_ac));
}

TEST_CASE("finetune loss gradients match finite differences") {
  Rng init(31);
  model::WorldModel wm(testing::tiny_config(), init);
  Rng jitter(32);
  randomize(wm.theta(), jitter, 0.4);
  randomize(wm.phi(), jitter, 0.4);
  randomize(wm.varphi(), jitter, 0.4);
  Rng data(33);
  auto batch = testing::random_rl_batch(2, 3, 8, 2, data);
  model::SampleTape tape;
  LossWeights w = LossWeights::finetune();
  w.beta_z = 0.5;
  auto f = [&] {
    if (tape.size()) tape.rewind_for_replay();
    Rng r(41);
    LossOptions opt;
    opt.tape = &tape;
    return finetune_loss(wm, batch, w, r, opt).report.total;
  };
  Rng dir(34);
  for (auto group : {vars_of(wm.theta()), vars_of(wm.phi()), vars_of(wm.varphi())}) {
    auto res = directional_check(f, group, dir);
    INFO("analytic " << res.analytic << " numeric " << res.numeric);
    CHECK(std::abs(res.analytic) > 1e-6);
    CHECK(res.rel_error < 1e-3);
  }
}

TEST_CASE("sequence KL equals the sum of per-step expected KLs") {
  const model::ModelConfig cfg = testing::binary_latent_config();
  Rng init(21), rng(22);
  model::ActionFreeDynamics af(cfg, init);
  nn::ParamList params;
  af.collect("af", params);
  for (int trial = 0; trial < 100; ++trial) {
    randomize(params, rng, 1.0);
    Tensor e1(Shape{1, 3}), e2(Shape{1, 3});
    for (real& v : e1.values()) v = real(rng.uniform(-2, 2));
    for (real& v : e2.values()) v = real(rng.uniform(-2, 2));
    const auto kl = testing::sequence_kl(af, e1, e2);
    CHECK(std::abs(kl.joint - kl.stepwise) < 1e-6);
  }
}
