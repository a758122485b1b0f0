#include <cmath>

#include "cwm/behavior/behavior.hpp"
#include "cwm/model/world_model.hpp"
#include "doctest.h"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"
#include "support/tiny.hpp"

using namespace cwm;
using namespace cwm::behavior;
using cwm::testing::directional_check;
using cwm::testing::randomize;
using cwm::testing::vars_of;

namespace {

struct Toy {
  model::WorldModelConfig cfg = testing::tiny_config();
  Rng init{3};
  model::WorldModel wm{cfg, init};
  BehaviorConfig bc;
  Actor actor;
  Critic critic, target;
  model::LatentStateAC start;

  explicit Toy(int horizon) {
    bc.horizon = horizon;
    bc.hidden = 6;
    bc.layers = 2;
    bc.entropy_eta = 0.1;
    Rng r(4);
    actor = Actor(cfg.model.feature_width(), cfg.model.action_dim, bc, r);
    critic = Critic(cfg.model.feature_width(), bc, r);
    target = Critic(cfg.model.feature_width(), bc, r);
    Rng j(5);
    randomize(wm.phi(), j, 0.5);
    auto [af, ac] = model::init_state(3, cfg.model);
    Tensor h(Shape{3, cfg.model.det_size});
    for (real& x : h.values()) x = j.uniform(-1, 1);
    start = model::LatentStateAC{constant(h), ac.s};
  }
  ImagineModels models() const { return {&wm.ac, &wm.reward_behavioral, &actor, &target}; }
};

}  // namespace

TEST_CASE("lambda_returns worked examples") {
  SUBCASE("H=2 hand example") {
    auto v = lambda_returns(std::vector<double>{1, 1}, std::vector<double>{0.5, 0.5, 0.5}, 0.9, 0.95);
    CHECK(v[1] == doctest::Approx(1.45).epsilon(1e-12));
    CHECK(v[0] == doctest::Approx(2.26225).epsilon(1e-12));
  }
  SUBCASE("gamma 0 gives rewards") {
    auto v = lambda_returns(std::vector<double>{1, 2, 3}, std::vector<double>{5, 6, 7, 8}, 0.0, 0.7);
    CHECK(v == std::vector<double>{1, 2, 3});
  }
  SUBCASE("lambda 0 gives one-step TD") {
    auto v = lambda_returns(std::vector<double>{1, 2, 3}, std::vector<double>{5, 6, 7, 8}, 0.5, 0.0);
    CHECK(v == std::vector<double>{4, 5.5, 7});
  }
}

TEST_CASE("lambda_returns matches the n-step mixture on random inputs") {
  Rng rng(123);
  double worst = 0;
  for (int c = 0; c < 1000; ++c) {
    const size_t h = 1 + rng.uniform_int(20);
    std::vector<double> r(h), v(h + 1);
    for (auto& x : r) x = rng.uniform(-5, 5);
    for (auto& x : v) x = rng.uniform(-5, 5);
    const double g = c % 4 == 0 ? 0.0 : c % 4 == 1 ? 1.0 : rng.uniform();
    const double l = c % 3 == 0 ? 0.0 : c % 3 == 1 ? 1.0 : rng.uniform();
    auto got = lambda_returns(r, v, g, l);
    auto want = testing::lambda_oracle(r, v, g, l);
    for (size_t i = 0; i < h; ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("batched lambda_returns agrees with the scalar version") {
  Rng rng(5);
  std::vector<Var> r, v;
  std::vector<double> rs, vs;
  for (int i = 0; i < 4; ++i) {
    rs.push_back(rng.normal());
    r.push_back(constant(Tensor::scalar(rs.back())));
  }
  for (int i = 0; i < 5; ++i) {
    vs.push_back(rng.normal());
    v.push_back(constant(Tensor::scalar(vs.back())));
  }
  auto a = lambda_returns(r, v, 0.9, 0.8);
  auto b = lambda_returns(rs, vs, 0.9, 0.8);
  for (size_t i = 0; i < 4; ++i) CHECK(a[i].value()[0] == doctest::Approx(b[i]).epsilon(1e-14));
}

TEST_CASE("imagine shapes, determinism and zero reward at init") {
  Toy toy(1);
  Rng r1(8);
  auto traj = imagine(toy.start, toy.models(), toy.bc, r1);
  CHECK(traj.states.size() == 2);
  CHECK(traj.actions.size() == 1);

  Toy fresh(3);
  Rng a(9), b(9);
  auto t1 = imagine(fresh.start, fresh.models(), fresh.bc, a, true);
  auto t2 = imagine(fresh.start, fresh.models(), fresh.bc, b, true);
  for (size_t i = 0; i < t1.returns.size(); ++i) CHECK(bitwise_equal(t1.returns[i].value(), t2.returns[i].value()));

  BehaviorConfig bad = fresh.bc;
  bad.horizon = 0;
  Rng c(1);
  CHECK_THROWS(imagine(fresh.start, fresh.models(), bad, c));
}

TEST_CASE("reward head at initialization predicts exactly zero") {
  Rng init(3);
  model::WorldModel wm(testing::tiny_config(), init);
  BehaviorConfig bc;
  bc.horizon = 2;
  Rng r(4);
  Actor actor(wm.config().model.feature_width(), 2, bc, r);
  Critic target(wm.config().model.feature_width(), bc, r);
  auto [af, ac] = model::init_state(2, wm.config().model);
  Rng s(1);
  auto traj = imagine(ac, {&wm.ac, &wm.reward_behavioral, &actor, &target}, bc, s);
  for (const Var& rew : traj.rewards)
    for (real x : rew.value().values()) CHECK(x == 0);
}

TEST_CASE("critic regression") {
  Var v(Tensor::scalar(0), true);
  CHECK(critic_regression(v, Tensor::scalar(2)).value()[0] == doctest::Approx(2.0));
  Var same(Tensor(Shape{3}, 1.5), true);
  CHECK(critic_regression(same, Tensor(Shape{3}, 1.5)).value()[0] == 0);
}

TEST_CASE("critic loss sends no gradient into the targets") {
  Toy toy(3);
  Rng r(10);
  auto traj = imagine(toy.start, toy.models(), toy.bc, r);
  nn::ParamList target, actor, phi;
  toy.target.collect("t", target);
  toy.actor.collect("a", actor);
  phi = toy.wm.phi();
  backward(critic_loss(toy.critic, traj));
  for (const auto& p : target.params()) CHECK_FALSE(p.var.has_grad());
  for (const auto& p : actor.params()) CHECK_FALSE(p.var.has_grad());
  for (const auto& p : phi.params()) CHECK_FALSE(p.var.has_grad());
}

TEST_CASE("actor loss with eta 0 is the negative return sum") {
  Toy toy(3);
  toy.bc.entropy_eta = 0;
  Rng r(10);
  auto traj = imagine(toy.start, toy.models(), toy.bc, r);
  double expect = 0;
  for (const Var& v : traj.returns) {
    double m = 0;
    for (real x : v.value().values()) m += x;
    expect -= m / double(v.numel());
  }
  CHECK(actor_loss(traj, toy.bc).value()[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("actor and critic gradients match finite differences") {
  Toy toy(3);
  nn::ParamList actor_params, critic_params;
  toy.actor.collect("a", actor_params);
  toy.critic.collect("c", critic_params);
  model::SampleTape tape;
  auto traj_for = [&] {
    if (tape.size()) tape.rewind_for_replay();
    Rng r(77);
    return imagine(toy.start, toy.models(), toy.bc, r, false, &tape);
  };
  Rng dir(1);
  auto ra = directional_check([&] { return actor_loss(traj_for(), toy.bc); }, vars_of(actor_params), dir);
  INFO("actor analytic " << ra.analytic << " numeric " << ra.numeric);
  CHECK(std::abs(ra.analytic) > 1e-8);
  CHECK(ra.rel_error < 1e-3);
  auto rc = directional_check([&] { return critic_loss(toy.critic, traj_for()); }, vars_of(critic_params), dir);
  INFO("critic analytic " << rc.analytic << " numeric " << rc.numeric);
  CHECK(std::abs(rc.analytic) > 1e-8);
  CHECK(rc.rel_error < 1e-3);
}

TEST_CASE("squashed Gaussian entropy estimate shrinks with the pre-squash std") {
  double prev = 1e300;
  for (double sd : {1.0, 0.5, 0.2, 0.05, 0.01}) {
    Rng rng(3);
    const int n = 20000;
    Tensor mean(Shape{n, 1}), std(Shape{n, 1}, sd), u(Shape{n, 1});
    for (index_t i = 0; i < n; ++i) u[i] = sd * rng.normal();
    const Tensor lp = squashed_log_prob(constant(u), constant(mean), constant(std)).value();
    double h = 0;
    for (real x : lp.values()) h -= x;
    h /= n;
    CHECK(h < prev);
    prev = h;
  }
}

TEST_CASE("intrinsic bonus") {
  Tensor eye(Shape{2, 2});
  eye[0] = 1;
  eye[3] = 1;
  SUBCASE("empty bank gives zero") {
    IntrinsicMemory mem(eye, 10, 2);
    std::vector<real> q{0, 0};
    CHECK(intrinsic_bonus(q, mem) == 0);
    CHECK(mem.size() == 1);
  }
  SUBCASE("query equal to the only entry gives zero") {
    IntrinsicMemory mem(eye, 10, 2);
    std::vector<real> p{1, 2};
    intrinsic_bonus(p, mem);
    CHECK(intrinsic_bonus(p, mem) == 0);
  }
  SUBCASE("hand-computed neighbors") {
    IntrinsicMemory mem(eye, 10, 2);
    mem.insert({0, 0});
    mem.insert({3, 4});
    std::vector<real> q{0, 0};
    CHECK(intrinsic_bonus(q, mem) == doctest::Approx(2.5));
  }
  SUBCASE("capacity evicts the oldest") {
    IntrinsicMemory mem(eye, 2, 1);
    mem.insert({0, 0});
    mem.insert({10, 0});
    mem.insert({20, 0});
    CHECK(mem.size() == 2);
    CHECK(mem.knn_distance({0, 0}) == doctest::Approx(10));
  }
  SUBCASE("seeded projection is reproducible") {
    Rng a(4), b(4);
    IntrinsicMemory m1(8, 32, 100, 12, a), m2(8, 32, 100, 12, b);
    CHECK(bitwise_equal(m1.projection(), m2.projection()));
  }
}
