#include "fedhql/verify.hpp"

#include <cmath>
#include <sstream>
#include <thread>

#include "fedhql/agent.hpp"
#include "fedhql/env.hpp"
#include "fedhql/federation.hpp"
#include "fedhql/oracle.hpp"
#include "fedhql/orchestrator.hpp"
#include "fedhql/rng.hpp"
#include "fedhql/transport.hpp"

namespace fedhql {

namespace {

neural::NetworkSpec random_spec(SplitMix64& rng) {
    neural::NetworkSpec spec;
    spec.input_dim = 2 + static_cast<int>(rng.next_below(5));
    spec.output_dim = 2 + static_cast<int>(rng.next_below(3));
    const int depth = 1 + static_cast<int>(rng.next_below(3));
    for (int l = 0; l < depth; ++l) {
        neural::LayerSpec ls;
        ls.width = 2 + static_cast<int>(rng.next_below(9));
        ls.act = rng.next_below(2) == 0 ? neural::Activation::Tanh
                                        : neural::Activation::ReLU;
        spec.hidden.push_back(ls);
    }
    spec.init_seed = rng.next_u64();
    return spec;
}

}  // namespace

std::vector<CheckResult> verify_gradient_checks(int instances) {
    SplitMix64 rng(0xFEDC0DEull);
    double worst = 0.0;
    int failed = 0;
    for (int i = 0; i < instances; ++i) {
        const neural::NetworkSpec spec = random_spec(rng);
        const neural::Weights w = neural::init_weights(spec);
        State s;
        s.values.resize(static_cast<std::size_t>(spec.input_dim));
        for (double& v : s.values) v = rng.uniform(-2.0, 2.0);
        const Action a{static_cast<int>(rng.next_below(
            static_cast<std::uint64_t>(spec.output_dim)))};
        const double target = rng.uniform(-3.0, 3.0);

        const neural::BackwardResult back = neural::backward(w, s, a, target);
        const neural::Gradient fd =
            oracle::finite_difference_gradient(w, s, a, target);
        const double err = oracle::max_relative_error(back.grad, fd);
        worst = std::max(worst, err);
        if (err > 1e-4) ++failed;
    }
    std::ostringstream detail;
    detail << instances << " instances, worst relative error " << worst;
    return {{"gradient-vs-finite-differences", failed == 0, detail.str()}};
}

std::vector<CheckResult> verify_tabular_oracle() {
    std::vector<CheckResult> results;
    const auto q_star = oracle::chain_optimal_q(5, 0.9);

    // (a) epsilon-greedy Q-learning converges to the oracle.
    {
        EnvConfig env_cfg;
        env_cfg.kind = EnvKind::ChainMdp;
        env_cfg.chain_length = 5;
        env_cfg.gamma = 0.9;
        env_cfg.horizon = 100;
        env_cfg.seed = 7;
        auto env = make_env(env_cfg);

        AgentConfig acfg;
        acfg.tabular = true;
        acfg.lr = 0.1;
        acfg.epsilon = 0.3;
        acfg.action_seed = 11;
        TabularAgent agent(acfg, 0.9, 5, 2);
        agent.self_learn(*env, 10000);

        double worst = 0.0;
        for (int cell = 0; cell < 4; ++cell) {
            const double learned =
                std::max(agent.value(cell, 0), agent.value(cell, 1));
            const double expect =
                std::max(q_star[static_cast<std::size_t>(cell)][0],
                         q_star[static_cast<std::size_t>(cell)][1]);
            worst = std::max(worst, std::abs(learned - expect));
        }
        std::ostringstream detail;
        detail << "1e4 steps, worst |Q - Q*| = " << worst;
        results.push_back(
            {"tabular-q-learning-vs-value-iteration", worst <= 0.05,
             detail.str()});
    }

    // (b) the optimal table is a fixed point of the server TD rounds.
    {
        EnvConfig env_cfg;
        env_cfg.kind = EnvKind::ChainMdp;
        env_cfg.chain_length = 5;
        env_cfg.gamma = 0.9;
        env_cfg.horizon = 100;
        env_cfg.seed = 3;

        AgentConfig acfg;
        acfg.tabular = true;
        acfg.lr = 0.1;
        acfg.epsilon = 0.0;
        acfg.kappa = 64;

        wire::InprocTransport transport = wire::make_inproc_transport(1);
        auto agent = std::make_unique<TabularAgent>(acfg, 0.9, 5, 2);
        TabularAgent* table = agent.get();
        for (int cell = 0; cell < 4; ++cell)
            for (int a = 0; a < 2; ++a)
                table->set_value(cell, a,
                                 q_star[static_cast<std::size_t>(cell)]
                                       [static_cast<std::size_t>(a)]);

        AgentWorker worker(0, std::move(agent), make_env(env_cfg),
                           make_env(env_cfg), 1ull << 60, 1,
                           *transport.endpoints[0]);
        std::thread runner([&worker] { worker.run(); });

        FedConfig fed;
        fed.lambda = 0.0;
        fed.alpha_s = 1.0;
        fed.h_fed = 16;
        fed.gamma = 0.9;

        auto server_env = make_env(env_cfg);
        BudgetLedger ledger;
        ledger.per_agent.assign(1, 0);
        std::uint64_t exchange = 0;
        for (int round = 0; round < 10; ++round)
            federation_round(*server_env, *transport.hub, fed, ledger,
                             1ull << 60, exchange);
        transport.hub->broadcast(
            wire::Message{exchange++, 0, wire::Shutdown{}});
        runner.join();

        double worst = 0.0;
        for (int cell = 0; cell < 4; ++cell)
            for (int a = 0; a < 2; ++a)
                worst = std::max(
                    worst, std::abs(table->value(cell, a) -
                                    q_star[static_cast<std::size_t>(cell)]
                                          [static_cast<std::size_t>(a)]));
        std::ostringstream detail;
        detail << "10 rounds, worst drift from Q* = " << worst;
        results.push_back(
            {"fedtd-bellman-fixed-point", worst <= 1e-9, detail.str()});
    }

    return results;
}

std::vector<CheckResult> verify_coverage(int trials) {
    std::vector<CheckResult> results;
    const Sampler samplers[] = {uniform_sampler(0.0, 1.0),
                                two_point_sampler(0.1, 0.9)};
    const char* names[] = {"uniform[0,1]", "two-point{0.1,0.9}"};
    std::uint64_t seed = 0xC0FFEEull;
    for (double c : {1.0, 2.0, 3.0}) {
        for (int n : {3, 5, 10}) {
            for (int si = 0; si < 2; ++si) {
                const double coverage =
                    coverage_test(samplers[si], n, c, 1.0, trials, seed++);
                const double required = coverage_requirement(c, trials);
                std::ostringstream name;
                name << "coverage c=" << c << " N=" << n << " " << names[si];
                std::ostringstream detail;
                detail << "observed " << coverage << ", required " << required;
                results.push_back(
                    {name.str(), coverage >= required, detail.str()});
            }
        }
    }
    return results;
}

std::vector<CheckResult> verify_protocol(int roundtrips, int fuzz_inputs) {
    std::vector<CheckResult> results;
    SplitMix64 rng(0xF8A3Eull);

    // Round-trip randomized messages over every kind.
    {
        int failed = 0;
        for (int i = 0; i < roundtrips; ++i) {
            wire::Message m;
            m.round_id = rng.next_u64();
            m.agent_id = static_cast<std::uint16_t>(rng.next_below(65536));
            const int dim = static_cast<int>(rng.next_below(8));
            auto rand_vec = [&rng](int n) {
                std::vector<double> v(static_cast<std::size_t>(n));
                for (double& x : v) x = rng.uniform(-1e6, 1e6);
                return v;
            };
            switch (rng.next_below(6)) {
                case 0: m.body = wire::SelfLearnSignal{rng.next_u64()}; break;
                case 1:
                    m.body = wire::QueryState{
                        rng.next_below(2) ? wire::StateTag::Next
                                          : wire::StateTag::Current,
                        rand_vec(dim)};
                    break;
                case 2:
                    m.body = wire::QValuesReply{
                        rng.next_below(2) ? wire::StateTag::Next
                                          : wire::StateTag::Current,
                        rand_vec(dim)};
                    break;
                case 3:
                    m.body = wire::FedTDTarget{
                        rand_vec(dim),
                        static_cast<std::uint16_t>(rng.next_below(65536)),
                        rng.uniform(-1e6, 1e6)};
                    break;
                case 4: m.body = wire::ImproveAck{}; break;
                default: m.body = wire::Shutdown{}; break;
            }
            wire::Message back;
            std::size_t consumed = 0;
            const std::vector<std::uint8_t> bytes = wire::encode(m);
            const wire::DecodeError err = wire::decode(bytes, back, &consumed);
            if (err != wire::DecodeError::None || consumed != bytes.size() ||
                !(back == m))
                ++failed;
        }
        std::ostringstream detail;
        detail << roundtrips << " random messages";
        results.push_back({"frame-roundtrip", failed == 0, detail.str()});
    }

    // Fuzz: random byte strings decode to typed errors, never crash.
    {
        int crashes = 0;
        for (int i = 0; i < fuzz_inputs; ++i) {
            std::vector<std::uint8_t> bytes(rng.next_below(64));
            for (auto& b : bytes)
                b = static_cast<std::uint8_t>(rng.next_below(256));
            // Bias some inputs toward valid-looking headers.
            if (bytes.size() >= 6 && rng.next_below(2)) {
                bytes[0] = 'F';
                bytes[1] = 'H';
                bytes[2] = 'Q';
                bytes[3] = 'L';
                bytes[4] = 1;
                bytes[5] = static_cast<std::uint8_t>(rng.next_below(8));
            }
            try {
                wire::Message m;
                wire::decode(bytes, m);
            } catch (...) {
                ++crashes;
            }
        }
        std::ostringstream detail;
        detail << fuzz_inputs << " random byte strings";
        results.push_back({"decode-fuzz", crashes == 0, detail.str()});
    }

    return results;
}

int count_failures(const std::vector<CheckResult>& results) {
    int n = 0;
    for (const CheckResult& r : results)
        if (!r.passed) ++n;
    return n;
}

std::string render_results(const std::vector<CheckResult>& results) {
    std::ostringstream out;
    for (const CheckResult& r : results)
        out << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << " (" << r.detail
            << ")\n";
    return out.str();
}

}  // namespace fedhql
