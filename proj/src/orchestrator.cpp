#include "fedhql/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace fedhql {

namespace {

double derive_value_bound(const FedConfig& fed, const Environment& env) {
    if (fed.b > 0.0) return fed.b;
    const double g = fed.gamma;
    const double r = env.reward_bound();
    return r * (1.0 - std::pow(g, env.config().horizon)) / (1.0 - g);
}

/// Collects one QValuesReply per agent for `state` and checks the tag echo.
std::vector<QVector> query_all(wire::ServerHub& hub, const State& state,
                               wire::StateTag tag, int timeout_ms,
                               std::uint64_t& exchange_id) {
    const std::uint64_t id = exchange_id++;
    wire::Message query;
    query.round_id = id;
    query.body = wire::QueryState{tag, state.values};
    hub.broadcast(query);

    std::vector<wire::Message> replies =
        hub.collect(wire::kKindQValuesReply, id, timeout_ms);
    std::vector<QVector> qs;
    qs.reserve(replies.size());
    for (std::size_t i = 0; i < replies.size(); ++i) {
        const auto& body = std::get<wire::QValuesReply>(replies[i].body);
        if (body.tag != tag)
            throw wire::RoundAborted(static_cast<int>(i),
                                     "reply state tag does not match query");
        qs.push_back(body.q);
    }
    return qs;
}

AggregateStats score_actions(const std::vector<QVector>& qs,
                             const FedConfig& fed, double value_bound) {
    AggregateStats stats = aggregate(qs, fed.lambda);
    if (fed.theoretical) {
        std::vector<double> column(qs.size());
        for (std::size_t a = 0; a < stats.ucb.size(); ++a) {
            for (std::size_t n = 0; n < qs.size(); ++n) column[n] = qs[n][a];
            stats.ucb[a] = theoretical_ucb(column, fed.c, value_bound);
        }
    }
    return stats;
}

}  // namespace

RoundState federation_round(Environment& server_env, wire::ServerHub& hub,
                            const FedConfig& fed, BudgetLedger& ledger,
                            std::uint64_t system_budget,
                            std::uint64_t& exchange_id) {
    RoundState round;
    const double value_bound = derive_value_bound(fed, server_env);

    // The server episode persists across rounds; a round entered after a
    // terminal step (or on a fresh environment) starts a new episode.
    if (server_env.done()) server_env.reset();

    while (!server_env.done() && round.t < fed.h_fed) {
        if (ledger.system_total() >= system_budget) break;

        const State s_t = server_env.state();

        // (i)-(ii) query current state, score, select.
        const std::vector<QVector> qs_cur =
            query_all(hub, s_t, wire::StateTag::Current, fed.timeout_ms,
                      exchange_id);
        ++round.query_broadcasts;
        const AggregateStats stats = score_actions(qs_cur, fed, value_bound);
        const Action a_bar = select_action(stats);
        const double qbar_sa = stats.mean[static_cast<std::size_t>(a_bar.index)];

        // (iii) act in the server's own environment copy.
        const Transition tr = server_env.step(a_bar);
        ++ledger.server;

        // (iv) query the next state for the TD bootstrap.
        const std::vector<QVector> qs_next =
            query_all(hub, tr.s_next, wire::StateTag::Next, fed.timeout_ms,
                      exchange_id);
        ++round.query_broadcasts;
        const AggregateStats next_stats = aggregate(qs_next, 0.0);

        // (v) server TD backup, broadcast the updated value.
        const double updated = fedtd_update(qbar_sa, tr.r, next_stats.mean,
                                            tr.done, fed.alpha_s, fed.gamma);
        const std::uint64_t id = exchange_id++;
        wire::Message target;
        target.round_id = id;
        target.body = wire::FedTDTarget{
            s_t.values, static_cast<std::uint16_t>(a_bar.index), updated};
        hub.broadcast(target);

        // (vi) every agent confirms its improvement steps.
        hub.collect(wire::kKindImproveAck, id, fed.timeout_ms);

        round.trace.push_back(
            TraceStep{s_t, a_bar, tr.r, tr.done, qbar_sa, updated});
        ++round.t;
    }
    return round;
}

// ---------------------------------------------------------------------------
// AgentWorker

AgentWorker::AgentWorker(int id, std::unique_ptr<Agent> agent,
                         std::unique_ptr<Environment> train_env,
                         std::unique_ptr<Environment> eval_env,
                         std::uint64_t eval_every, int eval_episodes,
                         wire::AgentEndpoint& endpoint)
    : id_(id),
      agent_(std::move(agent)),
      train_env_(std::move(train_env)),
      eval_env_(std::move(eval_env)),
      eval_every_(eval_every),
      eval_episodes_(eval_episodes),
      endpoint_(endpoint) {
    if (eval_every_ == 0) throw std::invalid_argument("eval_every must be > 0");
}

void AgentWorker::run() {
    for (;;) {
        const wire::Message m = endpoint_.recv();
        if (std::holds_alternative<wire::Shutdown>(m.body)) return;

        if (const auto* sl = std::get_if<wire::SelfLearnSignal>(&m.body)) {
            learn_phase(sl->steps);
        } else if (const auto* q = std::get_if<wire::QueryState>(&m.body)) {
            wire::Message reply;
            reply.round_id = m.round_id;
            reply.agent_id = static_cast<std::uint16_t>(id_);
            reply.body = wire::QValuesReply{
                q->tag, agent_->answer_query(State{q->state})};
            endpoint_.send(reply);
        } else if (const auto* t = std::get_if<wire::FedTDTarget>(&m.body)) {
            agent_->improve(State{t->state}, Action{t->action}, t->target);
            wire::Message ack;
            ack.round_id = m.round_id;
            ack.agent_id = static_cast<std::uint16_t>(id_);
            ack.body = wire::ImproveAck{};
            endpoint_.send(ack);
        } else {
            throw std::logic_error("agent received a reply-kind message");
        }
    }
}

void AgentWorker::learn_phase(std::uint64_t steps) {
    ++phase_;
    while (steps > 0) {
        const std::uint64_t until_checkpoint =
            eval_every_ - (consumed_ % eval_every_);
        const std::uint64_t chunk = std::min(steps, until_checkpoint);
        agent_->self_learn(*train_env_, chunk);
        consumed_ += chunk;
        steps -= chunk;
        if (consumed_ % eval_every_ == 0) record_eval();
    }
}

void AgentWorker::record_eval() {
    EvalPoint point;
    point.consumed = consumed_;
    point.phase = phase_;
    point.returns.reserve(static_cast<std::size_t>(eval_episodes_));
    for (int e = 0; e < eval_episodes_; ++e) {
        eval_env_->reset();
        double total = 0.0;
        while (!eval_env_->done()) {
            const Transition t = eval_env_->step(agent_->act_greedy(eval_env_->state()));
            total += t.r;
        }
        point.returns.push_back(total);
    }
    curve_.points.push_back(std::move(point));
}

// ---------------------------------------------------------------------------
// One seeded run.

RunResult run_one_seed(const RunSpec& spec, std::uint64_t run_seed) {
    const int n_agents = static_cast<int>(spec.agents.size());
    if (n_agents == 0) throw std::invalid_argument("run needs at least one agent");
    if (spec.budget_per_agent == 0)
        throw std::invalid_argument("budget_per_agent must be > 0");

    // Transport: matched hub/endpoints, either backend.
    std::unique_ptr<wire::ServerHub> hub;
    std::vector<std::unique_ptr<wire::AgentEndpoint>> endpoints(
        static_cast<std::size_t>(n_agents));
    if (spec.transport == TransportKind::Inproc) {
        wire::InprocTransport t = wire::make_inproc_transport(n_agents);
        hub = std::move(t.hub);
        endpoints = std::move(t.endpoints);
    } else {
        hub = wire::listen_tcp_hub(n_agents, spec.tcp_port);
        for (int i = 0; i < n_agents; ++i)
            endpoints[static_cast<std::size_t>(i)] =
                wire::connect_tcp_endpoint(spec.tcp_port, i);
    }

    // Server-side environment copy.
    EnvConfig server_env_cfg = spec.env;
    server_env_cfg.seed = derive_seed(run_seed, seed_tag::kServerEnv);
    std::unique_ptr<Environment> server_env = make_env(server_env_cfg);

    // Workers: agent + private train/eval environment copies.
    std::vector<std::unique_ptr<AgentWorker>> workers;
    workers.reserve(static_cast<std::size_t>(n_agents));
    const std::unique_ptr<Environment> probe = make_env(spec.env);
    for (int i = 0; i < n_agents; ++i) {
        AgentConfig acfg = spec.agents[static_cast<std::size_t>(i)];
        const std::uint64_t n = static_cast<std::uint64_t>(i);
        acfg.spec.init_seed = derive_seed(run_seed, seed_tag::kNetInit, n);
        acfg.action_seed = derive_seed(run_seed, seed_tag::kAction, n);
        acfg.replay_seed = derive_seed(run_seed, seed_tag::kReplay, n);

        EnvConfig train_cfg = spec.env;
        train_cfg.seed = derive_seed(run_seed, seed_tag::kAgentEnv, n);
        EnvConfig eval_cfg = spec.env;
        eval_cfg.seed = derive_seed(run_seed, seed_tag::kEvalEnv, n);

        workers.push_back(std::make_unique<AgentWorker>(
            i,
            make_agent(acfg, probe->state_dim(), probe->action_count(),
                       spec.env.gamma),
            make_env(train_cfg), make_env(eval_cfg), spec.eval_every,
            spec.eval_episodes, *endpoints[static_cast<std::size_t>(i)]));
    }

    std::vector<std::thread> threads;
    threads.reserve(workers.size());
    std::mutex error_mu;
    std::exception_ptr worker_error;
    for (auto& w : workers)
        threads.emplace_back([worker = w.get(), &error_mu, &worker_error] {
            try {
                worker->run();
            } catch (...) {
                std::lock_guard lock(error_mu);
                if (!worker_error) worker_error = std::current_exception();
            }
        });

    RunResult result;
    result.ledger.per_agent.assign(static_cast<std::size_t>(n_agents), 0);
    result.ledger.cap = spec.budget_per_agent;
    result.server_at_phase.resize(static_cast<std::size_t>(n_agents));

    const std::uint64_t system_budget =
        spec.budget_per_agent * static_cast<std::uint64_t>(n_agents);
    std::uint64_t exchange_id = 0;

    try {
        for (;;) {
            bool any_phase = false;
            for (int i = 0; i < n_agents; ++i) {
                const std::size_t idx = static_cast<std::size_t>(i);
                const std::uint64_t remaining =
                    spec.budget_per_agent - result.ledger.per_agent[idx];
                const std::uint64_t steps =
                    std::min<std::uint64_t>(remaining,
                                            spec.agents[idx].self_learn_steps);
                if (steps == 0) continue;
                any_phase = true;
                result.server_at_phase[idx].push_back(result.ledger.server);
                wire::Message signal;
                signal.round_id = exchange_id++;
                signal.body = wire::SelfLearnSignal{steps};
                hub->send_to(i, signal);
                result.ledger.per_agent[idx] += steps;
            }
            if (!any_phase) break;

            if (spec.federation) {
                federation_round(*server_env, *hub, spec.fed, result.ledger,
                                 system_budget, exchange_id);
                ++result.rounds_run;
            }
        }
        hub->broadcast(wire::Message{exchange_id++, 0, wire::Shutdown{}});
    } catch (...) {
        // Unblock workers before rethrowing (they may be waiting on recv).
        try {
            hub->broadcast(wire::Message{exchange_id++, 0, wire::Shutdown{}});
        } catch (...) {
        }
        for (auto& t : threads)
            if (t.joinable()) t.join();
        // A dead worker explains the transport failure better than the
        // timeout it caused.
        if (worker_error) std::rethrow_exception(worker_error);
        throw;
    }

    for (auto& t : threads) t.join();
    if (worker_error) std::rethrow_exception(worker_error);

    for (auto& w : workers) {
        result.curves.push_back(w->curve());
        result.total_env_steps += w->train_env().steps_taken();
    }
    result.total_env_steps += server_env->steps_taken();
    return result;
}

}  // namespace fedhql
