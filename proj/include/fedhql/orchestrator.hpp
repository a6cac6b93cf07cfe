#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "fedhql/agent.hpp"
#include "fedhql/env.hpp"
#include "fedhql/federation.hpp"
#include "fedhql/transport.hpp"

namespace fedhql {

/// Interaction accounting for the system-budget objective: every training
/// env.step() increments exactly one counter here, either one agent's or
/// the server's. Evaluation rollouts run on separate instances and are not
/// charged.
struct BudgetLedger {
    std::vector<std::uint64_t> per_agent;
    std::uint64_t server = 0;
    std::uint64_t cap = 0;  // per-agent interaction budget

    std::uint64_t agents_total() const {
        std::uint64_t s = 0;
        for (std::uint64_t v : per_agent) s += v;
        return s;
    }
    std::uint64_t system_total() const { return agents_total() + server; }
};

/// One TD step of a federation round, kept for logging and the round-level
/// oracle checks.
struct TraceStep {
    State s;
    Action a;
    double r = 0.0;
    bool done = false;
    double qbar_before = 0.0;
    double qbar_after = 0.0;
};

struct RoundState {
    int t = 0;  // TD steps executed
    std::vector<TraceStep> trace;
    int query_broadcasts = 0;
};

/// Runs one federation round against the connected agents: query the
/// current state, score actions, act in the server's own environment copy,
/// query the next state, apply the server TD backup and broadcast the
/// updated value for the agents' improvement steps. Loops until the server
/// episode ends, h_fed steps elapse, or the system budget runs out.
///
/// `exchange_id` numbers each broadcast/collect pair and is advanced;
/// replies must echo it. Transport failures propagate as
/// wire::RoundAborted.
RoundState federation_round(Environment& server_env, wire::ServerHub& hub,
                            const FedConfig& fed, BudgetLedger& ledger,
                            std::uint64_t system_budget,
                            std::uint64_t& exchange_id);

/// One greedy evaluation checkpoint: episode returns plus the coordinates
/// needed to place it on either consumption axis.
struct EvalPoint {
    std::uint64_t consumed = 0;   // agent's own interactions so far
    std::uint64_t phase = 0;      // 1-based self-learning phase index
    std::vector<double> returns;  // one per evaluation episode
};

struct AgentCurve {
    std::vector<EvalPoint> points;
};

/// Drives one agent behind its endpoint: reacts to self-learn signals,
/// value queries and improvement targets until shutdown. Evaluation
/// rollouts (greedy, separate env, not budget-charged) run at every
/// eval_every interactions inside the self-learning handler.
class AgentWorker {
public:
    AgentWorker(int id, std::unique_ptr<Agent> agent,
                std::unique_ptr<Environment> train_env,
                std::unique_ptr<Environment> eval_env, std::uint64_t eval_every,
                int eval_episodes, wire::AgentEndpoint& endpoint);

    /// Event loop; returns after a Shutdown message.
    void run();

    const AgentCurve& curve() const { return curve_; }
    std::uint64_t consumed() const { return consumed_; }
    const Environment& train_env() const { return *train_env_; }
    Agent& agent() { return *agent_; }

private:
    void learn_phase(std::uint64_t steps);
    void record_eval();

    int id_;
    std::unique_ptr<Agent> agent_;
    std::unique_ptr<Environment> train_env_;
    std::unique_ptr<Environment> eval_env_;
    std::uint64_t eval_every_;
    int eval_episodes_;
    wire::AgentEndpoint& endpoint_;
    std::uint64_t consumed_ = 0;
    std::uint64_t phase_ = 0;
    AgentCurve curve_;
};

enum class TransportKind { Inproc, Tcp };

/// Everything one seeded run needs. Role seeds (envs, network init,
/// exploration, replay) are derived from the run seed, so a run is a pure
/// function of (spec, run_seed).
struct RunSpec {
    EnvConfig env;
    std::vector<AgentConfig> agents;
    FedConfig fed;
    std::uint64_t budget_per_agent = 0;
    std::uint64_t eval_every = 5000;
    int eval_episodes = 10;
    bool federation = true;  // false: independent self-learning baseline
    TransportKind transport = TransportKind::Inproc;
    int tcp_port = 47800;
};

struct RunResult {
    std::vector<AgentCurve> curves;
    BudgetLedger ledger;
    /// ledger.server at the moment each agent's k-th phase was dispatched;
    /// indexed [agent][phase-1]. Places checkpoints on the system axis.
    std::vector<std::vector<std::uint64_t>> server_at_phase;
    std::uint64_t rounds_run = 0;
    std::uint64_t total_env_steps = 0;  // instrumented over training envs
};

/// Executes one full run: alternating self-learning phases and federation
/// rounds until every agent reaches its budget cap.
RunResult run_one_seed(const RunSpec& spec, std::uint64_t run_seed);

}  // namespace fedhql
