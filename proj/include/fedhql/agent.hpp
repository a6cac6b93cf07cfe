#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "fedhql/env.hpp"
#include "fedhql/neural.hpp"
#include "fedhql/rng.hpp"
#include "fedhql/types.hpp"

namespace fedhql {

struct AgentConfig {
    bool tabular = false;             // explicit Q-table instead of a network
    neural::NetworkSpec spec;         // network mode only
    double lr = 0.005;                // self-learning step size
    double epsilon = 0.01;            // intra-exploration coefficient
    double improve_lr = -1.0;         // regression step size; < 0 copies lr
    int kappa = 64;                   // gradient steps per improvement target
    std::size_t replay_capacity = 10000;
    int batch_size = 128;
    int target_sync_every = 1000;     // env steps between target-net copies
    double max_grad_norm = 10.0;      // self-learning clip; <= 0 disables
    std::uint64_t self_learn_steps = 5000;  // per-phase default
    std::uint64_t action_seed = 0;    // private exploration stream
    std::uint64_t replay_seed = 0;    // private minibatch-sampling stream

    double improve_step() const { return improve_lr < 0.0 ? lr : improve_lr; }

    bool operator==(const AgentConfig&) const = default;
};

/// Fixed-capacity FIFO over transitions; holds an agent's private
/// experience and is never read by any other party.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    const Transition& at(std::size_t logical_index) const;  // 0 = oldest

    /// Uniform with replacement from the private stream.
    const Transition& sample(SplitMix64& rng) const;

private:
    std::vector<Transition> items_;
    std::size_t capacity_;
    std::size_t size_ = 0;
    std::size_t next_ = 0;
};

/// A heterogeneous Q-learning agent behind the black-box boundary: it acts
/// in its own environment copy, answers value queries, and regresses toward
/// broadcast targets. Nothing else about it is observable.
class Agent {
public:
    virtual ~Agent() = default;

    /// Epsilon-greedy action from the agent's private stream. Ties in the
    /// greedy branch break toward the lowest action index.
    virtual Action act(const State& s) = 0;

    /// Greedy action, no exploration and no stream consumption (used by
    /// evaluation rollouts).
    virtual Action act_greedy(const State& s) const = 0;

    /// Runs `steps` interactions with epsilon-greedy behavior, storing
    /// every transition and learning from each one. Episodes reset as
    /// needed; an unfinished episode carries over to the next call.
    /// Returns the number of interactions consumed (= steps).
    virtual std::uint64_t self_learn(Environment& env, std::uint64_t steps) = 0;

    /// Current value estimates at `s`, all actions. Pure.
    virtual QVector answer_query(const State& s) const = 0;

    /// kappa gradient steps regressing the value of (s, a) toward `target`.
    virtual void improve(const State& s, Action a, double target) = 0;

    virtual int action_count() const = 0;
};

/// Network-backed agent: replay buffer, target network, one minibatch
/// update per interaction (mean gradient over the batch, one SGD step).
class DqnAgent final : public Agent {
public:
    DqnAgent(const AgentConfig& config, double gamma);

    Action act(const State& s) override;
    Action act_greedy(const State& s) const override;
    std::uint64_t self_learn(Environment& env, std::uint64_t steps) override;
    QVector answer_query(const State& s) const override;
    void improve(const State& s, Action a, double target) override;
    int action_count() const override { return online_.output_dim; }

    const neural::Weights& weights() const { return online_; }
    const ReplayBuffer& replay() const { return replay_; }

private:
    void train_minibatch();

    AgentConfig config_;
    double gamma_;
    neural::Weights online_;
    neural::Weights target_;
    ReplayBuffer replay_;
    SplitMix64 rng_act_;
    SplitMix64 rng_replay_;
    std::uint64_t env_steps_ = 0;
    neural::Gradient grad_;
    mutable neural::Workspace ws_;
};

/// Table-backed agent over one-hot states; same interfaces, exactly
/// checkable against the value-iteration oracle. Self-learning applies the
/// online Q-learning backup per transition.
class TabularAgent final : public Agent {
public:
    TabularAgent(const AgentConfig& config, double gamma, int n_states,
                 int n_actions);

    Action act(const State& s) override;
    Action act_greedy(const State& s) const override;
    std::uint64_t self_learn(Environment& env, std::uint64_t steps) override;
    QVector answer_query(const State& s) const override;
    void improve(const State& s, Action a, double target) override;
    int action_count() const override { return n_actions_; }

    double value(int state, int action) const;
    void set_value(int state, int action, double v);

private:
    int state_index(const State& s) const;

    AgentConfig config_;
    double gamma_;
    int n_states_;
    int n_actions_;
    std::vector<double> table_;  // row-major [state][action]
    SplitMix64 rng_act_;
};

/// Builds the agent described by `config` for an environment with the given
/// dimensions and discount.
std::unique_ptr<Agent> make_agent(const AgentConfig& config, int state_dim,
                                  int n_actions, double gamma);

}  // namespace fedhql
