#include "fedhql/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedhql {

namespace {

int greedy_index(const QVector& q) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < q.size(); ++a)
        if (q[a] > q[best]) best = a;
    return static_cast<int>(best);
}

// Shared epsilon-greedy draw protocol: one uniform for the explore branch,
// one more only when exploring.
Action epsilon_greedy(const QVector& q, double epsilon, SplitMix64& rng) {
    if (epsilon > 0.0 && rng.next_double() < epsilon)
        return Action{static_cast<int>(rng.next_below(q.size()))};
    return Action{greedy_index(q)};
}

}  // namespace

// ---------------------------------------------------------------------------
// ReplayBuffer

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0)
        throw std::invalid_argument("replay capacity must be positive");
    items_.resize(capacity_);
}

void ReplayBuffer::push(Transition t) {
    items_[next_] = std::move(t);
    next_ = (next_ + 1) % capacity_;
    if (size_ < capacity_) ++size_;
}

const Transition& ReplayBuffer::at(std::size_t logical_index) const {
    if (logical_index >= size_)
        throw std::out_of_range("replay index out of range");
    const std::size_t oldest = size_ < capacity_ ? 0 : next_;
    return items_[(oldest + logical_index) % capacity_];
}

const Transition& ReplayBuffer::sample(SplitMix64& rng) const {
    if (size_ == 0) throw std::logic_error("sampling an empty replay buffer");
    const std::size_t physical = rng.next_below(size_);
    return items_[physical];
}

// ---------------------------------------------------------------------------
// DqnAgent

DqnAgent::DqnAgent(const AgentConfig& config, double gamma)
    : config_(config),
      gamma_(gamma),
      online_(neural::init_weights(config.spec)),
      target_(online_),
      replay_(config.replay_capacity),
      rng_act_(config.action_seed),
      rng_replay_(config.replay_seed),
      grad_(neural::zeros_like(online_)) {
    if (!(config.lr > 0.0)) throw std::invalid_argument("agent lr must be > 0");
    if (!(config.epsilon >= 0.0 && config.epsilon <= 1.0))
        throw std::invalid_argument("agent epsilon must be in [0,1]");
    if (config.batch_size < 1 ||
        static_cast<std::size_t>(config.batch_size) > config.replay_capacity)
        throw std::invalid_argument("batch_size must be in [1, replay_capacity]");
    if (config.kappa < 0) throw std::invalid_argument("kappa must be >= 0");
}

Action DqnAgent::act(const State& s) {
    QVector q;
    neural::forward_into(online_, s.values, ws_, q);
    return epsilon_greedy(q, config_.epsilon, rng_act_);
}

Action DqnAgent::act_greedy(const State& s) const {
    QVector q;
    neural::forward_into(online_, s.values, ws_, q);
    return Action{greedy_index(q)};
}

void DqnAgent::train_minibatch() {
    if (replay_.size() < static_cast<std::size_t>(config_.batch_size)) return;

    neural::fill_zero(grad_);
    QVector q_next;
    for (int i = 0; i < config_.batch_size; ++i) {
        const Transition& t = replay_.sample(rng_replay_);
        double y = t.r;
        if (!t.done) {
            neural::forward_into(target_, t.s_next.values, ws_, q_next);
            y += gamma_ * *std::max_element(q_next.begin(), q_next.end());
        }
        neural::accumulate_gradient(online_, t.s.values, t.a.index, y, grad_,
                                    ws_);
    }
    // Mean gradient over the batch, clipped, one step.
    const double scale = 1.0 / config_.batch_size;
    for (auto& layer : grad_.layers) {
        for (double& g : layer.w) g *= scale;
        for (double& g : layer.b) g *= scale;
    }
    neural::clip_grad_norm(grad_, config_.max_grad_norm);
    neural::sgd_step(online_, grad_, config_.lr);
}

std::uint64_t DqnAgent::self_learn(Environment& env, std::uint64_t steps) {
    for (std::uint64_t i = 0; i < steps; ++i) {
        if (env.done()) env.reset();
        const Action a = act(env.state());
        Transition t = env.step(a);
        replay_.push(std::move(t));
        ++env_steps_;
        train_minibatch();
        if (config_.target_sync_every > 0 &&
            env_steps_ % static_cast<std::uint64_t>(config_.target_sync_every) == 0)
            target_ = online_;
    }
    return steps;
}

QVector DqnAgent::answer_query(const State& s) const {
    QVector q;
    neural::forward_into(online_, s.values, ws_, q);
    return q;
}

void DqnAgent::improve(const State& s, Action a, double target) {
    if (!std::isfinite(target))
        throw std::invalid_argument("improvement target must be finite");
    const double step = config_.improve_step();
    for (int k = 0; k < config_.kappa; ++k) {
        neural::fill_zero(grad_);
        neural::accumulate_gradient(online_, s.values, a.index, target, grad_,
                                    ws_);
        neural::sgd_step(online_, grad_, step);
    }
}

// ---------------------------------------------------------------------------
// TabularAgent

TabularAgent::TabularAgent(const AgentConfig& config, double gamma,
                           int n_states, int n_actions)
    : config_(config),
      gamma_(gamma),
      n_states_(n_states),
      n_actions_(n_actions),
      table_(static_cast<std::size_t>(n_states) * n_actions, 0.0),
      rng_act_(config.action_seed) {
    if (n_states < 1 || n_actions < 1)
        throw std::invalid_argument("tabular agent needs positive dimensions");
}

int TabularAgent::state_index(const State& s) const {
    if (static_cast<int>(s.values.size()) != n_states_)
        throw std::invalid_argument("state dimension does not match table");
    return greedy_index(s.values);  // index of the hot component
}

Action TabularAgent::act(const State& s) {
    return epsilon_greedy(answer_query(s), config_.epsilon, rng_act_);
}

Action TabularAgent::act_greedy(const State& s) const {
    return Action{greedy_index(answer_query(s))};
}

std::uint64_t TabularAgent::self_learn(Environment& env, std::uint64_t steps) {
    for (std::uint64_t i = 0; i < steps; ++i) {
        if (env.done()) env.reset();
        const Action a = act(env.state());
        const Transition t = env.step(a);
        const int si = state_index(t.s);
        double bootstrap = 0.0;
        if (!t.done) {
            const QVector next_row = answer_query(t.s_next);
            bootstrap = gamma_ * *std::max_element(next_row.begin(), next_row.end());
        }
        double& entry =
            table_[static_cast<std::size_t>(si) * n_actions_ + t.a.index];
        entry += config_.lr * (t.r + bootstrap - entry);
    }
    return steps;
}

QVector TabularAgent::answer_query(const State& s) const {
    const int si = state_index(s);
    const auto first = table_.begin() + static_cast<std::ptrdiff_t>(si) * n_actions_;
    return QVector(first, first + n_actions_);
}

void TabularAgent::improve(const State& s, Action a, double target) {
    if (!std::isfinite(target))
        throw std::invalid_argument("improvement target must be finite");
    if (a.index < 0 || a.index >= n_actions_)
        throw std::invalid_argument("action index out of range");
    const int si = state_index(s);
    double& entry =
        table_[static_cast<std::size_t>(si) * n_actions_ + a.index];
    const double step = config_.improve_step();
    // d/dq (target - q)^2 = -2 (target - q)
    for (int k = 0; k < config_.kappa; ++k)
        entry += 2.0 * step * (target - entry);
}

double TabularAgent::value(int state, int action) const {
    return table_[static_cast<std::size_t>(state) * n_actions_ + action];
}

void TabularAgent::set_value(int state, int action, double v) {
    table_[static_cast<std::size_t>(state) * n_actions_ + action] = v;
}

// ---------------------------------------------------------------------------

std::unique_ptr<Agent> make_agent(const AgentConfig& config, int state_dim,
                                  int n_actions, double gamma) {
    if (config.tabular)
        return std::make_unique<TabularAgent>(config, gamma, state_dim,
                                              n_actions);
    AgentConfig c = config;
    if (c.spec.input_dim == 0) c.spec.input_dim = state_dim;
    if (c.spec.output_dim == 0) c.spec.output_dim = n_actions;
    if (c.spec.input_dim != state_dim || c.spec.output_dim != n_actions)
        throw std::invalid_argument(
            "network spec does not match environment dimensions");
    return std::make_unique<DqnAgent>(c, gamma);
}

}  // namespace fedhql
