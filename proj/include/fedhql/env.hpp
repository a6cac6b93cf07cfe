#pragma once

#include <cstdint>
#include <memory>

#include "fedhql/rng.hpp"
#include "fedhql/types.hpp"

namespace fedhql {

enum class EnvKind { CartPole, ChainMdp };

struct EnvConfig {
    EnvKind kind = EnvKind::CartPole;
    int horizon = 200;        // H, episode step cap
    double gamma = 0.99;      // discount, in (0,1)
    std::uint64_t seed = 0;   // stream seed for this copy
    int chain_length = 5;     // ChainMdp only

    bool operator==(const EnvConfig&) const = default;
};

/// Episodic MDP with deterministic, seedable dynamics. One instance is
/// single-owner: distinct agents and the server each hold their own copy.
///
/// Every emitted reward lies in [0, reward_bound()]; episodes never run
/// longer than the configured horizon. Identical (seed, action sequence)
/// pairs produce bit-identical transition sequences.
class Environment {
public:
    virtual ~Environment() = default;

    /// Starts a new episode and returns the initial state.
    State reset();

    /// Advances the episode. Stepping a finished episode is a contract
    /// violation and throws std::logic_error.
    Transition step(Action a);

    virtual int state_dim() const = 0;
    virtual int action_count() const = 0;
    virtual double reward_bound() const = 0;

    bool done() const { return done_; }
    const State& state() const { return state_; }
    int episode_steps() const { return episode_steps_; }

    /// Total step() calls over the lifetime of this instance, across all
    /// episodes. Used by budget-conservation checks.
    std::uint64_t steps_taken() const { return steps_taken_; }

    const EnvConfig& config() const { return config_; }

protected:
    explicit Environment(const EnvConfig& config);

    virtual State do_reset() = 0;
    // Returns (next state, reward, terminal-by-dynamics).
    virtual void do_step(Action a, State& next, double& reward, bool& terminal) = 0;

    SplitMix64 rng_;

private:
    EnvConfig config_;
    State state_;
    bool done_ = true;  // must reset() before stepping
    int episode_steps_ = 0;
    std::uint64_t steps_taken_ = 0;
};

std::unique_ptr<Environment> make_env(const EnvConfig& config);

/// Classic cart-pole balancing with explicit Euler integration.
/// Constants: gravity 9.8, cart mass 1.0, pole mass 0.1, pole half-length
/// 0.5, push force 10.0, time step 0.02. The episode fails when
/// |x| > 2.4 or |theta| > 12 degrees; a failing step yields reward 0,
/// every other step yields 1 (including one that merely hits the horizon).
/// reset() draws the four state components i.i.d. uniform on [-0.05, 0.05].
class CartPoleEnv final : public Environment {
public:
    explicit CartPoleEnv(const EnvConfig& config) : Environment(config) {}

    int state_dim() const override { return 4; }
    int action_count() const override { return 2; }
    double reward_bound() const override { return 1.0; }

protected:
    State do_reset() override;
    void do_step(Action a, State& next, double& reward, bool& terminal) override;
};

/// Deterministic corridor of `chain_length` cells, one-hot observations.
/// Action 0 moves left (clamped at cell 0), action 1 moves right. Entering
/// the last cell ends the episode with reward 1; every other move pays 0.
/// Episodes always start at cell 0. Solvable in closed form, which makes it
/// the oracle target for the tabular learning tests.
class ChainMdpEnv final : public Environment {
public:
    explicit ChainMdpEnv(const EnvConfig& config);

    int state_dim() const override { return length_; }
    int action_count() const override { return 2; }
    double reward_bound() const override { return 1.0; }

    int current_cell() const { return cell_; }
    static State one_hot(int cell, int length);

protected:
    State do_reset() override;
    void do_step(Action a, State& next, double& reward, bool& terminal) override;

private:
    int length_;
    int cell_ = 0;
};

}  // namespace fedhql
