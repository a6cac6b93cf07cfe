#pragma once

#include <vector>

namespace fedhql {

/// Observation vector. Dimension is fixed per environment instance
/// (CartPole: 4, chain MDP of length n: n, one-hot).
struct State {
    std::vector<double> values;

    bool operator==(const State&) const = default;
};

/// Discrete action, an index in [0, action_count).
struct Action {
    int index = 0;

    bool operator==(const Action&) const = default;
};

/// One environment interaction (s, a, s', r, done). Private to the party
/// that generated it; never crosses the federation wire.
struct Transition {
    State s;
    Action a;
    State s_next;
    double r = 0.0;
    bool done = false;
};

/// Action-value estimates at one queried state, one entry per action.
/// The only learning signal an agent ever exports.
using QVector = std::vector<double>;

}  // namespace fedhql
