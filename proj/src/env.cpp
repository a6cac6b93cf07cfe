#include "fedhql/env.hpp"

#include <cmath>
#include <stdexcept>

namespace fedhql {

namespace {
void validate(const EnvConfig& c) {
    if (c.horizon < 1) throw std::invalid_argument("env horizon must be >= 1");
    if (!(c.gamma > 0.0 && c.gamma < 1.0))
        throw std::invalid_argument("env gamma must be in (0,1)");
    if (c.kind == EnvKind::ChainMdp && c.chain_length < 2)
        throw std::invalid_argument("chain_length must be >= 2");
}
}  // namespace

Environment::Environment(const EnvConfig& config)
    : rng_(config.seed), config_(config) {
    validate(config);
}

State Environment::reset() {
    state_ = do_reset();
    done_ = false;
    episode_steps_ = 0;
    return state_;
}

Transition Environment::step(Action a) {
    if (done_)
        throw std::logic_error("step() called on a finished episode; reset() first");
    if (a.index < 0 || a.index >= action_count())
        throw std::invalid_argument("action index out of range");

    Transition t;
    t.s = state_;
    t.a = a;

    bool terminal = false;
    do_step(a, t.s_next, t.r, terminal);

    ++episode_steps_;
    ++steps_taken_;
    t.done = terminal || episode_steps_ >= config_.horizon;

    state_ = t.s_next;
    done_ = t.done;
    return t;
}

std::unique_ptr<Environment> make_env(const EnvConfig& config) {
    switch (config.kind) {
        case EnvKind::CartPole: return std::make_unique<CartPoleEnv>(config);
        case EnvKind::ChainMdp: return std::make_unique<ChainMdpEnv>(config);
    }
    throw std::invalid_argument("unknown environment kind");
}

// ---------------------------------------------------------------------------
// CartPole

namespace {
constexpr double kGravity = 9.8;
constexpr double kCartMass = 1.0;
constexpr double kPoleMass = 0.1;
constexpr double kTotalMass = kCartMass + kPoleMass;
constexpr double kHalfLength = 0.5;
constexpr double kPoleMassLength = kPoleMass * kHalfLength;
constexpr double kForce = 10.0;
constexpr double kTau = 0.02;
constexpr double kXThreshold = 2.4;
const double kThetaThreshold = 12.0 * 2.0 * M_PI / 360.0;
}  // namespace

State CartPoleEnv::do_reset() {
    State s;
    s.values.resize(4);
    for (double& v : s.values) v = rng_.uniform(-0.05, 0.05);
    return s;
}

void CartPoleEnv::do_step(Action a, State& next, double& reward, bool& terminal) {
    double x = state().values[0];
    double x_dot = state().values[1];
    double theta = state().values[2];
    double theta_dot = state().values[3];

    const double force = (a.index == 1) ? kForce : -kForce;
    const double cos_t = std::cos(theta);
    const double sin_t = std::sin(theta);

    const double temp =
        (force + kPoleMassLength * theta_dot * theta_dot * sin_t) / kTotalMass;
    const double theta_acc =
        (kGravity * sin_t - cos_t * temp) /
        (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / kTotalMass));
    const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;

    x += kTau * x_dot;
    x_dot += kTau * x_acc;
    theta += kTau * theta_dot;
    theta_dot += kTau * theta_acc;

    next.values = {x, x_dot, theta, theta_dot};
    terminal = x < -kXThreshold || x > kXThreshold || theta < -kThetaThreshold ||
               theta > kThetaThreshold;
    reward = terminal ? 0.0 : 1.0;
}

// ---------------------------------------------------------------------------
// Chain MDP

ChainMdpEnv::ChainMdpEnv(const EnvConfig& config)
    : Environment(config), length_(config.chain_length) {}

State ChainMdpEnv::one_hot(int cell, int length) {
    State s;
    s.values.assign(static_cast<std::size_t>(length), 0.0);
    s.values[static_cast<std::size_t>(cell)] = 1.0;
    return s;
}

State ChainMdpEnv::do_reset() {
    cell_ = 0;
    return one_hot(cell_, length_);
}

void ChainMdpEnv::do_step(Action a, State& next, double& reward, bool& terminal) {
    if (a.index == 1) {
        cell_ += 1;
    } else if (cell_ > 0) {
        cell_ -= 1;
    }
    terminal = cell_ == length_ - 1;
    reward = terminal ? 1.0 : 0.0;
    next = one_hot(cell_, length_);
}

}  // namespace fedhql
