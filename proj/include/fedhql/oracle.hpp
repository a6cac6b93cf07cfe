#pragma once

#include <array>
#include <vector>

#include "fedhql/neural.hpp"
#include "fedhql/types.hpp"

// Independent reference computations used by the verification suites. Each
// function here derives its answer from first principles (explicit models,
// numerical differentiation) and deliberately shares no code with the
// implementation path it is used to check.
namespace fedhql::oracle {

/// One step of the corridor model, written out from its rules rather than
/// the environment class: action 1 moves right, action 0 left with a clamp
/// at cell 0; entering the last cell pays 1 and terminates.
struct ChainStep {
    int next_cell;
    double reward;
    bool terminal;
};
ChainStep chain_step(int length, int cell, int action);

/// Optimal action values of the corridor via value iteration on the
/// explicit model, run to a fixed point (sup-norm change below `tol`).
/// Returns q[cell][action] for the non-terminal cells 0..length-2.
std::vector<std::array<double, 2>> chain_optimal_q(int length, double gamma,
                                                   double tol = 1e-12);

/// One-step Bellman backup r + gamma * max_b q[next][b] (zero bootstrap on
/// terminal) of an arbitrary table on the explicit corridor model.
double chain_bellman_backup(const std::vector<std::array<double, 2>>& q,
                            int length, int cell, int action, double gamma);

/// Central finite-difference gradient of the squared regression loss
/// (target - forward(w,s)[a])^2 with respect to every parameter, using only
/// the forward pass. Layout matches Gradient.
neural::Gradient finite_difference_gradient(const neural::Weights& w,
                                            const State& s, Action a,
                                            double target, double h = 1e-5);

/// Largest relative discrepancy between two gradients:
/// max over components of |x - y| / max(1, |x|, |y|).
double max_relative_error(const neural::Gradient& a, const neural::Gradient& b);

}  // namespace fedhql::oracle
