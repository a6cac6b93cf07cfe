#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedhql/types.hpp"

namespace fedhql::neural {

enum class Activation { Tanh, ReLU };

struct LayerSpec {
    int width = 0;
    Activation act = Activation::Tanh;

    bool operator==(const LayerSpec&) const = default;
};

struct NetworkSpec {
    int input_dim = 0;
    std::vector<LayerSpec> hidden;  // at least one layer
    int output_dim = 0;             // = action count
    std::uint64_t init_seed = 0;

    bool operator==(const NetworkSpec&) const = default;
};

/// One affine layer, weights row-major (rows = outputs, cols = inputs).
/// The final layer of a network is linear; `act` applies to hidden layers.
struct Layer {
    std::vector<double> w;
    std::vector<double> b;
    int in = 0;
    int out = 0;
    Activation act = Activation::Tanh;
};

/// Full parameter set of one network. Also the container for gradients,
/// which are shape-congruent by construction.
struct Weights {
    std::vector<Layer> layers;  // hidden layers then the linear output layer
    int input_dim = 0;
    int output_dim = 0;
};

using Gradient = Weights;

struct BackwardResult {
    double loss = 0.0;
    Gradient grad;
};

/// Reusable forward/backward scratch space; avoids per-call allocation in
/// the training loop. Any instance works with any network.
struct Workspace {
    std::vector<std::vector<double>> pre;  // pre-activations per layer
    std::vector<std::vector<double>> act;  // act[0] = input, act[l+1] = layer l output
    std::vector<double> delta, delta_prev;
};

/// Draws weights uniform on [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer
/// from spec.init_seed (row-major order, layer by layer); biases zero.
Weights init_weights(const NetworkSpec& spec);

/// Zero-valued parameter set with the same shapes (gradient accumulator).
Gradient zeros_like(const Weights& w);
void fill_zero(Gradient& g);

/// Q-values for one state. Pure function of (w, x); throws on dimension
/// mismatch.
QVector forward(const Weights& w, const State& s);
void forward_into(const Weights& w, std::span<const double> x, Workspace& ws,
                  QVector& out);

/// Squared-error regression of one output entry toward a scalar target:
/// loss = (target - forward(w,s)[a])^2, grad = exact d(loss)/dw. Only the
/// target action's output row receives upstream gradient.
BackwardResult backward(const Weights& w, const State& s, Action target_action,
                        double target_value);

/// Accumulating variant for minibatch training: adds the per-sample
/// gradient into `acc` and returns the per-sample loss.
double accumulate_gradient(const Weights& w, std::span<const double> x,
                           int target_action, double target_value,
                           Gradient& acc, Workspace& ws);

/// w <- w - lr * g, elementwise.
void sgd_step(Weights& w, const Gradient& g, double lr);

/// Euclidean norm over every gradient component.
double grad_norm(const Gradient& g);

/// Rescales g to norm `max_norm` when it exceeds it (no-op otherwise).
void clip_grad_norm(Gradient& g, double max_norm);

/// Total scalar parameter count.
std::size_t param_count(const Weights& w);

}  // namespace fedhql::neural
