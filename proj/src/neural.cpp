#include "fedhql/neural.hpp"

#include <cmath>
#include <stdexcept>

#include "fedhql/rng.hpp"

namespace fedhql::neural {

namespace {

// Four-accumulator dot product. The explicit reassociation is part of the
// defined numeric behavior (keeps results identical across call sites) and
// lets the compiler vectorize without -ffast-math.
double dot(const double* a, const double* b, int n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    double s = (s0 + s1) + (s2 + s3);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

// y += alpha * x
void axpy(double* y, double alpha, const double* x, int n) {
    for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double activate(Activation a, double z) {
    return a == Activation::Tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

// Derivative in terms of (pre-activation z, activation value y).
double activate_grad(Activation a, double z, double y) {
    return a == Activation::Tanh ? 1.0 - y * y : (z > 0.0 ? 1.0 : 0.0);
}

void validate_spec(const NetworkSpec& spec) {
    if (spec.input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
    if (spec.output_dim < 1) throw std::invalid_argument("output_dim must be >= 1");
    if (spec.hidden.empty())
        throw std::invalid_argument("network needs at least one hidden layer");
    for (const LayerSpec& l : spec.hidden)
        if (l.width < 1) throw std::invalid_argument("hidden width must be >= 1");
}

void check_input(const Weights& w, std::size_t dim) {
    if (static_cast<int>(dim) != w.input_dim)
        throw std::invalid_argument("state dimension does not match network input");
}

}  // namespace

Weights init_weights(const NetworkSpec& spec) {
    validate_spec(spec);
    SplitMix64 rng(spec.init_seed);

    Weights w;
    w.input_dim = spec.input_dim;
    w.output_dim = spec.output_dim;

    int in = spec.input_dim;
    for (const LayerSpec& ls : spec.hidden) {
        Layer layer;
        layer.in = in;
        layer.out = ls.width;
        layer.act = ls.act;
        layer.w.resize(static_cast<std::size_t>(layer.in) * layer.out);
        layer.b.assign(static_cast<std::size_t>(layer.out), 0.0);
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
        for (double& v : layer.w) v = rng.uniform(-bound, bound);
        w.layers.push_back(std::move(layer));
        in = ls.width;
    }

    Layer out_layer;
    out_layer.in = in;
    out_layer.out = spec.output_dim;
    out_layer.act = Activation::Tanh;  // unused; the output layer is linear
    out_layer.w.resize(static_cast<std::size_t>(out_layer.in) * out_layer.out);
    out_layer.b.assign(static_cast<std::size_t>(out_layer.out), 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(out_layer.in));
    for (double& v : out_layer.w) v = rng.uniform(-bound, bound);
    w.layers.push_back(std::move(out_layer));

    return w;
}

Gradient zeros_like(const Weights& w) {
    Gradient g = w;
    fill_zero(g);
    return g;
}

void fill_zero(Gradient& g) {
    for (Layer& l : g.layers) {
        std::fill(l.w.begin(), l.w.end(), 0.0);
        std::fill(l.b.begin(), l.b.end(), 0.0);
    }
}

void forward_into(const Weights& w, std::span<const double> x, Workspace& ws,
                  QVector& out) {
    check_input(w, x.size());
    const std::size_t n_layers = w.layers.size();
    ws.pre.resize(n_layers);
    ws.act.resize(n_layers + 1);
    ws.act[0].assign(x.begin(), x.end());

    for (std::size_t l = 0; l < n_layers; ++l) {
        const Layer& layer = w.layers[l];
        const std::vector<double>& in = ws.act[l];
        std::vector<double>& pre = ws.pre[l];
        std::vector<double>& act = ws.act[l + 1];
        pre.resize(static_cast<std::size_t>(layer.out));
        act.resize(static_cast<std::size_t>(layer.out));
        const bool last = l + 1 == n_layers;
        for (int o = 0; o < layer.out; ++o) {
            const double z =
                dot(layer.w.data() + static_cast<std::size_t>(o) * layer.in,
                    in.data(), layer.in) +
                layer.b[static_cast<std::size_t>(o)];
            pre[static_cast<std::size_t>(o)] = z;
            act[static_cast<std::size_t>(o)] = last ? z : activate(layer.act, z);
        }
    }
    out = ws.act[n_layers];
}

QVector forward(const Weights& w, const State& s) {
    Workspace ws;
    QVector out;
    forward_into(w, s.values, ws, out);
    return out;
}

double accumulate_gradient(const Weights& w, std::span<const double> x,
                           int target_action, double target_value,
                           Gradient& acc, Workspace& ws) {
    if (target_action < 0 || target_action >= w.output_dim)
        throw std::invalid_argument("target action out of range");

    QVector out;
    forward_into(w, x, ws, out);

    const double err = out[static_cast<std::size_t>(target_action)] - target_value;
    const double loss = err * err;
    const double upstream = 2.0 * err;  // d(loss)/d(prediction)

    const std::size_t n_layers = w.layers.size();

    // Output layer: the upstream gradient has a single nonzero entry, so the
    // weight gradient touches one row and the propagated delta is one
    // scaled column read.
    {
        const Layer& layer = w.layers[n_layers - 1];
        Layer& g = acc.layers[n_layers - 1];
        const std::vector<double>& in = ws.act[n_layers - 1];
        const std::size_t row =
            static_cast<std::size_t>(target_action) * layer.in;
        g.b[static_cast<std::size_t>(target_action)] += upstream;
        axpy(g.w.data() + row, upstream, in.data(), layer.in);

        ws.delta_prev.resize(static_cast<std::size_t>(layer.in));
        const double* wrow = layer.w.data() + row;
        if (n_layers >= 2) {
            const Layer& below = w.layers[n_layers - 2];
            const std::vector<double>& pre = ws.pre[n_layers - 2];
            const std::vector<double>& act = ws.act[n_layers - 1];
            for (int i = 0; i < layer.in; ++i)
                ws.delta_prev[static_cast<std::size_t>(i)] =
                    wrow[i] * upstream *
                    activate_grad(below.act, pre[static_cast<std::size_t>(i)],
                                  act[static_cast<std::size_t>(i)]);
        }
    }

    // Hidden layers, last to first.
    for (std::size_t l = n_layers - 1; l-- > 0;) {
        const Layer& layer = w.layers[l];
        Layer& g = acc.layers[l];
        const std::vector<double>& in = ws.act[l];
        std::swap(ws.delta, ws.delta_prev);

        for (int o = 0; o < layer.out; ++o) {
            const double d = ws.delta[static_cast<std::size_t>(o)];
            if (d == 0.0) continue;
            g.b[static_cast<std::size_t>(o)] += d;
            axpy(g.w.data() + static_cast<std::size_t>(o) * layer.in, d,
                 in.data(), layer.in);
        }

        if (l == 0) break;
        const Layer& below = w.layers[l - 1];
        const std::vector<double>& pre = ws.pre[l - 1];
        const std::vector<double>& act = ws.act[l];
        ws.delta_prev.assign(static_cast<std::size_t>(layer.in), 0.0);
        for (int o = 0; o < layer.out; ++o) {
            const double d = ws.delta[static_cast<std::size_t>(o)];
            if (d == 0.0) continue;
            axpy(ws.delta_prev.data(), d,
                 layer.w.data() + static_cast<std::size_t>(o) * layer.in,
                 layer.in);
        }
        for (int i = 0; i < layer.in; ++i)
            ws.delta_prev[static_cast<std::size_t>(i)] *=
                activate_grad(below.act, pre[static_cast<std::size_t>(i)],
                              act[static_cast<std::size_t>(i)]);
    }

    return loss;
}

BackwardResult backward(const Weights& w, const State& s, Action target_action,
                        double target_value) {
    BackwardResult r;
    r.grad = zeros_like(w);
    Workspace ws;
    r.loss = accumulate_gradient(w, s.values, target_action.index, target_value,
                                 r.grad, ws);
    return r;
}

void sgd_step(Weights& w, const Gradient& g, double lr) {
    if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
    if (g.layers.size() != w.layers.size())
        throw std::invalid_argument("gradient shape does not match weights");
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        Layer& wl = w.layers[l];
        const Layer& gl = g.layers[l];
        if (gl.w.size() != wl.w.size() || gl.b.size() != wl.b.size())
            throw std::invalid_argument("gradient shape does not match weights");
        axpy(wl.w.data(), -lr, gl.w.data(), static_cast<int>(wl.w.size()));
        axpy(wl.b.data(), -lr, gl.b.data(), static_cast<int>(wl.b.size()));
    }
}

double grad_norm(const Gradient& g) {
    double sq = 0.0;
    for (const Layer& l : g.layers) {
        sq += dot(l.w.data(), l.w.data(), static_cast<int>(l.w.size()));
        sq += dot(l.b.data(), l.b.data(), static_cast<int>(l.b.size()));
    }
    return std::sqrt(sq);
}

void clip_grad_norm(Gradient& g, double max_norm) {
    if (!(max_norm > 0.0)) return;
    const double norm = grad_norm(g);
    if (norm <= max_norm) return;
    const double scale = max_norm / norm;
    for (Layer& l : g.layers) {
        for (double& v : l.w) v *= scale;
        for (double& v : l.b) v *= scale;
    }
}

std::size_t param_count(const Weights& w) {
    std::size_t n = 0;
    for (const Layer& l : w.layers) n += l.w.size() + l.b.size();
    return n;
}

}  // namespace fedhql::neural
