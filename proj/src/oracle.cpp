#include "fedhql/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedhql::oracle {

ChainStep chain_step(int length, int cell, int action) {
    int next = action == 1 ? cell + 1 : std::max(cell - 1, 0);
    bool terminal = next == length - 1;
    return {next, terminal ? 1.0 : 0.0, terminal};
}

std::vector<std::array<double, 2>> chain_optimal_q(int length, double gamma,
                                                   double tol) {
    const int n = length - 1;  // non-terminal cells
    std::vector<std::array<double, 2>> q(static_cast<std::size_t>(n),
                                         {0.0, 0.0});
    for (int sweep = 0; sweep < 100000; ++sweep) {
        double delta = 0.0;
        for (int cell = 0; cell < n; ++cell) {
            for (int a = 0; a < 2; ++a) {
                const ChainStep st = chain_step(length, cell, a);
                double v_next = 0.0;
                if (!st.terminal) {
                    const auto& row = q[static_cast<std::size_t>(st.next_cell)];
                    v_next = std::max(row[0], row[1]);
                }
                const double updated = st.reward + gamma * v_next;
                delta = std::max(
                    delta,
                    std::abs(updated - q[static_cast<std::size_t>(cell)]
                                           [static_cast<std::size_t>(a)]));
                q[static_cast<std::size_t>(cell)][static_cast<std::size_t>(a)] =
                    updated;
            }
        }
        if (delta < tol) return q;
    }
    throw std::runtime_error("value iteration did not reach a fixed point");
}

double chain_bellman_backup(const std::vector<std::array<double, 2>>& q,
                            int length, int cell, int action, double gamma) {
    const ChainStep st = chain_step(length, cell, action);
    double v_next = 0.0;
    if (!st.terminal) {
        const auto& row = q[static_cast<std::size_t>(st.next_cell)];
        v_next = std::max(row[0], row[1]);
    }
    return st.reward + gamma * v_next;
}

namespace {
double loss_at(const neural::Weights& w, const State& s, Action a,
               double target) {
    const QVector q = neural::forward(w, s);
    const double err = target - q[static_cast<std::size_t>(a.index)];
    return err * err;
}
}  // namespace

neural::Gradient finite_difference_gradient(const neural::Weights& w,
                                            const State& s, Action a,
                                            double target, double h) {
    neural::Weights probe = w;
    neural::Gradient g = neural::zeros_like(w);
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        for (std::size_t k = 0; k < w.layers[l].w.size(); ++k) {
            const double orig = probe.layers[l].w[k];
            probe.layers[l].w[k] = orig + h;
            const double hi = loss_at(probe, s, a, target);
            probe.layers[l].w[k] = orig - h;
            const double lo = loss_at(probe, s, a, target);
            probe.layers[l].w[k] = orig;
            g.layers[l].w[k] = (hi - lo) / (2.0 * h);
        }
        for (std::size_t k = 0; k < w.layers[l].b.size(); ++k) {
            const double orig = probe.layers[l].b[k];
            probe.layers[l].b[k] = orig + h;
            const double hi = loss_at(probe, s, a, target);
            probe.layers[l].b[k] = orig - h;
            const double lo = loss_at(probe, s, a, target);
            probe.layers[l].b[k] = orig;
            g.layers[l].b[k] = (hi - lo) / (2.0 * h);
        }
    }
    return g;
}

double max_relative_error(const neural::Gradient& a, const neural::Gradient& b) {
    double worst = 0.0;
    auto compare = [&worst](double x, double y) {
        const double denom = std::max({1.0, std::abs(x), std::abs(y)});
        worst = std::max(worst, std::abs(x - y) / denom);
    };
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        for (std::size_t k = 0; k < a.layers[l].w.size(); ++k)
            compare(a.layers[l].w[k], b.layers[l].w[k]);
        for (std::size_t k = 0; k < a.layers[l].b.size(); ++k)
            compare(a.layers[l].b[k], b.layers[l].b[k]);
    }
    return worst;
}

}  // namespace fedhql::oracle
