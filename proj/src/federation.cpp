#include "fedhql/federation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedhql {

AggregateStats aggregate(const std::vector<QVector>& qs, double lambda) {
    if (qs.empty()) throw std::invalid_argument("aggregate: no QVectors");
    if (lambda < 0.0) throw std::invalid_argument("aggregate: lambda must be >= 0");
    const std::size_t n_actions = qs.front().size();
    for (const QVector& q : qs)
        if (q.size() != n_actions)
            throw std::invalid_argument("aggregate: ragged QVector lengths");

    const double n = static_cast<double>(qs.size());
    AggregateStats stats;
    stats.mean.resize(n_actions);
    stats.std.resize(n_actions);
    stats.ucb.resize(n_actions);

    for (std::size_t a = 0; a < n_actions; ++a) {
        double sum = 0.0;
        for (const QVector& q : qs) sum += q[a];
        const double mean = sum / n;
        double var = 0.0;
        for (const QVector& q : qs) {
            const double d = mean - q[a];
            var += d * d;
        }
        var /= n;
        stats.mean[a] = mean;
        stats.std[a] = std::sqrt(var);
        stats.ucb[a] = mean + lambda * stats.std[a];
    }
    return stats;
}

Action select_action(const AggregateStats& stats) {
    if (stats.ucb.empty()) throw std::invalid_argument("select_action: empty stats");
    std::size_t best = 0;
    for (std::size_t a = 1; a < stats.ucb.size(); ++a)
        if (stats.ucb[a] > stats.ucb[best]) best = a;
    return Action{static_cast<int>(best)};
}

double theoretical_ucb(const std::vector<double>& values, double c, double b) {
    if (values.empty()) throw std::invalid_argument("theoretical_ucb: no values");
    if (!(c > 0.0) || !(b > 0.0))
        throw std::invalid_argument("theoretical_ucb: c and b must be > 0");
    for (double v : values)
        if (!(v >= 0.0 && v <= b))
            throw std::invalid_argument(
                "theoretical_ucb: value outside [0, b] violates boundedness");

    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : values) {
        const double d = mean - v;
        var += d * d;
    }
    var /= n;
    return mean + std::sqrt(2.0 * c * var / n) + 3.0 * b * c / n;
}

double fedtd_update(double qbar_sa, double r, const QVector& qbar_next,
                    bool done, double alpha_s, double gamma) {
    if (!(alpha_s >= 0.0 && alpha_s <= 1.0))
        throw std::invalid_argument("fedtd_update: alpha_s must be in [0, 1]");
    double bootstrap = 0.0;
    if (!done) {
        if (qbar_next.empty())
            throw std::invalid_argument("fedtd_update: empty next-state values");
        bootstrap = gamma * *std::max_element(qbar_next.begin(), qbar_next.end());
    }
    return qbar_sa + alpha_s * (r + bootstrap - qbar_sa);
}

Sampler uniform_sampler(double lo, double hi) {
    return Sampler{
        [lo, hi](SplitMix64& rng) { return rng.uniform(lo, hi); },
        (lo + hi) / 2.0,
    };
}

Sampler two_point_sampler(double a, double b) {
    return Sampler{
        [a, b](SplitMix64& rng) { return rng.next_double() < 0.5 ? a : b; },
        (a + b) / 2.0,
    };
}

Sampler point_mass_sampler(double v) {
    return Sampler{[v](SplitMix64&) { return v; }, v};
}

double coverage_test(const Sampler& sampler, int n, double c, double b,
                     int trials, std::uint64_t seed) {
    if (n < 1 || trials < 1)
        throw std::invalid_argument("coverage_test: n and trials must be >= 1");
    if (!(c > 0.0) || !(b > 0.0))
        throw std::invalid_argument("coverage_test: c and b must be > 0");

    SplitMix64 rng(seed);
    std::vector<double> xs(static_cast<std::size_t>(n));
    int covered = 0;
    for (int t = 0; t < trials; ++t) {
        double sum = 0.0;
        for (double& x : xs) {
            x = sampler.draw(rng);
            if (!(x >= 0.0 && x <= b))
                throw std::invalid_argument(
                    "coverage_test: sampler emitted a value outside [0, b]");
            sum += x;
        }
        const double mean = sum / n;
        double var = 0.0;
        for (double x : xs) {
            const double d = x - mean;
            var += d * d;
        }
        var /= n;
        const double radius = std::sqrt(2.0 * var * c / n) + 3.0 * b * c / n;
        if (std::abs(mean - sampler.mean) <= radius) ++covered;
    }
    return static_cast<double>(covered) / trials;
}

double coverage_requirement(double c, int trials) {
    const double p = 1.0 - 3.0 * std::exp(-c);
    const double mc_sigma = std::sqrt(std::max(p * (1.0 - p), 0.0) / trials);
    return p - 3.0 * mc_sigma;
}

}  // namespace fedhql
