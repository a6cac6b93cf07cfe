#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fedhql/rng.hpp"
#include "fedhql/types.hpp"

namespace fedhql {

/// Per-action aggregation of the group's value estimates at one state:
/// mean, population standard deviation (divisor N) of the group's
/// disagreement, and the resulting optimism score.
struct AggregateStats {
    QVector mean;
    QVector std;
    QVector ucb;
};

struct FedConfig {
    double lambda = 1.0;      // inter-agent exploration coefficient, >= 0
    double alpha_s = 0.05;    // server TD learning rate, in [0,1]
    int h_fed = 16;           // max TD steps per federation round
    double gamma = 0.99;      // discount used by the server TD target
    bool theoretical = false; // score actions with the concentration bound
    double c = 1.0;           // confidence constant (theoretical scoring)
    double b = 0.0;           // value upper bound; <= 0 means derive from env
    int timeout_ms = 30000;   // per-agent reply timeout

    bool operator==(const FedConfig&) const = default;
};

/// Per-action mean, population std and mean + lambda * std over the N
/// received QVectors. Throws on an empty list or ragged lengths.
AggregateStats aggregate(const std::vector<QVector>& qs, double lambda);

/// Lowest-index argmax of the optimism score.
Action select_action(const AggregateStats& stats);

/// Empirical-Bernstein optimism score for one action:
/// mean + sqrt(2 c V / N) + 3 b c / N with V the population variance.
/// Values must lie in [0, b]; anything outside violates the boundedness
/// assumption behind the bound and is rejected.
double theoretical_ucb(const std::vector<double>& values, double c, double b);

/// Server TD backup: q + alpha_s * (r + gamma * max(q_next) - q),
/// with a zero bootstrap term when the transition was terminal.
double fedtd_update(double qbar_sa, double r, const QVector& qbar_next,
                    bool done, double alpha_s, double gamma);

/// i.i.d. value source on [0, b] with known expectation, for the coverage
/// check below.
struct Sampler {
    std::function<double(SplitMix64&)> draw;
    double mean = 0.0;
};
Sampler uniform_sampler(double lo, double hi);
Sampler two_point_sampler(double a, double b);
Sampler point_mass_sampler(double v);

/// Monte Carlo check of the concentration bound: fraction of `trials` in
/// which |sample mean - true mean| <= sqrt(2 V c / N) + 3 b c / N, with V
/// the population variance of the N draws. The bound promises coverage of
/// at least 1 - 3 e^{-c}. Draws outside [0, b] are rejected.
double coverage_test(const Sampler& sampler, int n, double c, double b,
                     int trials, std::uint64_t seed);

/// The coverage a passing run must reach: 1 - 3 e^{-c} minus three standard
/// errors of a Bernoulli estimator at that rate over `trials`.
double coverage_requirement(double c, int trials);

}  // namespace fedhql
