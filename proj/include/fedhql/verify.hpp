#pragma once

#include <string>
#include <vector>

namespace fedhql {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Backpropagation vs. central finite differences (h = 1e-5) on randomly
/// built networks; every gradient component must agree within 1e-4
/// relative error.
std::vector<CheckResult> verify_gradient_checks(int instances = 100);

/// Tabular learning against the value-iteration oracle on the length-5
/// corridor: (a) 1e4 epsilon-greedy Q-learning steps land within 0.05 of
/// the optimal values; (b) federation rounds with lambda=0, alpha_s=1 hold
/// the optimal table fixed within 1e-9.
std::vector<CheckResult> verify_tabular_oracle();

/// Monte Carlo coverage of the concentration bound for c in {1,2,3},
/// N in {3,5,10}, uniform and two-point samplers; the empirical rate must
/// reach 1 - 3 e^{-c} minus three Monte Carlo standard errors.
std::vector<CheckResult> verify_coverage(int trials = 100000);

/// Frame codec round-trip on randomized messages plus decode fuzzing.
std::vector<CheckResult> verify_protocol(int roundtrips = 10000,
                                         int fuzz_inputs = 100000);

int count_failures(const std::vector<CheckResult>& results);
std::string render_results(const std::vector<CheckResult>& results);

}  // namespace fedhql
