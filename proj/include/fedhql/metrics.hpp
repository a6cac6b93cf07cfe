#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedhql/orchestrator.hpp"

namespace fedhql {

/// Maximum over consecutive full windows of the window-mean of episode
/// returns. Trailing returns that do not fill a window are ignored; fewer
/// than one full window leaves the metric undefined (empty optional).
std::optional<double> max_mean_return(const std::vector<double>& returns,
                                      int window = 10);

/// Percentile bootstrap interval for the mean: `resamples` draws with
/// replacement, each averaged; the interval spans the (1-level)/2 and
/// 1-(1-level)/2 empirical quantiles of those averages. Deterministic for a
/// given seed. Needs at least two values.
std::pair<double, double> bootstrap_ci(const std::vector<double>& values,
                                       double level = 0.80,
                                       int resamples = 10000,
                                       std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Learning-curve CSV.
//
// Columns: run_seed,agent,consumed,consumed_eq4,episode_return,window_mean,
// max_mean_return. One row per evaluation episode per agent; after each
// checkpoint one "system" row with the across-agent mean of the checkpoint
// window means. `consumed` counts raw interactions (the agent's own, or all
// agents' for system rows); consumed_eq4 additionally charges the server's
// interactions (its N-th share on agent rows, in full on system rows).

std::string curve_csv(const RunResult& result, std::uint64_t run_seed);
void write_file(const std::string& path, const std::string& contents);

/// Per-agent final value of the max-mean-return column in one curve CSV,
/// plus the "system" series. Key "system" or the agent index as text.
std::map<std::string, double> final_max_mean_returns(const std::string& csv);

/// Same, but only over checkpoints whose system-axis consumption
/// (consumed_eq4 of the system rows; agent checkpoints are matched by
/// checkpoint order) does not exceed `system_cap`.
std::map<std::string, double> max_mean_returns_within(
    const std::string& csv, std::uint64_t system_cap);

// ---------------------------------------------------------------------------
// Cross-seed summary (the `report` subcommand and acceptance run both use
// this).

struct ConditionSummary {
    std::string condition;          // csv filename prefix
    int seeds = 0;
    double mean_over_seeds = 0.0;   // of the across-agent mean final metric
    double ci_lo = 0.0, ci_hi = 0.0;
    std::map<std::string, double> per_agent_median;  // median final metric
};

/// Groups `<condition>_s<seed>.csv` files under `dir` by condition and
/// summarizes the final max-mean-return of each.
std::vector<ConditionSummary> summarize_dir(const std::string& dir,
                                            double level = 0.80,
                                            std::uint64_t seed = 0);

std::string render_report(const std::vector<ConditionSummary>& summaries);

}  // namespace fedhql
