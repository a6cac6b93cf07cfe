#include "fedhql/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "fedhql/rng.hpp"

namespace fedhql {

std::optional<double> max_mean_return(const std::vector<double>& returns,
                                      int window) {
    if (window < 1) throw std::invalid_argument("window must be >= 1");
    const std::size_t w = static_cast<std::size_t>(window);
    if (returns.size() < w) return std::nullopt;
    std::optional<double> best;
    for (std::size_t start = 0; start + w <= returns.size(); start += w) {
        double sum = 0.0;
        for (std::size_t i = 0; i < w; ++i) sum += returns[start + i];
        const double mean = sum / static_cast<double>(w);
        if (!best || mean > *best) best = mean;
    }
    return best;
}

std::pair<double, double> bootstrap_ci(const std::vector<double>& values,
                                       double level, int resamples,
                                       std::uint64_t seed) {
    if (values.size() < 2)
        throw std::invalid_argument("bootstrap_ci needs at least two values");
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("bootstrap level must be in (0,1)");
    if (resamples < 1) throw std::invalid_argument("resamples must be >= 1");

    SplitMix64 rng(seed);
    const std::size_t n = values.size();
    std::vector<double> means(static_cast<std::size_t>(resamples));
    for (double& m : means) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += values[rng.next_below(n)];
        m = sum / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    const double alpha = (1.0 - level) / 2.0;
    const std::size_t last = means.size() - 1;
    const std::size_t lo_idx =
        static_cast<std::size_t>(std::floor(alpha * static_cast<double>(last)));
    const std::size_t hi_idx = static_cast<std::size_t>(
        std::ceil((1.0 - alpha) * static_cast<double>(last)));
    return {means[lo_idx], means[hi_idx]};
}

// ---------------------------------------------------------------------------
// CSV emission.

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

}  // namespace

std::string curve_csv(const RunResult& result, std::uint64_t run_seed) {
    std::ostringstream out;
    out << "run_seed,agent,consumed,consumed_eq4,episode_return,window_mean,"
           "max_mean_return\n";

    const std::size_t n_agents = result.curves.size();
    std::size_t max_points = 0;
    for (const AgentCurve& c : result.curves)
        max_points = std::max(max_points, c.points.size());

    std::vector<double> running_max(n_agents,
                                    -std::numeric_limits<double>::infinity());
    double system_running_max = -std::numeric_limits<double>::infinity();

    for (std::size_t k = 0; k < max_points; ++k) {
        double welfare_sum = 0.0;
        std::size_t welfare_n = 0;
        std::uint64_t consumed_sum = 0;
        std::uint64_t server_at = 0;

        for (std::size_t n = 0; n < n_agents; ++n) {
            const AgentCurve& curve = result.curves[n];
            if (k >= curve.points.size()) continue;
            const EvalPoint& p = curve.points[k];
            const std::uint64_t srv =
                result.server_at_phase[n].empty()
                    ? 0
                    : result.server_at_phase[n][p.phase - 1];
            const double window_mean = mean_of(p.returns);
            running_max[n] = std::max(running_max[n], window_mean);
            const double eq4 =
                static_cast<double>(p.consumed) +
                static_cast<double>(srv) / static_cast<double>(n_agents);
            for (double ret : p.returns) {
                out << run_seed << ',' << n << ',' << p.consumed << ','
                    << fmt(eq4) << ',' << fmt(ret) << ',' << fmt(window_mean)
                    << ',' << fmt(running_max[n]) << '\n';
            }
            welfare_sum += window_mean;
            ++welfare_n;
            consumed_sum += p.consumed;
            server_at = std::max(server_at, srv);
        }

        if (welfare_n > 0) {
            const double welfare = welfare_sum / static_cast<double>(welfare_n);
            system_running_max = std::max(system_running_max, welfare);
            out << run_seed << ",system," << consumed_sum << ','
                << consumed_sum + server_at << ',' << fmt(welfare) << ','
                << fmt(welfare) << ',' << fmt(system_running_max) << '\n';
        }
    }
    return out.str();
}

void write_file(const std::string& path, const std::string& contents) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << contents;
    if (!out) throw std::runtime_error("failed writing " + path);
}

// ---------------------------------------------------------------------------
// CSV parsing for the report path.

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

struct ParsedRow {
    std::string agent;
    std::uint64_t consumed = 0;
    double consumed_eq4 = 0.0;
    double window_mean = 0.0;
    double max_mean_return = 0.0;
};

std::vector<ParsedRow> parse_rows(const std::string& csv) {
    std::vector<ParsedRow> rows;
    std::istringstream in(csv);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() != 7) throw std::runtime_error("malformed curve CSV row");
        ParsedRow r;
        r.agent = f[1];
        r.consumed = std::stoull(f[2]);
        r.consumed_eq4 = std::stod(f[3]);
        r.window_mean = std::stod(f[5]);
        r.max_mean_return = std::stod(f[6]);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace

std::map<std::string, double> final_max_mean_returns(const std::string& csv) {
    std::map<std::string, double> finals;
    for (const ParsedRow& r : parse_rows(csv)) finals[r.agent] = r.max_mean_return;
    return finals;
}

std::map<std::string, double> max_mean_returns_within(
    const std::string& csv, std::uint64_t system_cap) {
    // Checkpoints are identified per series by a change of `consumed`; the
    // k-th system row carries the system-axis Eq. (4) consumption of the
    // k-th checkpoint.
    std::vector<double> system_eq4;
    std::map<std::string, std::vector<double>> window_means;
    std::map<std::string, std::uint64_t> last_consumed;

    for (const ParsedRow& r : parse_rows(csv)) {
        if (r.agent == "system") {
            system_eq4.push_back(r.consumed_eq4);
            continue;
        }
        auto it = last_consumed.find(r.agent);
        if (it == last_consumed.end() || it->second != r.consumed) {
            last_consumed[r.agent] = r.consumed;
            window_means[r.agent].push_back(r.window_mean);
        }
    }

    std::map<std::string, double> best;
    for (const auto& [agent, means] : window_means) {
        std::optional<double> mmr;
        for (std::size_t k = 0; k < means.size(); ++k) {
            if (k < system_eq4.size() &&
                system_eq4[k] > static_cast<double>(system_cap))
                break;
            if (!mmr || means[k] > *mmr) mmr = means[k];
        }
        if (mmr) best[agent] = *mmr;
    }
    return best;
}

// ---------------------------------------------------------------------------
// Cross-seed summaries.

namespace {

double median_of(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace

std::vector<ConditionSummary> summarize_dir(const std::string& dir,
                                            double level, std::uint64_t seed) {
    namespace fs = std::filesystem;
    // condition -> seed text -> per-agent finals
    std::map<std::string, std::map<std::string, std::map<std::string, double>>>
        grouped;

    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name.size() < 5 || name.substr(name.size() - 4) != ".csv") continue;
        const std::size_t sep = name.rfind("_s");
        if (sep == std::string::npos) continue;
        const std::string condition = name.substr(0, sep);
        const std::string seed_text =
            name.substr(sep + 2, name.size() - 4 - (sep + 2));
        if (condition.empty() || seed_text.empty()) continue;

        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        grouped[condition][seed_text] = final_max_mean_returns(buf.str());
    }

    std::vector<ConditionSummary> out;
    for (const auto& [condition, by_seed] : grouped) {
        ConditionSummary s;
        s.condition = condition;
        s.seeds = static_cast<int>(by_seed.size());

        std::vector<double> seed_means;
        std::map<std::string, std::vector<double>> per_agent;
        for (const auto& [seed_text, finals] : by_seed) {
            double sum = 0.0;
            int n = 0;
            for (const auto& [agent, v] : finals) {
                if (agent == "system") continue;
                per_agent[agent].push_back(v);
                sum += v;
                ++n;
            }
            if (n > 0) seed_means.push_back(sum / n);
        }
        if (!seed_means.empty()) {
            s.mean_over_seeds = mean_of(seed_means);
            if (seed_means.size() >= 2) {
                const auto [lo, hi] = bootstrap_ci(seed_means, level, 10000, seed);
                s.ci_lo = lo;
                s.ci_hi = hi;
            } else {
                s.ci_lo = s.ci_hi = s.mean_over_seeds;
            }
        }
        for (const auto& [agent, vals] : per_agent)
            s.per_agent_median[agent] = median_of(vals);
        out.push_back(std::move(s));
    }
    return out;
}

std::string render_report(const std::vector<ConditionSummary>& summaries) {
    std::ostringstream out;
    out << "condition            seeds  mean_mmr      80% CI\n";
    for (const ConditionSummary& s : summaries) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-20s %5d  %9.3f  [%9.3f, %9.3f]\n",
                      s.condition.c_str(), s.seeds, s.mean_over_seeds, s.ci_lo,
                      s.ci_hi);
        out << line;
        for (const auto& [agent, v] : s.per_agent_median) {
            std::snprintf(line, sizeof(line), "  agent %-4s median_mmr %9.3f\n",
                          agent.c_str(), v);
            out << line;
        }
    }
    return out.str();
}

}  // namespace fedhql
