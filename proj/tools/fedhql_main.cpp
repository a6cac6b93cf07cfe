#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "fedhql/config.hpp"
#include "fedhql/metrics.hpp"
#include "fedhql/orchestrator.hpp"
#include "fedhql/verify.hpp"

namespace {

std::string lambda_tag(double lambda) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", lambda);
    return buf;
}

std::string resolve_out_dir(const std::string& flag_value) {
    if (const char* env = std::getenv("FEDHQL_OUT"); env && *env) return env;
    return flag_value;
}

struct RunJob {
    fedhql::RunSpec spec;
    std::uint64_t seed = 0;
    std::string path;
};

/// Executes the jobs, optionally across threads; every job writes its own
/// CSV, so the outputs are identical regardless of scheduling.
int execute_jobs(std::vector<RunJob> jobs, int parallel) {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex io_mu;

    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size() || failed.load()) return;
            RunJob& job = jobs[i];
            try {
                const fedhql::RunResult result =
                    fedhql::run_one_seed(job.spec, job.seed);
                fedhql::write_file(job.path,
                                   fedhql::curve_csv(result, job.seed));
                std::lock_guard lock(io_mu);
                std::cout << "wrote " << job.path << " (system interactions: "
                          << result.ledger.system_total() << ")\n";
            } catch (const std::exception& e) {
                failed.store(true);
                std::lock_guard lock(io_mu);
                std::cerr << "run with seed " << job.seed << " failed: "
                          << e.what() << "\n";
            }
        }
    };

    const int n_threads = std::max(1, parallel);
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads - 1; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    return failed.load() ? 1 : 0;
}

int run_command(const std::string& config_path, bool federation,
                double lambda_override, bool have_lambda,
                std::vector<std::uint64_t> seeds,
                const std::string& transport, int tcp_port,
                const std::string& out_flag, int jobs) {
    fedhql::ExperimentConfig cfg;
    try {
        cfg = fedhql::load_config(config_path);
    } catch (const fedhql::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    if (have_lambda) cfg.fed.lambda = lambda_override;
    if (!seeds.empty()) cfg.seeds = std::move(seeds);
    const std::string out_dir =
        resolve_out_dir(out_flag.empty() ? cfg.output_dir : out_flag);

    const std::string condition =
        federation ? "fedhql-lam" + lambda_tag(cfg.fed.lambda) : "baseline";

    std::vector<RunJob> jobs_list;
    int port = tcp_port;
    for (const std::uint64_t seed : cfg.seeds) {
        RunJob job;
        job.spec = cfg.to_run_spec(federation);
        job.spec.transport = transport == "tcp"
                                 ? fedhql::TransportKind::Tcp
                                 : fedhql::TransportKind::Inproc;
        job.spec.tcp_port = port++;  // one port per parallel run
        job.seed = seed;
        job.path = out_dir + "/" + condition + "_s" + std::to_string(seed) +
                   ".csv";
        jobs_list.push_back(std::move(job));
    }
    return execute_jobs(std::move(jobs_list), jobs);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Federated Q-learning over heterogeneous black-box agents: "
        "experiment runner, verification suites and reporting."};
    app.require_subcommand(1);

    // --- run ---------------------------------------------------------------
    std::string run_config, run_transport = "inproc", run_out;
    std::vector<std::uint64_t> run_seeds;
    double run_lambda = 0.0;
    int run_port = 47800, run_jobs = 1;
    CLI::App* run = app.add_subcommand(
        "run", "Execute a federated experiment from a config file");
    run->add_option("--config", run_config, "experiment config file")
        ->required();
    CLI::Option* lambda_opt = run->add_option(
        "--lambda", run_lambda, "override the inter-agent exploration coefficient");
    run->add_option("--seed", run_seeds, "run seeds (overrides config)")
        ->delimiter(',');
    run->add_option("--transport", run_transport, "inproc or tcp")
        ->check(CLI::IsMember({"inproc", "tcp"}));
    run->add_option("--tcp-port", run_port, "base TCP port for tcp transport");
    run->add_option("--out", run_out,
                    "output directory (FEDHQL_OUT overrides)");
    run->add_option("--jobs", run_jobs, "parallel seed runs");

    // --- baseline ----------------------------------------------------------
    std::string base_config, base_out;
    std::vector<std::uint64_t> base_seeds;
    int base_jobs = 1;
    CLI::App* baseline = app.add_subcommand(
        "baseline", "Independent self-learning, no federation");
    baseline->add_option("--config", base_config, "experiment config file")
        ->required();
    baseline->add_option("--seed", base_seeds, "run seeds (overrides config)")
        ->delimiter(',');
    baseline->add_option("--out", base_out,
                         "output directory (FEDHQL_OUT overrides)");
    baseline->add_option("--jobs", base_jobs, "parallel seed runs");

    // --- verify ------------------------------------------------------------
    int verify_trials = 100000;
    CLI::App* verify = app.add_subcommand(
        "verify", "Run the oracle suites: gradients, tabular convergence, "
                  "coverage, protocol");
    verify->add_option("--coverage-trials", verify_trials,
                       "Monte Carlo trials per coverage case");

    // --- report ------------------------------------------------------------
    std::string report_dir = "out";
    CLI::App* report = app.add_subcommand(
        "report", "Summarize curve CSVs: final max mean return with 80% "
                  "bootstrap CIs");
    report->add_option("--dir", report_dir, "directory of curve CSVs");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed())
        return run_command(run_config, true, run_lambda,
                           lambda_opt->count() > 0, run_seeds, run_transport,
                           run_port, run_out, run_jobs);
    if (baseline->parsed())
        return run_command(base_config, false, 0.0, false, base_seeds,
                           "inproc", 47800, base_out, base_jobs);

    if (verify->parsed()) {
        std::vector<fedhql::CheckResult> all;
        for (auto&& batch :
             {fedhql::verify_gradient_checks(), fedhql::verify_tabular_oracle(),
              fedhql::verify_coverage(verify_trials),
              fedhql::verify_protocol()}) {
            all.insert(all.end(), batch.begin(), batch.end());
        }
        std::cout << fedhql::render_results(all);
        const int failures = fedhql::count_failures(all);
        std::cout << (failures == 0 ? "all checks passed\n"
                                    : std::to_string(failures) +
                                          " check(s) failed\n");
        return failures == 0 ? 0 : 1;
    }

    if (report->parsed()) {
        try {
            const auto summaries =
                fedhql::summarize_dir(resolve_out_dir(report_dir));
            if (summaries.empty()) {
                std::cerr << "no curve CSVs found in " << report_dir << "\n";
                return 1;
            }
            std::cout << fedhql::render_report(summaries);
        } catch (const std::exception& e) {
            std::cerr << "report failed: " << e.what() << "\n";
            return 1;
        }
        return 0;
    }
    return 0;
}
