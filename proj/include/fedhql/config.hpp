#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedhql/orchestrator.hpp"

namespace fedhql {

/// A complete experiment description: environment, the heterogeneous agent
/// roster, federation parameters, budgets and evaluation cadence.
struct ExperimentConfig {
    EnvConfig env;
    std::vector<AgentConfig> agents;
    FedConfig fed;
    std::uint64_t budget_per_agent = 200000;
    std::uint64_t eval_every = 5000;
    int eval_episodes = 10;
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    std::string output_dir = "out";

    RunSpec to_run_spec(bool federation) const;
};

/// One rejected constraint, as "where: what".
using ConfigErrors = std::vector<std::string>;

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(ConfigErrors errors);
    const ConfigErrors& errors() const { return errors_; }

private:
    ConfigErrors errors_;
};

/// Parses the sectioned key-value grammar (see configs/README in the repo
/// root for the documented format):
///
///   # comment
///   [experiment]        experiment-wide keys
///   [federation]        server-side keys
///   [agent]             one section per agent, in roster order
///
/// Unknown sections or keys, bad scalars, and violated invariants are all
/// collected and reported together in a ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Canonical serialization; parse(serialize(parse(x))) == parse(x).
std::string serialize_config(const ExperimentConfig& config);

/// All violated invariants of an already-parsed config (empty when valid).
ConfigErrors validate_config(const ExperimentConfig& config);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace fedhql
