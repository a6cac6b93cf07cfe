#include "fedhql/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace fedhql {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string join_errors(const ConfigErrors& errors) {
    std::ostringstream out;
    out << "invalid configuration (" << errors.size() << " problem"
        << (errors.size() == 1 ? "" : "s") << "):";
    for (const std::string& e : errors) out << "\n  - " << e;
    return out.str();
}

struct Parser {
    ConfigErrors errors;

    void fail(int line, const std::string& what) {
        errors.push_back("line " + std::to_string(line) + ": " + what);
    }

    bool to_double(int line, const std::string& key, const std::string& v,
                   double& out) {
        try {
            std::size_t pos = 0;
            out = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("trailing junk");
            return true;
        } catch (const std::exception&) {
            fail(line, key + ": expected a real number, got '" + v + "'");
            return false;
        }
    }

    bool to_u64(int line, const std::string& key, const std::string& v,
                std::uint64_t& out) {
        const auto [p, ec] =
            std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || p != v.data() + v.size()) {
            fail(line, key + ": expected an unsigned integer, got '" + v + "'");
            return false;
        }
        return true;
    }

    bool to_int(int line, const std::string& key, const std::string& v,
                int& out) {
        const auto [p, ec] =
            std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || p != v.data() + v.size()) {
            fail(line, key + ": expected an integer, got '" + v + "'");
            return false;
        }
        return true;
    }

    bool parse_arch(int line, const std::string& v,
                    std::vector<int>& widths) {
        widths.clear();
        std::string token;
        std::istringstream in(v);
        while (std::getline(in, token, 'x')) {
            int w = 0;
            if (!to_int(line, "arch", trim(token), w)) return false;
            widths.push_back(w);
        }
        if (widths.empty()) {
            fail(line, "arch: expected widths like 64x64");
            return false;
        }
        return true;
    }
};

}  // namespace

ConfigError::ConfigError(ConfigErrors errors)
    : std::runtime_error(join_errors(errors)), errors_(std::move(errors)) {}

ExperimentConfig parse_config(const std::string& text) {
    Parser p;
    ExperimentConfig cfg;
    cfg.agents.clear();
    cfg.seeds.clear();

    enum class Section { None, Experiment, Federation, Agent };
    Section section = Section::None;
    AgentConfig* agent = nullptr;

    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        const std::size_t hash = line.find(" #");
        if (hash != std::string::npos) line = trim(line.substr(0, hash));

        if (line.front() == '[') {
            if (line.back() != ']') {
                p.fail(line_no, "unterminated section header");
                continue;
            }
            const std::string name = trim(line.substr(1, line.size() - 2));
            if (name == "experiment") {
                section = Section::Experiment;
            } else if (name == "federation") {
                section = Section::Federation;
            } else if (name == "agent") {
                section = Section::Agent;
                cfg.agents.emplace_back();
                agent = &cfg.agents.back();
            } else {
                p.fail(line_no, "unknown section [" + name + "]");
                section = Section::None;
            }
            continue;
        }

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            p.fail(line_no, "expected key = value, got '" + line + "'");
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        switch (section) {
            case Section::None:
                p.fail(line_no, "key '" + key + "' outside any section");
                break;

            case Section::Experiment: {
                if (key == "env") {
                    if (value == "cartpole") {
                        cfg.env.kind = EnvKind::CartPole;
                    } else if (value == "chain") {
                        cfg.env.kind = EnvKind::ChainMdp;
                    } else {
                        p.fail(line_no, "env: expected cartpole or chain");
                    }
                } else if (key == "horizon") {
                    p.to_int(line_no, key, value, cfg.env.horizon);
                } else if (key == "gamma") {
                    p.to_double(line_no, key, value, cfg.env.gamma);
                } else if (key == "chain_length") {
                    p.to_int(line_no, key, value, cfg.env.chain_length);
                } else if (key == "budget_per_agent") {
                    p.to_u64(line_no, key, value, cfg.budget_per_agent);
                } else if (key == "eval_every") {
                    p.to_u64(line_no, key, value, cfg.eval_every);
                } else if (key == "eval_episodes") {
                    p.to_int(line_no, key, value, cfg.eval_episodes);
                } else if (key == "seeds") {
                    std::istringstream seeds(value);
                    std::string tok;
                    while (std::getline(seeds, tok, ',')) {
                        std::uint64_t s = 0;
                        if (p.to_u64(line_no, key, trim(tok), s))
                            cfg.seeds.push_back(s);
                    }
                } else if (key == "output_dir") {
                    cfg.output_dir = value;
                } else {
                    p.fail(line_no, "unknown experiment key '" + key + "'");
                }
                break;
            }

            case Section::Federation: {
                if (key == "lambda") {
                    p.to_double(line_no, key, value, cfg.fed.lambda);
                } else if (key == "alpha_s") {
                    p.to_double(line_no, key, value, cfg.fed.alpha_s);
                } else if (key == "h_fed") {
                    p.to_int(line_no, key, value, cfg.fed.h_fed);
                } else if (key == "ucb") {
                    if (value == "practical") {
                        cfg.fed.theoretical = false;
                    } else if (value == "theoretical") {
                        cfg.fed.theoretical = true;
                    } else {
                        p.fail(line_no, "ucb: expected practical or theoretical");
                    }
                } else if (key == "c") {
                    p.to_double(line_no, key, value, cfg.fed.c);
                } else if (key == "b") {
                    p.to_double(line_no, key, value, cfg.fed.b);
                } else if (key == "timeout_ms") {
                    p.to_int(line_no, key, value, cfg.fed.timeout_ms);
                } else {
                    p.fail(line_no, "unknown federation key '" + key + "'");
                }
                break;
            }

            case Section::Agent: {
                if (key == "mode") {
                    if (value == "dqn") {
                        agent->tabular = false;
                    } else if (value == "tabular") {
                        agent->tabular = true;
                    } else {
                        p.fail(line_no, "mode: expected dqn or tabular");
                    }
                } else if (key == "arch") {
                    std::vector<int> widths;
                    if (p.parse_arch(line_no, value, widths)) {
                        const neural::Activation act =
                            agent->spec.hidden.empty()
                                ? neural::Activation::Tanh
                                : agent->spec.hidden.front().act;
                        agent->spec.hidden.clear();
                        for (int w : widths)
                            agent->spec.hidden.push_back({w, act});
                    }
                } else if (key == "activation") {
                    neural::Activation act;
                    if (value == "tanh") {
                        act = neural::Activation::Tanh;
                    } else if (value == "relu") {
                        act = neural::Activation::ReLU;
                    } else {
                        p.fail(line_no, "activation: expected tanh or relu");
                        break;
                    }
                    for (auto& l : agent->spec.hidden) l.act = act;
                    if (agent->spec.hidden.empty())
                        agent->spec.hidden.push_back({0, act});  // act placeholder
                } else if (key == "lr") {
                    p.to_double(line_no, key, value, agent->lr);
                } else if (key == "epsilon") {
                    p.to_double(line_no, key, value, agent->epsilon);
                } else if (key == "improve_lr") {
                    p.to_double(line_no, key, value, agent->improve_lr);
                } else if (key == "kappa") {
                    p.to_int(line_no, key, value, agent->kappa);
                } else if (key == "replay_capacity") {
                    std::uint64_t v = 0;
                    if (p.to_u64(line_no, key, value, v))
                        agent->replay_capacity = static_cast<std::size_t>(v);
                } else if (key == "batch_size") {
                    p.to_int(line_no, key, value, agent->batch_size);
                } else if (key == "target_sync_every") {
                    p.to_int(line_no, key, value, agent->target_sync_every);
                } else if (key == "max_grad_norm") {
                    p.to_double(line_no, key, value, agent->max_grad_norm);
                } else if (key == "self_learn_steps") {
                    p.to_u64(line_no, key, value, agent->self_learn_steps);
                } else {
                    p.fail(line_no, "unknown agent key '" + key + "'");
                }
                break;
            }
        }
    }

    // A placeholder produced by `activation` before any `arch` is an error
    // unless the agent is tabular.
    for (std::size_t i = 0; i < cfg.agents.size(); ++i) {
        auto& a = cfg.agents[i];
        if (!a.tabular) {
            for (const auto& l : a.spec.hidden)
                if (l.width == 0)
                    p.errors.push_back("agent " + std::to_string(i) +
                                       ": arch is required for dqn mode");
        } else {
            a.spec.hidden.clear();
        }
    }

    if (cfg.seeds.empty()) cfg.seeds = {0, 1, 2, 3, 4};
    cfg.fed.gamma = cfg.env.gamma;

    ConfigErrors invariants = validate_config(cfg);
    p.errors.insert(p.errors.end(), invariants.begin(), invariants.end());
    if (!p.errors.empty()) throw ConfigError(std::move(p.errors));
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError({"cannot open config file '" + path + "'"});
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

ConfigErrors validate_config(const ExperimentConfig& cfg) {
    ConfigErrors errors;
    auto check = [&errors](bool ok, const std::string& what) {
        if (!ok) errors.push_back(what);
    };

    check(cfg.env.horizon >= 1, "experiment: horizon must be >= 1");
    check(cfg.env.gamma > 0.0 && cfg.env.gamma < 1.0,
          "experiment: gamma must be in (0,1)");
    if (cfg.env.kind == EnvKind::ChainMdp)
        check(cfg.env.chain_length >= 2, "experiment: chain_length must be >= 2");
    check(cfg.budget_per_agent >= 1, "experiment: budget_per_agent must be >= 1");
    check(cfg.eval_every >= 1, "experiment: eval_every must be >= 1");
    check(cfg.eval_episodes >= 1, "experiment: eval_episodes must be >= 1");
    check(!cfg.seeds.empty(), "experiment: seeds must be non-empty");
    check(!cfg.output_dir.empty(), "experiment: output_dir must be non-empty");
    check(!cfg.agents.empty(), "config needs at least one [agent] section");

    check(cfg.fed.lambda >= 0.0, "federation: lambda must be >= 0");
    check(cfg.fed.alpha_s >= 0.0 && cfg.fed.alpha_s <= 1.0,
          "federation: alpha_s must be in [0,1]");
    check(cfg.fed.h_fed >= 1, "federation: h_fed must be >= 1");
    check(cfg.fed.c > 0.0, "federation: c must be > 0");
    check(cfg.fed.timeout_ms > 0, "federation: timeout_ms must be > 0");

    for (std::size_t i = 0; i < cfg.agents.size(); ++i) {
        const AgentConfig& a = cfg.agents[i];
        const std::string who = "agent " + std::to_string(i) + ": ";
        check(a.lr > 0.0, who + "lr must be > 0");
        check(a.epsilon >= 0.0 && a.epsilon <= 1.0,
              who + "epsilon must be in [0,1]");
        check(a.kappa >= 0, who + "kappa must be >= 0");
        check(a.self_learn_steps >= 1, who + "self_learn_steps must be >= 1");
        if (!a.tabular) {
            check(!a.spec.hidden.empty(), who + "arch is required for dqn mode");
            for (const auto& l : a.spec.hidden)
                check(l.width >= 1, who + "hidden widths must be >= 1");
            check(a.replay_capacity >= 1, who + "replay_capacity must be >= 1");
            check(a.batch_size >= 1 && static_cast<std::size_t>(a.batch_size) <=
                                           a.replay_capacity,
                  who + "batch_size must be in [1, replay_capacity]");
            check(a.target_sync_every >= 1,
                  who + "target_sync_every must be >= 1");
        } else {
            check(cfg.env.kind == EnvKind::ChainMdp,
                  who + "tabular mode needs the chain environment");
        }
    }
    return errors;
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    out << "[experiment]\n";
    out << "env = " << (cfg.env.kind == EnvKind::CartPole ? "cartpole" : "chain")
        << "\n";
    out << "horizon = " << cfg.env.horizon << "\n";
    out << "gamma = " << cfg.env.gamma << "\n";
    if (cfg.env.kind == EnvKind::ChainMdp)
        out << "chain_length = " << cfg.env.chain_length << "\n";
    out << "budget_per_agent = " << cfg.budget_per_agent << "\n";
    out << "eval_every = " << cfg.eval_every << "\n";
    out << "eval_episodes = " << cfg.eval_episodes << "\n";
    out << "seeds = ";
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
        out << (i ? "," : "") << cfg.seeds[i];
    out << "\n";
    out << "output_dir = " << cfg.output_dir << "\n";

    out << "\n[federation]\n";
    out << "lambda = " << cfg.fed.lambda << "\n";
    out << "alpha_s = " << cfg.fed.alpha_s << "\n";
    out << "h_fed = " << cfg.fed.h_fed << "\n";
    out << "ucb = " << (cfg.fed.theoretical ? "theoretical" : "practical")
        << "\n";
    out << "c = " << cfg.fed.c << "\n";
    out << "b = " << cfg.fed.b << "\n";
    out << "timeout_ms = " << cfg.fed.timeout_ms << "\n";

    for (const AgentConfig& a : cfg.agents) {
        out << "\n[agent]\n";
        out << "mode = " << (a.tabular ? "tabular" : "dqn") << "\n";
        if (!a.tabular) {
            out << "arch = ";
            for (std::size_t i = 0; i < a.spec.hidden.size(); ++i)
                out << (i ? "x" : "") << a.spec.hidden[i].width;
            out << "\n";
            out << "activation = "
                << (a.spec.hidden.front().act == neural::Activation::Tanh
                        ? "tanh"
                        : "relu")
                << "\n";
        }
        out << "lr = " << a.lr << "\n";
        out << "epsilon = " << a.epsilon << "\n";
        out << "improve_lr = " << a.improve_lr << "\n";
        out << "kappa = " << a.kappa << "\n";
        if (!a.tabular) {
            out << "replay_capacity = " << a.replay_capacity << "\n";
            out << "batch_size = " << a.batch_size << "\n";
            out << "target_sync_every = " << a.target_sync_every << "\n";
            out << "max_grad_norm = " << a.max_grad_norm << "\n";
        }
        out << "self_learn_steps = " << a.self_learn_steps << "\n";
    }
    return out.str();
}

RunSpec ExperimentConfig::to_run_spec(bool federation) const {
    RunSpec spec;
    spec.env = env;
    spec.agents = agents;
    spec.fed = fed;
    spec.budget_per_agent = budget_per_agent;
    spec.eval_every = eval_every;
    spec.eval_episodes = eval_episodes;
    spec.federation = federation;
    return spec;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return a.env == b.env && a.agents == b.agents && a.fed == b.fed &&
           a.budget_per_agent == b.budget_per_agent &&
           a.eval_every == b.eval_every && a.eval_episodes == b.eval_episodes &&
           a.seeds == b.seeds && a.output_dir == b.output_dir;
}

}  // namespace fedhql
