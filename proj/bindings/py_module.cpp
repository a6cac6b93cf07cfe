#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fedhql/env.hpp"
#include "fedhql/federation.hpp"
#include "fedhql/metrics.hpp"
#include "fedhql/neural.hpp"
#include "fedhql/transport.hpp"

namespace py = pybind11;
using namespace fedhql;

namespace {

EnvConfig make_env_config(const std::string& kind, int horizon, double gamma,
                          std::uint64_t seed, int chain_length) {
    EnvConfig cfg;
    if (kind == "cartpole") {
        cfg.kind = EnvKind::CartPole;
    } else if (kind == "chain") {
        cfg.kind = EnvKind::ChainMdp;
    } else {
        throw std::invalid_argument("env kind must be 'cartpole' or 'chain'");
    }
    cfg.horizon = horizon;
    cfg.gamma = gamma;
    cfg.seed = seed;
    cfg.chain_length = chain_length;
    return cfg;
}

neural::NetworkSpec make_spec(int input_dim,
                              const std::vector<std::pair<int, std::string>>& hidden,
                              int output_dim, std::uint64_t init_seed) {
    neural::NetworkSpec spec;
    spec.input_dim = input_dim;
    spec.output_dim = output_dim;
    spec.init_seed = init_seed;
    for (const auto& [width, act] : hidden) {
        neural::Activation a;
        if (act == "tanh") {
            a = neural::Activation::Tanh;
        } else if (act == "relu") {
            a = neural::Activation::ReLU;
        } else {
            throw std::invalid_argument("activation must be 'tanh' or 'relu'");
        }
        spec.hidden.push_back({width, a});
    }
    return spec;
}

py::dict stats_to_dict(const AggregateStats& s) {
    py::dict d;
    d["mean"] = s.mean;
    d["std"] = s.std;
    d["ucb"] = s.ucb;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Federated heterogeneous Q-learning core operations";

    // --- environments -------------------------------------------------------
    py::class_<Environment>(m, "Environment")
        .def("reset", [](Environment& e) { return e.reset().values; })
        .def(
            "step",
            [](Environment& e, int action) {
                const Transition t = e.step(Action{action});
                return py::make_tuple(t.s_next.values, t.r, t.done);
            },
            py::arg("action"), "Returns (next_state, reward, done)")
        .def_property_readonly("state",
                               [](const Environment& e) { return e.state().values; })
        .def_property_readonly("done", &Environment::done)
        .def_property_readonly("state_dim", &Environment::state_dim)
        .def_property_readonly("action_count", &Environment::action_count)
        .def_property_readonly("steps_taken", &Environment::steps_taken);

    m.def(
        "make_env",
        [](const std::string& kind, int horizon, double gamma,
           std::uint64_t seed, int chain_length) {
            return make_env(
                make_env_config(kind, horizon, gamma, seed, chain_length));
        },
        py::arg("kind"), py::arg("horizon") = 200, py::arg("gamma") = 0.99,
        py::arg("seed") = 0, py::arg("chain_length") = 5);

    // --- networks -----------------------------------------------------------
    py::class_<neural::Weights>(m, "Weights")
        .def_property_readonly("param_count", &neural::param_count);

    m.def(
        "init_network",
        [](int input_dim, const std::vector<std::pair<int, std::string>>& hidden,
           int output_dim, std::uint64_t init_seed) {
            return neural::init_weights(
                make_spec(input_dim, hidden, output_dim, init_seed));
        },
        py::arg("input_dim"), py::arg("hidden"), py::arg("output_dim"),
        py::arg("init_seed") = 0,
        "hidden is a list of (width, 'tanh'|'relu') pairs");
    m.def(
        "forward",
        [](const neural::Weights& w, const std::vector<double>& state) {
            return neural::forward(w, State{state});
        },
        py::arg("weights"), py::arg("state"));
    m.def(
        "backward",
        [](const neural::Weights& w, const std::vector<double>& state,
           int action, double target) {
            const neural::BackwardResult r =
                neural::backward(w, State{state}, Action{action}, target);
            return py::make_tuple(r.loss, r.grad);
        },
        py::arg("weights"), py::arg("state"), py::arg("action"),
        py::arg("target"), "Returns (loss, gradient)");
    m.def(
        "sgd_step",
        [](neural::Weights w, const neural::Gradient& g, double lr) {
            neural::sgd_step(w, g, lr);
            return w;
        },
        py::arg("weights"), py::arg("gradient"), py::arg("lr"));

    // --- federation math ----------------------------------------------------
    m.def(
        "aggregate",
        [](const std::vector<QVector>& qs, double lam) {
            return stats_to_dict(aggregate(qs, lam));
        },
        py::arg("qvectors"), py::arg("lam"));
    m.def(
        "select_action",
        [](const std::vector<QVector>& qs, double lam) {
            return select_action(aggregate(qs, lam)).index;
        },
        py::arg("qvectors"), py::arg("lam"));
    m.def("theoretical_ucb", &theoretical_ucb, py::arg("values"), py::arg("c"),
          py::arg("b"));
    m.def("fedtd_update", &fedtd_update, py::arg("qbar_sa"), py::arg("r"),
          py::arg("qbar_next"), py::arg("done"), py::arg("alpha_s"),
          py::arg("gamma"));
    m.def(
        "coverage_test",
        [](const std::string& sampler, int n, double c, int trials,
           std::uint64_t seed) {
            Sampler s;
            if (sampler == "uniform") {
                s = uniform_sampler(0.0, 1.0);
            } else if (sampler == "two_point") {
                s = two_point_sampler(0.1, 0.9);
            } else if (sampler == "point_mass") {
                s = point_mass_sampler(0.5);
            } else {
                throw std::invalid_argument(
                    "sampler must be uniform, two_point or point_mass");
            }
            return coverage_test(s, n, c, 1.0, trials, seed);
        },
        py::arg("sampler"), py::arg("n"), py::arg("c"),
        py::arg("trials") = 10000, py::arg("seed") = 0);
    m.def("coverage_requirement", &coverage_requirement, py::arg("c"),
          py::arg("trials"));

    // --- metrics ------------------------------------------------------------
    m.def(
        "max_mean_return",
        [](const std::vector<double>& returns, int window) -> py::object {
            const auto v = max_mean_return(returns, window);
            if (!v) return py::none();
            return py::float_(*v);
        },
        py::arg("returns"), py::arg("window") = 10);
    m.def("bootstrap_ci", &bootstrap_ci, py::arg("values"),
          py::arg("level") = 0.80, py::arg("resamples") = 10000,
          py::arg("seed") = 0);

    // --- wire format ----------------------------------------------------------
    m.def(
        "encode_query_state",
        [](std::uint64_t round_id, const std::string& tag,
           const std::vector<double>& state) {
            wire::Message msg;
            msg.round_id = round_id;
            msg.body = wire::QueryState{
                tag == "next" ? wire::StateTag::Next : wire::StateTag::Current,
                state};
            const auto bytes = wire::encode(msg);
            return py::bytes(reinterpret_cast<const char*>(bytes.data()),
                             bytes.size());
        },
        py::arg("round_id"), py::arg("tag"), py::arg("state"));
    m.def(
        "decode_frame",
        [](const py::bytes& raw) {
            std::string s = raw;
            std::vector<std::uint8_t> bytes(s.begin(), s.end());
            wire::Message msg;
            const wire::DecodeError err = wire::decode(bytes, msg);
            py::dict d;
            if (err != wire::DecodeError::None) {
                d["error"] = wire::to_string(err);
                return d;
            }
            d["kind"] = wire::kind_name(wire::kind_of(msg));
            d["round_id"] = msg.round_id;
            d["agent_id"] = msg.agent_id;
            if (const auto* q = std::get_if<wire::QueryState>(&msg.body)) {
                d["tag"] = q->tag == wire::StateTag::Next ? "next" : "current";
                d["state"] = q->state;
            } else if (const auto* r =
                           std::get_if<wire::QValuesReply>(&msg.body)) {
                d["tag"] = r->tag == wire::StateTag::Next ? "next" : "current";
                d["q"] = r->q;
            } else if (const auto* t =
                           std::get_if<wire::FedTDTarget>(&msg.body)) {
                d["state"] = t->state;
                d["action"] = t->action;
                d["target"] = t->target;
            } else if (const auto* sl =
                           std::get_if<wire::SelfLearnSignal>(&msg.body)) {
                d["steps"] = sl->steps;
            }
            return d;
        },
        py::arg("frame"));
}
