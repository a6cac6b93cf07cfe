"""Federated heterogeneous Q-learning: python bindings for the core
operations (environments, networks, federation math, metrics, wire codec).

The full experiment harness lives in the `fedhql` command-line tool; this
package exposes the individual operations for scripting and validation.
"""

from fedhql._core import (
    aggregate,
    backward,
    bootstrap_ci,
    coverage_requirement,
    coverage_test,
    decode_frame,
    encode_query_state,
    fedtd_update,
    forward,
    init_network,
    make_env,
    max_mean_return,
    select_action,
    sgd_step,
    theoretical_ucb,
)

__all__ = [
    "aggregate",
    "backward",
    "bootstrap_ci",
    "coverage_requirement",
    "coverage_test",
    "decode_frame",
    "encode_query_state",
    "fedtd_update",
    "forward",
    "init_network",
    "make_env",
    "max_mean_return",
    "select_action",
    "sgd_step",
    "theoretical_ucb",
]
