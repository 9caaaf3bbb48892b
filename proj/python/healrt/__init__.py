"""Python bindings for the healrt self-healing runtime."""

from ._healrt import (
    TopologyError,
    enumerate_fault_states,
    or_faults,
    or_faults_text,
    prime_faults,
    q_update,
    run_cli,
    run_grid,
    run_network,
)

__all__ = [
    "TopologyError",
    "enumerate_fault_states",
    "or_faults",
    "or_faults_text",
    "prime_faults",
    "q_update",
    "run_cli",
    "run_grid",
    "run_network",
]
