"""Exact and Monte Carlo simulation of the extended Wigner's-friend protocol,
with an equal-time reasoning engine checked against direct quantum calculation."""

__version__ = "0.1.0"

from .experiment import (
    ProtocolConfig,
    Protocol,
    TimePoint,
    build_protocol,
    evolve_exact,
    joint_distribution,
    monte_carlo,
    run_round,
)
from .perspectives import assign_state, open_lab_message, w_equal_time_prediction, non_equal_time_check
from .reasoning import (
    apply_improved_C,
    conditional_chain_probability,
    consistency_report,
    enumerate_pathways,
    evaluate_pathway,
)
