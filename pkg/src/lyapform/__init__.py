"""Lyapunov 1-forms for flows on flat tori.

Discretize a flow into a weighted cell graph, locate the recurrence that a
cohomology class cannot see, test whether a Lyapunov 1-form exists in that
class, and build and sample-check one when it does.
"""
from .asymptotic import (
    ConditionReport,
    check_all,
    check_condition_II,
    check_condition_III,
    check_condition_IV,
    estimate_asymptotic_cycle,
    max_cycle_mean_through,
)
from .cubical_map import FlowGraph, Grid, build_flow_graph, read_flow_graph, reweight, write_flow_graph
from .recurrence import RecurrenceReport, chain_recurrent_cells, delta_T_cycle_class, xi_recurrent_cells
from .synthesis import (
    DiscreteLyapunovData,
    SmoothLyapunovForm,
    combine,
    conley_lyapunov,
    fit_smooth_correction,
    synthesize,
    synthesize_potential,
    verify_lyapunov,
)
from .torus_flow import (
    PRESETS,
    ClosedOneForm,
    ConfigurationError,
    TorusFlowSpec,
    TrigPoly,
    TrigTerm,
    integrate_trajectory,
)

__version__ = "0.1.0"
