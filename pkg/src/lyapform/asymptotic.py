"""Asymptotic cycles and the combinatorial form of the existence criteria.

On a finite flow graph the invariant probability measures are the convex
combinations of cycle circulations.  The asymptotic class of a circulation
is its total lifted displacement per unit time, and its pairing with a class
is the cycle weight per unit time.  Every criterion therefore reduces to a
statement about cycles meeting C_xi:

* II   every such cycle has weight <= -1;
* III  the largest cycle mean is -eta < 0;
* IV   every such cycle has negative weight.

III and IV additionally need C_xi to be closed, which on a graph means it
is a union of strongly connected components.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._graphtools import (
    TOL,
    Cycle,
    bellman_ford,
    closed_walk_through,
    cycle_from_edges,
    cyclic_components,
    find_cycle_in,
    tarjan_scc,
)
from .cubical_map import FlowGraph
from .recurrence import (
    RecurrenceReport,
    closed_walk_weights,
    heaviest_cycle_through,
    positive_cycle_components,
)
from .torus_flow import TorusFlowSpec, integrate_trajectory

__all__ = [
    "AsymptoticCycleEstimate",
    "ConditionReport",
    "NoCycleError",
    "estimate_asymptotic_cycle",
    "pair_class",
    "max_cycle_mean_through",
    "check_condition_II",
    "check_condition_III",
    "check_condition_IV",
    "check_all",
    "circulation_asymptotic_cycle",
    "MEASURE_REDUCTION_NOTE",
]

MEASURE_REDUCTION_NOTE = (
    "invariant measures are modelled as convex combinations of cycle circulations; "
    "inf over measures of -<xi,A_mu>/mu(C_xi) equals -(max cycle mean through C_xi); "
    "C_xi is closed iff it is a union of strongly connected components"
)


class NoCycleError(ValueError):
    pass


@dataclass(frozen=True)
class AsymptoticCycleEstimate:
    A: np.ndarray
    t_total: float
    x0: np.ndarray
    convergence_gap: float

    def pairing(self, periods) -> float:
        return pair_class(periods, self.A)


@dataclass(frozen=True)
class ConditionReport:
    condition: str
    holds: bool
    eta: float = math.nan
    witness: Cycle | None = None
    violation: str = ""
    parameters: dict = field(default_factory=dict)
    eta_per_time: float = math.nan
    notes: str = MEASURE_REDUCTION_NOTE

    def to_json(self) -> dict:
        def num(x):
            if x is None or (isinstance(x, float) and math.isnan(x)):
                return None
            if isinstance(x, float) and math.isinf(x):
                return "inf" if x > 0 else "-inf"
            return x

        return {
            "condition": self.condition,
            "holds": self.holds,
            "eta": num(self.eta),
            "eta_per_time": num(self.eta_per_time),
            "witness": self.witness.to_json() if self.witness else None,
            "violation": self.violation,
            "parameters": {k: num(v) for k, v in self.parameters.items()},
            "notes": self.notes,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def estimate_asymptotic_cycle(spec: TorusFlowSpec, x0, t_total: float, step: float) -> AsymptoticCycleEstimate:
    """Time-averaged lifted displacement along one orbit."""
    if t_total < 100 * step:
        raise ValueError("t_total must be at least 100 steps long")
    traj = integrate_trajectory(spec, x0, t_total, step)
    A = traj.displacement / t_total
    half = len(traj.times) // 2
    t_half = traj.times[half]
    A_half = (traj.points_unwrapped[half] - traj.start) / t_half
    gap = float(np.max(np.abs(A - A_half)))
    return AsymptoticCycleEstimate(A, float(t_total), np.asarray(x0, float), gap)


def pair_class(periods, A) -> float:
    periods = np.asarray(periods, dtype=float)
    A = np.asarray(A, dtype=float)
    if periods.shape != A.shape:
        raise ValueError("class and cycle have different lengths")
    return float(periods @ A)


def circulation_asymptotic_cycle(graph: FlowGraph, cycle) -> np.ndarray:
    """Asymptotic class of the uniform measure on a cycle (edge ids or Cycle)."""
    edges = cycle.edges if isinstance(cycle, Cycle) else cycle
    c = cycle_from_edges(graph, edges)
    return np.asarray(c.displacement) / (c.length * graph.tau)


# -- cycle-mean search -------------------------------------------------------

def _components_meeting(comp, cyclic, restrict):
    ks = np.unique(comp[np.asarray(restrict, dtype=np.int64)])
    return ks[cyclic[ks]]


def _cycle_with_mean_at_least(graph, edge_mask, lam) -> Cycle | None:
    """A cycle among masked edges with mean >= lam (up to tolerance), if any."""
    idx = np.flatnonzero(edge_mask)
    t, h = graph.tails[idx], graph.heads[idx]
    cost = lam - graph.weight[idx]
    dist, _, cycles = bellman_ford(graph.n_nodes, t, h, cost)
    if cycles:
        return cycle_from_edges(graph, idx[cycles[0]])
    tight = np.zeros(graph.n_edges, bool)
    tight[idx[cost + dist[t] - dist[h] <= TOL]] = True
    found = find_cycle_in(graph.n_nodes, graph.tails, graph.heads, tight)
    return None if found is None else cycle_from_edges(graph, found)


def max_cycle_mean_through(graph: FlowGraph, restrict, tol: float = 1e-9) -> tuple[float, Cycle]:
    """Largest mean of a closed walk meeting ``restrict``.

    The supremum over closed walks through a node equals the largest simple
    cycle mean in its strongly connected component, so this is exact for
    cycles meeting ``restrict`` whenever ``restrict`` is a union of
    components.  Bisection on the mean; the returned value is the exact mean
    of the final witness.
    """
    restrict = np.asarray(restrict, dtype=np.int64)
    if len(restrict) == 0:
        raise NoCycleError("restrict is empty")
    comp, ncomp = tarjan_scc(graph.n_nodes, graph.tails, graph.heads)
    cyclic = cyclic_components(graph.n_nodes, graph.tails, graph.heads, comp, ncomp)
    ks = _components_meeting(comp, cyclic, restrict)
    if len(ks) == 0:
        raise NoCycleError("no cycle meets the restricted cells")
    mask = (comp[graph.tails] == comp[graph.heads]) & np.isin(comp[graph.tails], ks)
    w = graph.weight[mask]
    lo, hi = float(w.min()) - 1.0, float(w.max()) + 1.0
    witness = _cycle_with_mean_at_least(graph, mask, lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        found = _cycle_with_mean_at_least(graph, mask, mid)
        if found is None:
            hi = mid
        else:
            lo = mid
            witness = found
    return witness.mean, witness


# -- condition checks --------------------------------------------------------

@dataclass
class _Context:
    comp: np.ndarray
    ncomp: int
    cyclic: np.ndarray
    C_mask: np.ndarray
    params: dict


def _context(graph: FlowGraph, report: RecurrenceReport) -> _Context:
    comp, ncomp = tarjan_scc(graph.n_nodes, graph.tails, graph.heads)
    cyclic = cyclic_components(graph.n_nodes, graph.tails, graph.heads, comp, ncomp)
    C_mask = np.zeros(graph.n_nodes, bool)
    C_mask[report.C_xi] = True
    params = {
        "theta": report.theta,
        "delta": graph.padding * graph.grid.spacing if graph.grid else math.nan,
        "T": graph.tau,
    }
    return _Context(comp, ncomp, cyclic, C_mask, params)


def _structural_failure(graph, report, ctx, tag) -> ConditionReport | None:
    """Failures shared by all three checks: positive cycles, open C_xi."""
    if report.positive_cycle_sccs:
        k = report.positive_cycle_sccs[0]
        wit = report.witnesses.get(k)
        return ConditionReport(tag, False, witness=wit, parameters=ctx.params,
                               violation=f"component {k} carries a cycle of positive weight; "
                                         "the class does not vanish on R_xi")
    if not ctx.C_mask.any():
        return None
    # C_xi closed <=> every component meeting C_xi lies inside C_xi
    ks = np.unique(ctx.comp[ctx.C_mask])
    bad = np.flatnonzero(np.isin(ctx.comp, ks) & ~ctx.C_mask)
    if len(bad) == 0:
        return None
    b = int(bad[0])
    a = int(np.flatnonzero(ctx.C_mask & (ctx.comp == ctx.comp[b]))[0])
    intra = ctx.comp[graph.tails] == ctx.comp[graph.heads]
    walk = closed_walk_through(graph.n_nodes, graph.tails, graph.heads, intra, a, b)
    wit = cycle_from_edges(graph, walk) if walk else None
    return ConditionReport(tag, False, witness=wit, parameters=ctx.params,
                           violation=f"C_xi is not closed: cell {a} in C_xi and cell {b} outside "
                                     "it share a strongly connected component")


def _C_edges(graph, ctx):
    ks = np.unique(ctx.comp[ctx.C_mask])
    return (ctx.comp[graph.tails] == ctx.comp[graph.heads]) & np.isin(ctx.comp[graph.tails], ks)


def _positive_through_C(graph, ctx, tag) -> ConditionReport | None:
    """Recheck positivity on C_xi's components (reports may be hand-assembled)."""
    found, _ = positive_cycle_components(graph, ctx.comp, _C_edges(graph, ctx))
    if not found:
        return None
    k = min(found)
    return ConditionReport(tag, False, witness=found[k], parameters=ctx.params,
                           violation=f"component {k} meets C_xi and carries a positive cycle")


def _heaviest_through_C(graph, ctx):
    nodes = np.flatnonzero(ctx.C_mask)
    best = closed_walk_weights(graph, nodes, ctx.comp, edge_mask=_C_edges(graph, ctx))
    j = int(np.argmax(best))
    return float(best[j]), int(nodes[j])


def check_condition_II(graph: FlowGraph, report: RecurrenceReport) -> ConditionReport:
    """Every cycle through C_xi pairs with the class to at most -1.

    The closedness of C_xi, which this condition implies on manifolds, is
    checked explicitly here.
    """
    ctx = _context(graph, report)
    fail = _structural_failure(graph, report, ctx, "II") or _positive_through_C(graph, ctx, "II")
    if fail is not None:
        return fail
    if not ctx.C_mask.any():
        return ConditionReport("II", True, parameters=ctx.params, violation="",
                               notes="C_xi is empty; condition holds vacuously")
    top, v = _heaviest_through_C(graph, ctx)
    if top <= -1.0 + TOL:
        return ConditionReport("II", True, parameters=ctx.params)
    wit = heaviest_cycle_through(graph, v, ctx.comp)
    return ConditionReport("II", False, witness=wit, parameters=ctx.params,
                           violation=f"cycle through C_xi with weight {wit.weight:.6g} > -1")


def check_condition_III(graph: FlowGraph, report: RecurrenceReport) -> ConditionReport:
    ctx = _context(graph, report)
    fail = _structural_failure(graph, report, ctx, "III") or _positive_through_C(graph, ctx, "III")
    if fail is not None:
        return fail
    if not ctx.C_mask.any():
        return ConditionReport("III", True, eta=math.inf, eta_per_time=math.inf,
                               parameters=ctx.params,
                               notes="C_xi is empty; inequality is vacuous (eta = +inf sentinel)")
    mean, wit = max_cycle_mean_through(graph, np.flatnonzero(ctx.C_mask))
    eta = -mean
    if mean < -TOL:
        return ConditionReport("III", True, eta=eta, eta_per_time=eta / graph.tau,
                               witness=wit, parameters=ctx.params)
    return ConditionReport("III", False, eta=eta, eta_per_time=eta / graph.tau, witness=wit,
                           parameters=ctx.params,
                           violation=f"cycle through C_xi with mean {mean:.6g} >= 0")


def check_condition_IV(graph: FlowGraph, report: RecurrenceReport,
                       cross_check: bool = True) -> ConditionReport:
    ctx = _context(graph, report)
    fail = _structural_failure(graph, report, ctx, "IV") or _positive_through_C(graph, ctx, "IV")
    if fail is None and ctx.C_mask.any():
        top, v = _heaviest_through_C(graph, ctx)
        if top >= -TOL:
            wit = heaviest_cycle_through(graph, v, ctx.comp)
            fail = ConditionReport("IV", False, witness=wit, parameters=ctx.params,
                                   violation=f"cycle through C_xi with weight {wit.weight:.6g} >= 0")
    out = fail or ConditionReport("IV", True, parameters=ctx.params)
    if cross_check:
        iii = check_condition_III(graph, report)
        if iii.holds != out.holds:
            raise AssertionError(f"conditions III ({iii.holds}) and IV ({out.holds}) disagree")
        out = ConditionReport(out.condition, out.holds, iii.eta, out.witness, out.violation,
                              out.parameters, iii.eta_per_time,
                              out.notes + "; agrees with III")
    return out


def check_all(graph: FlowGraph, report: RecurrenceReport) -> dict[str, ConditionReport]:
    return {
        "II": check_condition_II(graph, report),
        "III": check_condition_III(graph, report),
        "IV": check_condition_IV(graph, report),
    }
