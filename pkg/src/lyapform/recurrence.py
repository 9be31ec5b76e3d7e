"""Chain recurrence on flow graphs, and its refinement by a cohomology class.

A cell is chain recurrent when it lies on a directed cycle.  It is
recurrent *for the class* when it lies on a cycle whose omega-weight is
(numerically) zero: such cycles lift to closed chains in the covering space
defined by the class.  Components carrying a strictly positive cycle are
folded into the class-recurrent set and flagged, since no Lyapunov form can
exist in that class.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._graphtools import (
    TOL,
    Cycle,
    bellman_ford,
    best_closed_walk_edges,
    best_closed_walks,
    cycle_from_edges,
    cyclic_components,
    tarjan_scc,
)
from .cubical_map import FlowGraph
from .torus_flow import ClosedOneForm, Trajectory

__all__ = [
    "RecurrenceReport",
    "CycleClass",
    "NotACycleError",
    "AmbiguousClassError",
    "strongly_connected_components",
    "chain_recurrent_cells",
    "xi_recurrent_cells",
    "default_theta",
    "delta_T_cycle_class",
    "heaviest_cycle_through",
    "positive_cycle_components",
    "closed_walk_weights",
]


class NotACycleError(ValueError):
    pass


class AmbiguousClassError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RecurrenceReport:
    scc_id: np.ndarray
    R: np.ndarray
    R_xi: np.ndarray
    C_xi: np.ndarray
    theta: float
    positive_cycle_sccs: tuple[int, ...] = ()
    witnesses: dict = field(default_factory=dict)
    best_cycle_weight: np.ndarray | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.scc_id)

    def mask(self, which: str) -> np.ndarray:
        m = np.zeros(self.n_nodes, bool)
        m[getattr(self, which)] = True
        return m

    def to_json(self) -> dict:
        return {
            "theta": self.theta,
            "n_cells": self.n_nodes,
            "n_components": int(self.scc_id.max()) + 1 if self.n_nodes else 0,
            "scc_id": self.scc_id.tolist(),
            "R": self.R.tolist(),
            "R_xi": self.R_xi.tolist(),
            "C_xi": self.C_xi.tolist(),
            "positive_cycle_sccs": list(self.positive_cycle_sccs),
            "witnesses": {str(k): v.to_json() for k, v in sorted(self.witnesses.items())},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


@dataclass(frozen=True)
class CycleClass:
    z: tuple[int, ...]
    pairing: float
    duration: float


def strongly_connected_components(graph: FlowGraph) -> np.ndarray:
    """Component id per node; ids run from sinks (0) towards sources."""
    comp, _ = tarjan_scc(graph.n_nodes, graph.tails, graph.heads)
    return comp


def _cycle_structure(graph: FlowGraph):
    comp, ncomp = tarjan_scc(graph.n_nodes, graph.tails, graph.heads)
    cyclic = cyclic_components(graph.n_nodes, graph.tails, graph.heads, comp, ncomp)
    return comp, ncomp, cyclic


def chain_recurrent_cells(graph: FlowGraph) -> np.ndarray:
    comp, _, cyclic = _cycle_structure(graph)
    return np.flatnonzero(cyclic[comp])


def default_theta(graph: FlowGraph, factor: float = 2.0, samples_per_axis: int = 32) -> float:
    """grid spacing * sup|omega| * factor; 0 for graphs without a grid or form."""
    if graph.grid is None or graph.form is None:
        return 0.0
    form = graph.form
    ax = (np.arange(samples_per_axis) + 0.5) / samples_per_axis
    pts = np.stack(np.meshgrid(*([ax] * form.dim), indexing="ij"), -1).reshape(-1, form.dim)
    sup = float(np.max(np.linalg.norm(form.coefficients(pts), axis=-1)))
    return graph.grid.spacing * sup * factor


def positive_cycle_components(graph: FlowGraph, comp, edge_mask):
    """Find components carrying a cycle of weight > 0 (up to tolerance).

    Returns ``(witnesses, potential)``: a dict component -> Cycle, and a
    Bellman-Ford potential for the negated weights valid on every masked
    edge outside the flagged components.
    """
    cost = -graph.weight
    active = edge_mask.copy()
    witnesses: dict[int, Cycle] = {}
    while True:
        idx = np.flatnonzero(active)
        dist, _, cycles = bellman_ford(graph.n_nodes, graph.tails[idx], graph.heads[idx], cost[idx])
        if not cycles:
            return witnesses, dist
        for cyc in cycles:
            edges = idx[cyc]
            k = int(comp[graph.tails[edges[0]]])
            if k not in witnesses:
                witnesses[k] = cycle_from_edges(graph, edges)
        flagged = np.array(sorted(witnesses))
        active &= ~np.isin(comp[graph.tails], flagged)


def closed_walk_weights(graph: FlowGraph, nodes, comp=None, potential=None, edge_mask=None):
    """Heaviest closed-walk weight through each node (-inf if none).

    Valid only where the node's component has no positive cycle; then the
    heaviest closed walk is a simple cycle.
    """
    if comp is None:
        comp = strongly_connected_components(graph)
    intra = comp[graph.tails] == comp[graph.heads]
    if edge_mask is not None:
        intra &= edge_mask
    if potential is None:
        idx = np.flatnonzero(intra)
        potential, _, cyc = bellman_ford(graph.n_nodes, graph.tails[idx], graph.heads[idx],
                                         -graph.weight[idx])
        if cyc:
            raise ValueError("closed_walk_weights: a positive cycle is present")
    best = best_closed_walks(graph.n_nodes, graph.tails, graph.heads, -graph.weight,
                             potential, nodes, intra)
    return -best


def heaviest_cycle_through(graph: FlowGraph, v: int, comp=None, potential=None) -> Cycle | None:
    """Heaviest cycle through ``v`` (its component must have no positive cycle)."""
    if comp is None:
        comp = strongly_connected_components(graph)
    own = (comp[graph.tails] == comp[v]) & (comp[graph.heads] == comp[v])
    if potential is None:
        idx = np.flatnonzero(own)
        potential, _, cyc = bellman_ford(graph.n_nodes, graph.tails[idx], graph.heads[idx],
                                         -graph.weight[idx])
        if cyc:
            raise ValueError("heaviest_cycle_through: the component carries a positive cycle")
    edges = best_closed_walk_edges(graph.n_nodes, graph.tails, graph.heads, -graph.weight,
                                   potential, int(v), own)
    return None if edges is None else cycle_from_edges(graph, edges)


def xi_recurrent_cells(graph: FlowGraph, theta: float | None = None) -> RecurrenceReport:
    """Split the chain recurrent cells R into R_xi (zero-weight recurrence) and C_xi."""
    if theta is None:
        theta = default_theta(graph)
    if theta < 0:
        raise ValueError("theta must be >= 0")
    comp, ncomp, cyclic = _cycle_structure(graph)
    in_R = cyclic[comp]
    intra = comp[graph.tails] == comp[graph.heads]
    witnesses, potential = positive_cycle_components(graph, comp, intra)

    positive = np.zeros(ncomp, bool)
    positive[list(witnesses)] = True
    best = np.full(graph.n_nodes, np.nan)
    best[in_R & positive[comp]] = np.inf
    todo = np.flatnonzero(in_R & ~positive[comp])
    if len(todo):
        ok_edges = intra & ~positive[comp[graph.tails]]
        best[todo] = closed_walk_weights(graph, todo, comp, potential, ok_edges)
    in_Rxi = in_R & (positive[comp] | (best >= -theta - TOL))
    R = np.flatnonzero(in_R)
    R_xi = np.flatnonzero(in_Rxi)
    C_xi = np.flatnonzero(in_R & ~in_Rxi)
    return RecurrenceReport(comp, R, R_xi, C_xi, float(theta),
                            tuple(sorted(witnesses)), witnesses, best)


def delta_T_cycle_class(traj: Trajectory, form: ClosedOneForm, delta: float,
                        ambiguity: float = 0.4) -> CycleClass:
    """Homology class of an orbit segment that nearly closes up on the torus."""
    if not 0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 0.5) for canonical rounding")
    disp = traj.displacement
    resid = disp - np.rint(disp)
    gap = float(np.linalg.norm(resid))
    if gap >= delta:
        raise NotACycleError(f"endpoints are {gap:.3g} apart on the torus, not within delta={delta}")
    if np.any(np.abs(resid) >= ambiguity):
        raise AmbiguousClassError(f"displacement {disp} too close to a half-integer to round")
    z = tuple(int(v) for v in np.rint(disp))
    return CycleClass(z, float(np.dot(form.period_vector, z)), traj.duration)


def report_from_sets(graph: FlowGraph, R_xi, C_xi, theta: float = 0.0) -> RecurrenceReport:
    """Assemble a report from explicit cell sets (used for hand-built cases)."""
    comp = strongly_connected_components(graph)
    R_xi = np.unique(np.asarray(R_xi, dtype=np.int64))
    C_xi = np.unique(np.asarray(C_xi, dtype=np.int64))
    R = np.union1d(R_xi, C_xi)
    return RecurrenceReport(comp, R, R_xi, C_xi, float(theta))

