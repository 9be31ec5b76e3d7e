"""Exhaustive reference answers for small graphs.

Everything here enumerates simple cycles explicitly (networkx) and applies
the definitions literally.  It shares no code with the fast paths, so it
can serve as an independent check of them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import networkx as nx
import numpy as np

from .cubical_map import FlowGraph

__all__ = ["SimpleCycle", "enumerate_cycles", "oracle_report", "oracle_max_mean",
           "oracle_conditions", "oracle_feasible", "random_graph"]


@dataclass(frozen=True)
class SimpleCycle:
    nodes: tuple[int, ...]
    weight: float

    @property
    def length(self) -> int:
        return len(self.nodes)

    @property
    def mean(self) -> float:
        return self.weight / self.length


def _weights(graph: FlowGraph) -> dict:
    return {(int(a), int(b)): float(w) for a, b, w in zip(graph.tails, graph.heads, graph.weight)}


def enumerate_cycles(graph: FlowGraph, cost: dict | None = None) -> list[SimpleCycle]:
    W = cost if cost is not None else _weights(graph)
    G = nx.DiGraph()
    G.add_nodes_from(range(graph.n_nodes))
    G.add_edges_from(W)
    out = []
    for cyc in nx.simple_cycles(G):
        pairs = zip(cyc, cyc[1:] + cyc[:1])
        out.append(SimpleCycle(tuple(cyc), sum(W[p] for p in pairs)))
    return out


def _sccs(graph: FlowGraph) -> dict[int, int]:
    G = nx.DiGraph()
    G.add_nodes_from(range(graph.n_nodes))
    G.add_edges_from(zip(graph.tails.tolist(), graph.heads.tolist()))
    label = {}
    for i, comp in enumerate(nx.strongly_connected_components(G)):
        for v in comp:
            label[v] = i
    return label


@dataclass(frozen=True)
class OracleReport:
    R: frozenset
    R_xi: frozenset
    C_xi: frozenset
    positive_sccs: frozenset
    closed: bool
    cycles: tuple


def oracle_report(graph: FlowGraph, theta: float = 0.0) -> OracleReport:
    cycles = enumerate_cycles(graph)
    label = _sccs(graph)
    R = {v for c in cycles for v in c.nodes}
    positive = {label[c.nodes[0]] for c in cycles if c.weight > 0}
    R_xi = {v for v in R if label[v] in positive}
    for c in cycles:
        if c.weight >= -theta:
            R_xi.update(c.nodes)
    C_xi = R - R_xi
    closed = all(label[v] not in {label[c] for c in C_xi} for v in range(graph.n_nodes) if v not in C_xi)
    return OracleReport(frozenset(R), frozenset(R_xi), frozenset(C_xi), frozenset(positive),
                        closed, tuple(cycles))


def oracle_max_mean(graph: FlowGraph, restrict) -> float:
    restrict = set(int(v) for v in restrict)
    means = [c.mean for c in enumerate_cycles(graph) if restrict.intersection(c.nodes)]
    if not means:
        raise ValueError("no cycle meets restrict")
    return max(means)


def oracle_conditions(graph: FlowGraph, rep: OracleReport) -> dict:
    """Truth values of II, III, IV and eta, by cycle enumeration."""
    through = [c for c in rep.cycles if rep.C_xi.intersection(c.nodes)]
    base = not rep.positive_sccs and rep.closed
    if not rep.C_xi:
        return {"II": base, "III": base, "IV": base, "eta": math.inf}
    eta = -max(c.mean for c in through)
    return {
        "II": base and all(c.weight <= -1 for c in through),
        "III": base and eta > 0,
        "IV": base and all(c.weight < 0 for c in through),
        "eta": eta,
    }


def oracle_feasible(graph: FlowGraph, rep: OracleReport, epsilon: float, theta: float = 0.0) -> bool:
    """Difference constraints are feasible iff no constraint cycle is negative."""
    cost = {}
    for a, b, w in zip(graph.tails.tolist(), graph.heads.tolist(), graph.weight.tolist()):
        inside = a in rep.R_xi and b in rep.R_xi
        cost[(a, b)] = -w + theta if inside else -w - epsilon
    return all(c.weight >= -1e-12 for c in enumerate_cycles(graph, cost))


def random_graph(rng: np.random.Generator, max_nodes: int = 10, low: int = -3, high: int = 3,
                 density: float | None = None, bias: float = 0.0) -> FlowGraph:
    """Random digraph with integer weights in [low, high] (self-loops allowed).

    Weight k is drawn with probability proportional to exp(bias * k), so a
    negative bias favours negative weights.
    """
    n = int(rng.integers(2, max_nodes + 1))
    p = density if density is not None else float(rng.uniform(0.1, 0.35))
    values = np.arange(low, high + 1)
    probs = np.exp(bias * values)
    probs /= probs.sum()
    edges = []
    for a in range(n):
        for b in range(n):
            if rng.random() < p:
                edges.append((a, b, int(rng.choice(values, p=probs))))
    return FlowGraph.from_edges(n, edges)
