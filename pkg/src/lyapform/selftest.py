"""Fast algorithms versus exhaustive enumeration on random small graphs."""
from __future__ import annotations

import math

import numpy as np

from .asymptotic import check_all, max_cycle_mean_through
from .cubical_map import FlowGraph
from .oracle import OracleReport, oracle_conditions, oracle_feasible, oracle_max_mean, oracle_report, random_graph
from .recurrence import xi_recurrent_cells
from .synthesis import combine, conley_lyapunov, default_epsilon, synthesize_potential

__all__ = ["random_instances", "compare_instance", "coherence_violations", "check_lyapunov_invariants",
           "run_selftest"]

MEAN_TOL = 1e-8


def random_instances(n: int, seed: int = 0, max_nodes: int = 10) -> list[FlowGraph]:
    """Random digraphs with weights in [-3, 3]; the weight skew varies per instance."""
    rng = np.random.default_rng(seed)
    return [random_graph(rng, max_nodes, -3, 3, bias=float(rng.uniform(-1.5, 0.5))) for _ in range(n)]


def _epsilon(graph, conds) -> float:
    eta = conds["III"].eta if conds["III"].holds else None
    return default_epsilon(graph, eta)


def compare_instance(graph: FlowGraph) -> list[str]:
    """Disagreements between the fast paths and the oracle (theta = 0)."""
    bad = []
    rep = xi_recurrent_cells(graph, theta=0.0)
    orc = oracle_report(graph, theta=0.0)
    for name in ("R", "R_xi", "C_xi"):
        if set(getattr(rep, name).tolist()) != set(getattr(orc, name)):
            bad.append(f"{name} differs")
    if set(rep.positive_cycle_sccs) != set() and not orc.positive_sccs:
        bad.append("spurious positive cycle")
    if not rep.positive_cycle_sccs and orc.positive_sccs:
        bad.append("missed positive cycle")

    comp = rep.scc_id
    restricts = [np.flatnonzero(comp == k) for k in np.unique(comp[rep.R])] if len(rep.R) else []
    if len(rep.R):
        restricts.append(rep.R)
    for restrict in restricts:
        fast, cyc = max_cycle_mean_through(graph, restrict)
        slow = oracle_max_mean(graph, restrict)
        if abs(fast - slow) > MEAN_TOL or abs(cyc.mean - fast) > MEAN_TOL:
            bad.append(f"max mean {fast} vs {slow}")

    conds = check_all(graph, rep)
    truth = oracle_conditions(graph, orc)
    for name in ("II", "III", "IV"):
        if conds[name].holds != truth[name]:
            bad.append(f"condition {name}: {conds[name].holds} vs {truth[name]}")
    if truth["III"] and math.isfinite(truth["eta"]):
        if abs(conds["III"].eta - truth["eta"]) > MEAN_TOL:
            bad.append(f"eta {conds['III'].eta} vs {truth['eta']}")

    eps = _epsilon(graph, conds)
    sol = synthesize_potential(graph, rep, eps)
    if sol.feasible != oracle_feasible(graph, orc, eps, 0.0):
        bad.append(f"feasibility {sol.feasible} at epsilon {eps}")
    return bad


def _rxi_cycles_near_zero(orc: OracleReport, theta: float) -> bool:
    return all(abs(c.weight) <= theta + 1e-12 for c in orc.cycles if orc.R_xi.issuperset(c.nodes))


def check_lyapunov_invariants(graph: FlowGraph, orc: OracleReport, data, theta: float = 0.0) -> list[str]:
    """Recompute the discrete Lyapunov invariants from scratch."""
    bad = []
    t, h = graph.tails, graph.heads
    w2 = data.edge_values
    comp = conley_scc_labels(graph)
    for e in range(graph.n_edges):
        a, b = int(t[e]), int(h[e])
        inside = a in orc.R_xi and b in orc.R_xi
        if not inside and w2[e] > -data.epsilon + 1e-9:
            bad.append(f"edge {a}->{b} leaving R_xi has value {w2[e]}")
        if comp[a] != comp[b] and not w2[e] < 0:
            bad.append(f"inter-component edge {a}->{b} not decreasing")
        if comp[a] == comp[b] and data.L[a] != data.L[b]:
            bad.append("L not constant on a component")
    on_cycle = set()
    for c in orc.cycles:
        if orc.R_xi.issuperset(c.nodes) and c.weight >= -theta:
            on_cycle.update(zip(c.nodes, c.nodes[1:] + c.nodes[:1]))
    for a, b in on_cycle:
        e = int(graph.edge_index(a, b))
        if abs(w2[e]) > theta + 1e-9:
            bad.append(f"recurrent edge {a}->{b} has value {w2[e]}")
    return bad


def conley_scc_labels(graph: FlowGraph) -> list[int]:
    # mutual reachability by transitive closure, independent of Tarjan
    n = graph.n_nodes
    reach = np.eye(n, dtype=bool)
    reach[graph.tails, graph.heads] = True
    for k in range(n):
        reach |= reach[:, [k]] & reach[[k], :]
    mutual = reach & reach.T
    return [int(np.argmax(mutual[v])) for v in range(n)]


def coherence_violations(graph: FlowGraph) -> list[str]:
    """Implications between the conditions and the synthesis outcome."""
    bad = []
    rep = xi_recurrent_cells(graph, theta=0.0)
    conds = check_all(graph, rep)
    ii, iii, iv = (conds[k].holds for k in ("II", "III", "IV"))
    if ii and not iii:
        bad.append("II holds but III fails")
    if iii and not iv:
        bad.append("III holds but IV fails")
    if iv and not iii:
        bad.append("IV holds but III fails")
    orc = oracle_report(graph, theta=0.0)
    if iv and _rxi_cycles_near_zero(orc, 0.0):
        eps = _epsilon(graph, conds)
        sol = synthesize_potential(graph, rep, eps)
        if not sol.feasible:
            bad.append("IV holds but synthesis is infeasible")
        else:
            data = combine(graph, sol.g, conley_lyapunov(graph), rep, eps)
            if data.violations:
                bad.append(f"combine reports {data.violations[0]}")
            bad += check_lyapunov_invariants(graph, orc, data)
    if iv and not ii:
        eta = conds["III"].eta
        scaled = graph.with_weights(graph.weight / eta)
        rep2 = xi_recurrent_cells(scaled, theta=0.0)
        if not check_all(scaled, rep2)["II"].holds:
            bad.append(f"II fails after rescaling by 1/eta (eta={eta})")
    return bad


def run_selftest(n: int = 200, seed: int = 0) -> dict:
    details = []
    coherence = []
    for i, graph in enumerate(random_instances(n, seed)):
        details += [f"instance {i}: {m}" for m in compare_instance(graph)]
        coherence += [f"instance {i}: {m}" for m in coherence_violations(graph)]
    return {
        "instances": n,
        "seed": seed,
        "mismatches": len(details) + len(coherence),
        "oracle_mismatches": details[:50],
        "coherence_violations": coherence[:50],
    }
