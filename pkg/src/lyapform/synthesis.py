"""Constructive Lyapunov 1-forms in a prescribed cohomology class.

The pipeline mirrors the classical existence argument, with every
nonconstructive step replaced by a finite computation on the flow graph:

1. a potential ``g`` solving difference constraints (Bellman-Ford), so that
   ``w + dg`` is strictly negative on every edge leaving R_xi territory;
   a negative constraint cycle is returned as the obstruction;
2. a Conley function ``L`` built from the condensation of the graph;
3. the combination ``w + dg + lambda dL`` with ``lambda`` above the ratio
   bound;
4. trigonometric fits of ``g`` and ``lambda L``, accepted only if the
   resulting smooth form passes ``verify_lyapunov``.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from ._graphtools import TOL, Cycle, bellman_ford, cycle_from_edges, edge_cycle_costs, tarjan_scc
from .cubical_map import FlowGraph, Grid
from .recurrence import RecurrenceReport
from .torus_flow import ClosedOneForm, ConfigurationError, TorusFlowSpec, TrigPoly, TrigTerm, \
    pair_form_with_field

__all__ = [
    "PotentialSolution",
    "DiscreteLyapunovData",
    "SmoothLyapunovForm",
    "VerificationReport",
    "SynthesisResult",
    "synthesize_potential",
    "conley_lyapunov",
    "combine",
    "fit_smooth_correction",
    "verify_lyapunov",
    "default_epsilon",
    "synthesize",
]


@dataclass(frozen=True, eq=False)
class PotentialSolution:
    g: np.ndarray
    feasible: bool
    witness: Cycle | None
    constraint_cost: np.ndarray

    def __iter__(self):
        # allows ``g, feasible, witness = synthesize_potential(...)``
        return iter((self.g, self.feasible, self.witness))


def _inside_mask(graph: FlowGraph, report: RecurrenceReport) -> np.ndarray:
    in_Rxi = report.mask("R_xi")
    return in_Rxi[graph.tails] & in_Rxi[graph.heads]


def default_epsilon(graph: FlowGraph, eta: float | None = None) -> float:
    """A tenth of the typical negative edge weight, capped at eta/2."""
    neg = graph.weight[graph.weight < 0]
    eps = 0.1 * abs(float(np.median(neg))) if len(neg) else 0.1
    if eta is not None and math.isfinite(eta) and eta > 0:
        eps = min(eps, 0.5 * eta)
    return eps


def synthesize_potential(graph: FlowGraph, report: RecurrenceReport, epsilon: float) -> PotentialSolution:
    """Solve g(head) - g(tail) <= -w - epsilon off R_xi and <= -w + theta inside it."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    inside = _inside_mask(graph, report)
    cost = np.where(inside, -graph.weight + report.theta, -graph.weight - epsilon)
    dist, _, cycles = bellman_ford(graph.n_nodes, graph.tails, graph.heads, cost)
    if cycles:
        return PotentialSolution(dist, False, cycle_from_edges(graph, cycles[0]), cost)
    return PotentialSolution(dist, True, None, cost)


def _coreach_sets(n_comp: int, ctails, cheads) -> list[int]:
    """Bitset of components reaching each component (itself included)."""
    succ: list[list[int]] = [[] for _ in range(n_comp)]
    for a, b in zip(ctails, cheads):
        succ[a].append(b)
    co = [1 << k for k in range(n_comp)]
    # inter-component edges go from larger to smaller ids
    for a in range(n_comp - 1, -1, -1):
        for b in succ[a]:
            co[b] |= co[a]
    return co


def conley_lyapunov(graph: FlowGraph, weighting: str = "auto") -> np.ndarray:
    """Finite Conley function on the condensation.

    Component n (in sink-first order) contributes weight c_n to every cell
    from which n is unreachable.  ``dyadic`` uses c_n = 2^-(n+1); ``uniform``
    uses c_n = 1/N, which stays exactly representable for large
    condensations.  ``auto`` picks dyadic for at most 52 components.
    """
    comp, ncomp = tarjan_scc(graph.n_nodes, graph.tails, graph.heads)
    inter = comp[graph.tails] != comp[graph.heads]
    pairs = np.unique(np.column_stack([comp[graph.tails][inter], comp[graph.heads][inter]]), axis=0)
    co = _coreach_sets(ncomp, pairs[:, 0].tolist(), pairs[:, 1].tolist())
    if weighting == "auto":
        weighting = "dyadic" if ncomp <= 52 else "uniform"
    full = (1 << ncomp) - 1
    if weighting == "dyadic":
        if ncomp > 52:
            raise ValueError("dyadic weighting is not representable beyond 52 components")
        vals = []
        for k in range(ncomp):
            rest = full & ~co[k]
            vals.append(sum(2.0 ** -(j + 1) for j in range(ncomp) if rest >> j & 1))
    elif weighting == "uniform":
        vals = [(full & ~co[k]).bit_count() / ncomp for k in range(ncomp)]
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    return np.asarray(vals, dtype=float)[comp]


@dataclass(frozen=True, eq=False)
class DiscreteLyapunovData:
    g: np.ndarray
    L: np.ndarray
    lam: float
    epsilon: float
    theta: float
    edge_values: np.ndarray
    feasible: bool
    witness: Cycle | None = None
    violations: tuple[str, ...] = ()

    def to_json(self, per_edge: bool = False) -> dict:
        out = {
            "feasible": self.feasible,
            "lambda": self.lam if math.isfinite(self.lam) else None,
            "epsilon": self.epsilon,
            "theta": self.theta,
            "g": self.g.tolist(),
            "L": self.L.tolist(),
            "witness": self.witness.to_json() if self.witness else None,
            "violations": list(self.violations),
        }
        if per_edge:
            out["edge_values"] = self.edge_values.tolist()
        return out


def _recurrent_inside_edges(graph, report, comp) -> np.ndarray:
    """Edges inside R_xi lying on a cycle of weight >= -theta."""
    inside = _inside_mask(graph, report) & (comp[graph.tails] == comp[graph.heads])
    if not inside.any():
        return inside
    idx = np.flatnonzero(inside)
    pot, _, cyc = bellman_ford(graph.n_nodes, graph.tails[idx], graph.heads[idx], -graph.weight[idx])
    if cyc:
        # positive cycles inside R_xi: all their edges count as recurrent
        return inside
    best = edge_cycle_costs(graph.n_nodes, graph.tails, graph.heads, -graph.weight, pot, inside)
    return inside & (best <= report.theta + TOL)


def combine(graph: FlowGraph, g, L, report: RecurrenceReport, epsilon: float) -> DiscreteLyapunovData:
    """Assemble w + dg + lambda dL with lambda = 1 + max |w + dg| / |dL|.

    The maximum runs over inter-component edges not touching C_xi (where the
    corrected weight is not already controlled).
    """
    g = np.asarray(g, dtype=float)
    L = np.asarray(L, dtype=float)
    t, h = graph.tails, graph.heads
    comp, _ = tarjan_scc(graph.n_nodes, t, h)
    inter = comp[t] != comp[h]
    dL = L[h] - L[t]
    if np.any(dL[inter] >= 0):
        bad = int(np.flatnonzero(inter & (dL >= 0))[0])
        raise RuntimeError(f"Conley function does not drop along inter-component edge {bad}")
    base = graph.weight + g[h] - g[t]
    C = report.mask("C_xi")
    sel = inter & ~(C[t] | C[h])
    ratio = np.abs(base[sel]) / np.abs(dL[sel])
    lam = 1.0 + (float(ratio.max()) if len(ratio) else 0.0)
    values = base + lam * dL

    violations = []
    inside = _inside_mask(graph, report)
    out = ~inside
    if np.any(values[out] > -epsilon + TOL):
        e = int(np.flatnonzero(out & (values > -epsilon + TOL))[0])
        violations.append(f"edge {e} leaves R_xi with corrected weight {values[e]:.6g} > -epsilon")
    cross = inside & inter
    if np.any(values[cross] >= 0):
        e = int(np.flatnonzero(cross & (values >= 0))[0])
        violations.append(f"edge {e} joins R_xi components with corrected weight {values[e]:.6g} >= 0")
    rec = _recurrent_inside_edges(graph, report, comp)
    if np.any(np.abs(values[rec]) > report.theta + TOL):
        e = int(np.flatnonzero(rec & (np.abs(values) > report.theta + TOL))[0])
        violations.append(f"recurrent edge {e} in R_xi has |corrected weight| {abs(values[e]):.6g} > theta")
    for k in np.unique(comp):
        vals = L[comp == k]
        if np.ptp(vals) != 0:
            violations.append(f"L is not constant on component {int(k)}")
            break
    return DiscreteLyapunovData(g, L, lam, float(epsilon), report.theta, values,
                                not violations, None, tuple(violations))


# -- smooth realization ------------------------------------------------------

def _half_lattice(K: int, dim: int):
    for k in itertools.product(range(-K, K + 1), repeat=dim):
        nz = [v for v in k if v != 0]
        if nz and nz[0] > 0:
            yield k


def fit_smooth_correction(grid: Grid, values, max_frequency: int) -> tuple[TrigPoly, float]:
    """Least-squares trigonometric fit of cell-centre values.

    Returns the polynomial and the largest absolute residual at the centres.
    """
    if max_frequency < 0 or 2 * max_frequency > min(grid.resolution):
        raise ConfigurationError(
            f"max_frequency {max_frequency} exceeds the aliasing bound min(resolution)/2 = "
            f"{min(grid.resolution) / 2:g}")
    values = np.asarray(values, dtype=float)
    x = grid.centers()
    ks = list(_half_lattice(max_frequency, grid.dim))
    cols = [np.ones(len(x))]
    basis = [((0,) * grid.dim, "cos")]
    if ks:
        th = 2 * math.pi * x @ np.array(ks, dtype=float).T
        cols += list(np.cos(th).T) + list(np.sin(th).T)
        basis += [(k, "cos") for k in ks] + [(k, "sin") for k in ks]
    A = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(A, values, rcond=None)
    resid = float(np.max(np.abs(A @ coef - values))) if len(values) else 0.0
    scale = max(float(np.max(np.abs(coef))), 1.0)
    terms = [TrigTerm(c, k, b) for c, (k, b) in zip(coef, basis) if abs(c) > 1e-13 * scale]
    return TrigPoly(terms, grid.dim), resid


@dataclass(frozen=True, eq=False)
class SmoothLyapunovForm:
    base: ClosedOneForm
    correction: TrigPoly
    lambda_l: TrigPoly
    grid: Grid | None = None
    residuals: dict = field(default_factory=dict)

    @property
    def form(self) -> ClosedOneForm:
        return ClosedOneForm(self.base.periods, self.base.potential + self.correction + self.lambda_l)

    def to_json(self) -> dict:
        return self.form.to_json()


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    lambda1_passed: bool
    lambda1_max_pairing: float
    lambda1_samples: int
    margin: float
    lambda2_passed: bool | None
    lambda2_max_norm: float
    lambda2_samples: int
    lambda2_bound: float | None
    worst_offenders: tuple = ()
    surrogate: str = "(Lambda2') pointwise |omega| on Y-cells"

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "lambda1": {"passed": self.lambda1_passed, "max_pairing": self.lambda1_max_pairing,
                        "samples": self.lambda1_samples, "margin": self.margin,
                        "worst_offenders": [list(o) for o in self.worst_offenders]},
            "lambda2": {"passed": self.lambda2_passed, "max_norm": self.lambda2_max_norm,
                        "samples": self.lambda2_samples, "bound": self.lambda2_bound,
                        "surrogate": self.surrogate},
        }


def verify_lyapunov(spec: TorusFlowSpec, candidate, Y_cells, n_samples: int, margin: float,
                    grid: Grid | None = None, lambda2_bound: float | None = None,
                    seed: int = 0, n_worst: int = 5) -> VerificationReport:
    """Sample-based check of the Lyapunov 1-form conditions.

    Strict decrease: omega(V) <= -margin at quasi-random points more than one
    cell away from Y.  On Y: the largest pointwise norm of omega, compared
    with ``lambda2_bound`` when given.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if isinstance(candidate, SmoothLyapunovForm):
        grid = grid or candidate.grid
        form = candidate.form
    else:
        form = candidate
    Y_cells = np.asarray(Y_cells, dtype=np.int64)
    pts = qmc.Halton(d=spec.dim, scramble=True, seed=seed).random(n_samples)
    if len(Y_cells):
        if grid is None:
            raise ValueError("a grid is needed to locate Y cells")
        Y = np.zeros(grid.n_cells, bool)
        Y[Y_cells] = True
        cells = grid.cell_of(pts)
        near = grid.dilate(Y, 1)[cells]
        on_Y = Y[cells]
    else:
        near = np.zeros(n_samples, bool)
        on_Y = near
    off = pts[~near]
    iota = pair_form_with_field(form, spec, off) if len(off) else np.zeros(0)
    top = float(iota.max()) if len(iota) else -math.inf
    lam1 = bool(top <= -margin)
    order = np.argsort(-iota)[:n_worst] if len(iota) else []
    worst = tuple((*(float(c) for c in off[i]), float(iota[i])) for i in order)
    on = pts[on_Y]
    norms = np.linalg.norm(form.coefficients(on), axis=-1) if len(on) else np.zeros(0)
    top2 = float(norms.max()) if len(norms) else 0.0
    lam2 = None if lambda2_bound is None else bool(top2 <= lambda2_bound)
    passed = lam1 and lam2 is not False
    return VerificationReport(passed, lam1, top, int(len(off)), float(margin), lam2, top2,
                              int(len(on)), lambda2_bound, worst)


# -- pipeline ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SynthesisResult:
    data: DiscreteLyapunovData
    smooth: SmoothLyapunovForm | None
    conley_included: bool = False

    @property
    def feasible(self) -> bool:
        return self.data.feasible


def _needs_conley(graph, report, g, epsilon) -> bool:
    """Does w + dg alone already satisfy the strict-decrease invariants?"""
    t, h = graph.tails, graph.heads
    base = graph.weight + g[h] - g[t]
    inside = _inside_mask(graph, report)
    comp, _ = tarjan_scc(graph.n_nodes, t, h)
    inter = comp[t] != comp[h]
    ok = np.all(base[~inside] <= -epsilon + TOL) and np.all(base[inside & inter] < 0)
    return not ok


def synthesize(spec: TorusFlowSpec, graph: FlowGraph, report: RecurrenceReport,
               epsilon: float | None = None, max_frequency: int | None = None,
               conley: str = "auto", weighting: str = "auto", eta: float | None = None) -> SynthesisResult:
    """Discrete Lyapunov data plus (when feasible) its smooth trigonometric realization.

    ``conley='auto'`` adds the fitted lambda*L term only when the corrected
    weights w + dg do not already decrease strictly off R_xi.
    """
    if epsilon is None:
        epsilon = default_epsilon(graph, eta)
    sol = synthesize_potential(graph, report, epsilon)
    if not sol.feasible:
        data = DiscreteLyapunovData(sol.g, np.zeros(graph.n_nodes), math.nan, float(epsilon),
                                    report.theta, np.full(graph.n_edges, np.nan), False,
                                    sol.witness, ("difference constraints are infeasible",))
        return SynthesisResult(data, None)
    L = conley_lyapunov(graph, weighting)
    data = combine(graph, sol.g, L, report, epsilon)
    if graph.grid is None or graph.form is None:
        return SynthesisResult(data, None)
    if max_frequency is None:
        max_frequency = max(1, min(graph.grid.resolution) // 4)
    G, res_g = fit_smooth_correction(graph.grid, sol.g - np.mean(sol.g), max_frequency)
    use_L = conley == "always" or (conley == "auto" and _needs_conley(graph, report, sol.g, epsilon))
    if use_L:
        lamL, res_l = fit_smooth_correction(graph.grid, data.lam * (L - np.mean(L)), max_frequency)
    else:
        lamL, res_l = TrigPoly([], graph.dim), 0.0
    smooth = SmoothLyapunovForm(graph.form, G, lamL, graph.grid,
                                {"g": res_g, "lambda_L": res_l, "max_frequency": max_frequency})
    return SynthesisResult(data, smooth, use_L)


def dumps(obj) -> str:
    return json.dumps(obj.to_json(), indent=2)
