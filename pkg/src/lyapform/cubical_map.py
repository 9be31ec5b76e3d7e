"""Combinatorial time-tau maps on a uniform cubical grid of the torus.

Each cell is sampled on a small lattice, the samples are flowed for time tau
in the universal cover, and every landing cell (dilated by ``padding`` cells
in the sup norm) becomes an edge.  Edges carry the lifted displacement between
cell centres and the integral of the chosen closed 1-form along it.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .torus_flow import ClosedOneForm, TorusFlowSpec, flow_map, sup_speed

__all__ = ["Grid", "FlowGraph", "build_flow_graph", "reweight", "default_step",
           "write_flow_graph", "read_flow_graph"]


@dataclass(frozen=True)
class Grid:
    resolution: tuple[int, ...]

    def __post_init__(self):
        res = tuple(int(r) for r in self.resolution)
        if not res or any(r < 1 for r in res):
            raise ValueError(f"grid resolution must be positive, got {self.resolution}")
        object.__setattr__(self, "resolution", res)

    @classmethod
    def uniform(cls, n: int, dim: int = 2) -> "Grid":
        return cls((n,) * dim)

    @property
    def dim(self) -> int:
        return len(self.resolution)

    @property
    def n_cells(self) -> int:
        return math.prod(self.resolution)

    @property
    def spacing(self) -> float:
        """Largest cell side length."""
        return 1.0 / min(self.resolution)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.resolution

    def index_vectors(self, cells=None) -> np.ndarray:
        cells = np.arange(self.n_cells) if cells is None else np.asarray(cells)
        return np.stack(np.unravel_index(cells, self.resolution), axis=-1)

    def flat(self, idx) -> np.ndarray:
        """Flat cell number for (possibly unwrapped) integer index vectors."""
        idx = np.asarray(idx)
        wrapped = np.mod(idx, np.array(self.resolution))
        return np.ravel_multi_index(tuple(np.moveaxis(wrapped, -1, 0)), self.resolution)

    def centers(self, cells=None) -> np.ndarray:
        return (self.index_vectors(cells) + 0.5) / np.array(self.resolution)

    def cell_of(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.flat(np.floor(x * np.array(self.resolution)).astype(np.int64))

    def dilate(self, mask: np.ndarray, radius: int = 1) -> np.ndarray:
        """Sup-norm dilation of a boolean cell mask, with wrap-around."""
        grid_mask = np.asarray(mask, dtype=bool).reshape(self.resolution)
        out = grid_mask.copy()
        for off in itertools.product(range(-radius, radius + 1), repeat=self.dim):
            if any(off):
                out |= np.roll(grid_mask, off, axis=tuple(range(self.dim)))
        return out.reshape(-1)


@dataclass(frozen=True, eq=False)
class FlowGraph:
    """Weighted digraph on cells (or abstract nodes when ``grid`` is None).

    ``displacement[e]`` is the lifted vector from the tail centre to the head
    centre; ``weight[e]`` is the integral of ``form`` along it.  There is at
    most one edge per ordered (tail, head) pair.
    """

    n_nodes: int
    tails: np.ndarray
    heads: np.ndarray
    displacement: np.ndarray
    weight: np.ndarray
    grid: Grid | None = None
    tau: float = 1.0
    padding: int = 0
    samples_per_cell: int = 0
    step: float | None = None
    form: ClosedOneForm | None = None
    _keys: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("tails", "heads", "displacement", "weight"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        keys = self.tails.astype(np.int64) * self.n_nodes + self.heads
        if np.any(np.diff(keys) <= 0):
            raise ValueError("edges must be sorted by (tail, head) and unique; use FlowGraph.from_edges")
        object.__setattr__(self, "_keys", keys)

    @classmethod
    def from_edges(cls, n_nodes: int, edges, dim: int = 1, **kw) -> "FlowGraph":
        """Build from ``(tail, head, weight)`` or ``(tail, head, weight, displacement)``.

        Duplicate (tail, head) pairs keep the larger weight.
        """
        edges = list(edges)
        t = np.array([e[0] for e in edges], dtype=np.int64)
        h = np.array([e[1] for e in edges], dtype=np.int64)
        w = np.array([e[2] for e in edges], dtype=float)
        if edges and len(edges[0]) > 3:
            d = np.array([e[3] for e in edges], dtype=float).reshape(len(edges), -1)
        else:
            d = np.zeros((len(edges), dim))
        return cls(n_nodes, *_merge_edges(n_nodes, t, h, d, w), **kw)

    @property
    def n_edges(self) -> int:
        return len(self.tails)

    @property
    def dim(self) -> int:
        return self.displacement.shape[1]

    def edge_index(self, tail, head) -> np.ndarray:
        """Edge ids for (tail, head) pairs; -1 where no such edge exists."""
        q = np.asarray(tail, dtype=np.int64) * self.n_nodes + np.asarray(head, dtype=np.int64)
        pos = np.searchsorted(self._keys, q)
        pos = np.minimum(pos, len(self._keys) - 1)
        found = self._keys[pos] == q if len(self._keys) else np.zeros(np.shape(q), bool)
        return np.where(found, pos, -1)

    def with_weights(self, weight: np.ndarray, form: ClosedOneForm | None = None) -> "FlowGraph":
        return FlowGraph(self.n_nodes, self.tails, self.heads, self.displacement,
                         np.asarray(weight, dtype=float), self.grid, self.tau, self.padding,
                         self.samples_per_cell, self.step, form if form is not None else self.form)

    def canonical_edges(self) -> np.ndarray:
        """Edge table (tail, head, displacement..., weight) in canonical order."""
        return np.column_stack([self.tails, self.heads, self.displacement, self.weight])


def _merge_edges(n_nodes, t, h, d, w):
    if len(t) == 0:
        return t, h, d.reshape(0, d.shape[1] if d.ndim == 2 else 1), w
    # Sort by (tail, head, -weight, displacement) and keep the first of each pair.
    cols = [d[:, j] for j in reversed(range(d.shape[1]))]
    order = np.lexsort(tuple(cols) + (-w, h, t))
    t, h, d, w = t[order], h[order], d[order], w[order]
    keep = np.ones(len(t), bool)
    keep[1:] = (t[1:] != t[:-1]) | (h[1:] != h[:-1])
    return t[keep], h[keep], d[keep], w[keep]


def default_step(spec: TorusFlowSpec) -> float:
    vmax = sup_speed(spec)
    return 0.05 if vmax == 0 else min(0.05, 0.2 / vmax)


def _edge_weights(form: ClosedOneForm, grid: Grid, tails, heads, disp) -> np.ndarray:
    w = disp @ form.period_vector
    if not form.is_linear:
        f = form.potential(grid.centers())
        w = w + f[heads] - f[tails]
    return w


def _sample_offsets(m: int, dim: int) -> np.ndarray:
    # anchored at the lower corner so every grid vertex is some cell's sample
    ax = np.arange(m) / m
    return np.stack(np.meshgrid(*([ax] * dim), indexing="ij"), axis=-1).reshape(-1, dim)


def _build_chunk(spec, grid, cells, tau, m, padding, step):
    res = np.array(grid.resolution)
    kvec = grid.index_vectors(cells)                              # (C, n)
    lattice = _sample_offsets(m, grid.dim)                        # (S, n)
    starts = (kvec[:, None, :] + lattice[None, :, :]) / res        # (C, S, n)
    ends = flow_map(spec, starts.reshape(-1, grid.dim), tau, step)
    land = np.floor(ends * res).astype(np.int64)                   # unwrapped cell index
    tail_k = np.repeat(kvec, len(lattice), axis=0)
    tail = np.repeat(np.asarray(cells), len(lattice))
    offsets = np.array(list(itertools.product(range(-padding, padding + 1), repeat=grid.dim)))
    head_k = (land[:, None, :] + offsets[None, :, :]).reshape(-1, grid.dim)
    tail_k = np.repeat(tail_k, len(offsets), axis=0)
    tail = np.repeat(tail, len(offsets))
    disp = (head_k - tail_k) / res
    return tail, grid.flat(head_k), disp


def build_flow_graph(spec: TorusFlowSpec, form: ClosedOneForm, grid: Grid, tau: float,
                     samples_per_cell: int = 1, padding: int = 1, step: float | None = None,
                     threads: int = 1, chunk_cells: int = 2048) -> FlowGraph:
    """Multivalued time-tau map of ``spec`` on ``grid``.

    Start points form the lattice ``j / m`` (``j = 0..m-1``, ``m =
    samples_per_cell``) on every axis of the cell, ``m**dim`` per cell.  Duplicate (tail, head) edges keep the largest
    weight, which is conservative for upper bounds on cycle weights.
    """
    if grid.dim != spec.dim or form.dim != spec.dim:
        raise ValueError("grid, field and form must share a dimension")
    if grid.n_cells == 0:
        raise ValueError("empty grid")
    if tau <= 1:
        raise ValueError(f"tau must exceed 1 (chain times T > 1), got {tau}")
    if samples_per_cell < 1 or padding < 1:
        raise ValueError("samples_per_cell and padding must be >= 1")
    step = default_step(spec) if step is None else float(step)

    all_cells = np.arange(grid.n_cells)
    chunks = [all_cells[i:i + chunk_cells] for i in range(0, grid.n_cells, chunk_cells)]
    work = lambda c: _build_chunk(spec, grid, c, tau, samples_per_cell, padding, step)  # noqa: E731
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    tails = np.concatenate([p[0] for p in parts])
    heads = np.concatenate([p[1] for p in parts])
    disp = np.concatenate([p[2] for p in parts])
    w = _edge_weights(form, grid, tails, heads, disp)
    t, h, d, w = _merge_edges(grid.n_cells, tails, heads, disp, w)
    return FlowGraph(grid.n_cells, t, h, d, w, grid, float(tau), int(padding),
                     int(samples_per_cell), step, form)


def reweight(graph: FlowGraph, form: ClosedOneForm) -> FlowGraph:
    """Recompute weights for another form without re-integrating."""
    if graph.grid is None:
        raise ValueError("reweight needs a grid-backed graph")
    if form.dim != graph.dim:
        raise ValueError("form dimension mismatch")
    w = _edge_weights(form, graph.grid, graph.tails, graph.heads, graph.displacement)
    return graph.with_weights(w, form)


# -- serialization -----------------------------------------------------------

def write_flow_graph(graph: FlowGraph, edges_csv, header_json):
    dim = graph.dim
    with open(edges_csv, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\r\n")
        wr.writerow(["tail", "head"] + [f"d{i}" for i in range(dim)] + ["weight"])
        for i in range(graph.n_edges):
            wr.writerow([int(graph.tails[i]), int(graph.heads[i])]
                        + [f"{v:.17g}" for v in graph.displacement[i]]
                        + [f"{graph.weight[i]:.17g}"])
    header = {
        "n_nodes": graph.n_nodes,
        "dim": dim,
        "grid": list(graph.grid.resolution) if graph.grid else None,
        "tau": graph.tau,
        "padding": graph.padding,
        "samples_per_cell": graph.samples_per_cell,
        "samples_total_per_cell": graph.samples_per_cell ** dim if graph.grid else 0,
        "step": graph.step,
        "form": graph.form.to_json() if graph.form else None,
        "n_edges": graph.n_edges,
    }
    Path(header_json).write_text(json.dumps(header, indent=2) + "\n", encoding="utf-8")


def read_flow_graph(edges_csv, header_json) -> FlowGraph:
    header = json.loads(Path(header_json).read_text(encoding="utf-8"))
    dim = header["dim"]
    with open(edges_csv, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))[1:]
    t = np.array([int(r[0]) for r in rows], dtype=np.int64)
    h = np.array([int(r[1]) for r in rows], dtype=np.int64)
    d = np.array([[float(v) for v in r[2:2 + dim]] for r in rows], dtype=float).reshape(len(rows), dim)
    w = np.array([float(r[2 + dim]) for r in rows], dtype=float)
    grid = Grid(tuple(header["grid"])) if header["grid"] else None
    form = ClosedOneForm.from_json(header["form"]) if header["form"] else None
    return FlowGraph(header["n_nodes"], t, h, d, w, grid, header["tau"], header["padding"],
                     header["samples_per_cell"], header["step"], form)
