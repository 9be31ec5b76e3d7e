"""Shared digraph machinery: SCCs, Bellman-Ford with cycle witnesses, and
heaviest closed walks through prescribed nodes.

Nodes are integers ``0..n-1``; edges are parallel arrays ``tails``, ``heads``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

TOL = 1e-9


@dataclass(frozen=True)
class Cycle:
    """Closed walk given by consecutive edge ids (edge i ends where i+1 starts)."""

    nodes: tuple[int, ...]
    edges: tuple[int, ...]
    weight: float
    displacement: tuple[float, ...]

    @property
    def length(self) -> int:
        return len(self.edges)

    @property
    def mean(self) -> float:
        return self.weight / self.length

    @property
    def z(self) -> tuple[int, ...]:
        """Integral homology class of the closed walk (rounded lift displacement)."""
        return tuple(int(v) for v in np.rint(self.displacement))

    def pairing(self, periods) -> float:
        return float(np.dot(periods, self.z))

    def to_json(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "edges": list(self.edges),
            "weight": self.weight,
            "length": self.length,
            "mean": self.mean,
            "z": list(self.z),
        }


def cycle_from_edges(graph, edges) -> Cycle:
    edges = [int(e) for e in edges]
    if not edges:
        raise ValueError("a cycle needs at least one edge")
    t, h = graph.tails, graph.heads
    for a, b in zip(edges, edges[1:] + edges[:1]):
        if h[a] != t[b]:
            raise ValueError(f"edges {a} and {b} are not consecutive; not a closed walk")
    nodes = tuple(int(t[e]) for e in edges)
    weight = float(np.sum(graph.weight[edges]))
    disp = tuple(float(v) for v in np.sum(graph.displacement[edges], axis=0))
    return Cycle(nodes, tuple(edges), weight, disp)


def cycle_from_nodes(graph, nodes) -> Cycle:
    nodes = list(nodes)
    eids = graph.edge_index(nodes, nodes[1:] + nodes[:1])
    if np.any(eids < 0):
        raise ValueError(f"{nodes} is not a closed walk of the graph")
    return cycle_from_edges(graph, eids)


def tarjan_scc(n: int, tails: np.ndarray, heads: np.ndarray) -> tuple[np.ndarray, int]:
    """Iterative Tarjan.  Component ids come out in reverse topological order:
    id 0 is a sink of the condensation (every inter-component edge goes from a
    larger id to a smaller one)."""
    order = np.argsort(tails, kind="stable")
    adj = heads[order].tolist()
    indptr = np.searchsorted(tails[order], np.arange(n + 1)).tolist()
    index = [-1] * n
    low = [0] * n
    onstack = [False] * n
    comp = [-1] * n
    stack: list[int] = []
    counter = 0
    ncomp = 0
    for root in range(n):
        if index[root] != -1:
            continue
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        onstack[root] = True
        work = [[root, indptr[root]]]
        while work:
            frame = work[-1]
            v, pos = frame
            if pos < indptr[v + 1]:
                frame[1] = pos + 1
                w = adj[pos]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    onstack[w] = True
                    work.append([w, indptr[w]])
                elif onstack[w] and index[w] < low[v]:
                    low[v] = index[w]
                continue
            work.pop()
            if work:
                u = work[-1][0]
                if low[v] < low[u]:
                    low[u] = low[v]
            if low[v] == index[v]:
                while True:
                    x = stack.pop()
                    onstack[x] = False
                    comp[x] = ncomp
                    if x == v:
                        break
                ncomp += 1
    return np.array(comp, dtype=np.int64), ncomp


def cyclic_components(n: int, tails, heads, comp, ncomp) -> np.ndarray:
    """Boolean per component: does it carry a directed cycle?"""
    size = np.bincount(comp, minlength=ncomp)
    out = size > 1
    loops = tails[tails == heads]
    out[comp[loops]] = True
    return out


def _pred_cycles(pred: np.ndarray, tails: np.ndarray) -> list[list[int]]:
    """Cycles of the predecessor graph, each as a list of edge ids in walk order."""
    n = len(pred)
    pnode = np.where(pred >= 0, tails[np.maximum(pred, 0)], -1).tolist()
    pred_l = pred.tolist()
    state = [0] * n  # 0 new, 1 on current path, 2 done
    cycles = []
    for s in range(n):
        if state[s]:
            continue
        path = []
        v = s
        while v != -1 and state[v] == 0:
            state[v] = 1
            path.append(v)
            v = pnode[v]
        if v != -1 and state[v] == 1:
            i = path.index(v)
            loop = path[i:]
            # pred edges point backwards along the walk; reverse to walk order
            cycles.append([pred_l[u] for u in reversed(loop)])
        for u in path:
            state[u] = 2
    return cycles


def bellman_ford(n: int, tails, heads, cost, tol: float = TOL, check_every: int = 8):
    """Shortest paths from a virtual source joined to every node by 0-edges.

    Returns ``(dist, pred, cycles)``.  ``cycles`` lists negative cycles of the
    predecessor graph as edge-id walks (empty when the run converged).  Any
    cycle found there has weight below ``-tol``.
    """
    tails = np.asarray(tails, dtype=np.int64)
    heads = np.asarray(heads, dtype=np.int64)
    cost = np.asarray(cost, dtype=float)
    dist = np.zeros(n)
    pred = np.full(n, -1, dtype=np.int64)
    if len(tails) == 0:
        return dist, pred, []
    perm = np.argsort(heads, kind="stable")
    hs, ts, cs = heads[perm], tails[perm], cost[perm]
    starts = np.flatnonzero(np.r_[True, hs[1:] != hs[:-1]])
    targets = hs[starts]
    seg = np.diff(np.r_[starts, len(hs)])
    max_rounds = 50 * n + 100
    for r in range(1, max_rounds + 1):
        cand = dist[ts] + cs
        mins = np.minimum.reduceat(cand, starts)
        improve = mins < dist[targets] - tol
        if not improve.any():
            return dist, pred, []
        hit = np.flatnonzero(cand == np.repeat(mins, seg))
        first = hit[np.searchsorted(hit, starts)]
        dist[targets[improve]] = mins[improve]
        pred[targets[improve]] = perm[first[improve]]
        if r % check_every == 0 or r >= n:
            cyc = _pred_cycles(pred, tails)
            if cyc:
                return dist, pred, cyc
    raise RuntimeError("Bellman-Ford failed to converge or expose a cycle")


def _bfs_path(n, tails, heads, edge_mask, src, dst) -> list[int] | None:
    """Edge ids of a shortest-hop path src -> dst using edges in ``edge_mask``."""
    idx = np.flatnonzero(edge_mask)
    out: dict[int, list[int]] = {}
    for e, a in zip(idx.tolist(), tails[idx].tolist()):
        out.setdefault(a, []).append(e)
    prev = {src: -1}
    q = deque([src])
    hl = heads.tolist()
    while q:
        v = q.popleft()
        if v == dst and v != src:
            break
        for e in out.get(v, ()):
            x = hl[e]
            if x == dst and dst == src:
                prev["end"] = e
                q.clear()
                break
            if x not in prev:
                prev[x] = e
                q.append(x)
    if src == dst:
        if "end" not in prev:
            return None
        path = [prev["end"]]
        v = int(tails[path[0]])
    else:
        if dst not in prev:
            return None
        path = []
        v = dst
    while v != src:
        e = prev[v]
        path.append(e)
        v = int(tails[e])
    return path[::-1]


def closed_walk_through(n, tails, heads, edge_mask, a, b) -> list[int] | None:
    """Closed walk a -> b -> a inside ``edge_mask`` (a == b allowed)."""
    if a == b:
        return _bfs_path(n, tails, heads, edge_mask, a, a)
    p = _bfs_path(n, tails, heads, edge_mask, a, b)
    q = _bfs_path(n, tails, heads, edge_mask, b, a)
    if p is None or q is None:
        return None
    return p + q


def find_cycle_in(n, tails, heads, edge_mask) -> list[int] | None:
    """Some directed cycle (edge ids) among the masked edges, if any."""
    idx = np.flatnonzero(edge_mask)
    if len(idx) == 0:
        return None
    loops = idx[tails[idx] == heads[idx]]
    if len(loops):
        return [int(loops[0])]
    comp, ncomp = tarjan_scc(n, tails[idx], heads[idx])
    size = np.bincount(comp, minlength=ncomp)
    inside = idx[(comp[tails[idx]] == comp[heads[idx]]) & (size[comp[tails[idx]]] > 1)]
    if len(inside) == 0:
        return None
    e0 = int(inside[0])
    back = _bfs_path(n, tails, heads, edge_mask, int(heads[e0]), int(tails[e0]))
    return [e0] + back


def reduced_costs(tails, heads, cost, potential) -> np.ndarray:
    return np.maximum(cost + potential[tails] - potential[heads], 0.0)


def best_closed_walks(n, tails, heads, cost, potential, sources, edge_mask, chunk: int = 256):
    """Minimum cost of a closed walk through each source using masked edges.

    ``potential`` must make the reduced costs nonnegative (up to tolerance),
    i.e. there is no negative cycle.  Returns an array aligned with ``sources``
    (``inf`` where no closed walk exists).
    """
    sources = np.asarray(sources, dtype=np.int64)
    out = np.full(len(sources), np.inf)
    if len(sources) == 0:
        return out
    idx = np.flatnonzero(edge_mask)
    t, h = tails[idx], heads[idx]
    red = reduced_costs(t, h, cost[idx], potential)
    mat = csr_matrix((red, (t, h)), shape=(n, n))
    for lo in range(0, len(sources), chunk):
        src = sources[lo:lo + chunk]
        D = dijkstra(mat, directed=True, indices=src)
        row_of = np.full(n, -1, dtype=np.int64)
        row_of[src] = np.arange(len(src))
        sel = np.flatnonzero(row_of[h] >= 0)
        rows = row_of[h[sel]]
        vals = red[sel] + D[rows, t[sel]]
        best = np.full(len(src), np.inf)
        np.minimum.at(best, rows, vals)
        out[lo:lo + chunk] = best
    return out


def best_closed_walk_edges(n, tails, heads, cost, potential, v, edge_mask) -> list[int] | None:
    """Edge ids of a minimum-cost closed walk through ``v`` (see best_closed_walks)."""
    idx = np.flatnonzero(edge_mask)
    t, h = tails[idx], heads[idx]
    red = reduced_costs(t, h, cost[idx], potential)
    mat = csr_matrix((red, (t, h)), shape=(n, n))
    D, P = dijkstra(mat, directed=True, indices=[v], return_predecessors=True)
    D, P = D[0], P[0]
    into = np.flatnonzero(h == v)
    if len(into) == 0:
        return None
    vals = red[into] + D[t[into]]
    j = into[int(np.argmin(vals))]
    if not np.isfinite(vals.min()):
        return None
    # path v -> t[j] from Dijkstra predecessors, then the closing edge
    path_nodes = [int(t[j])]
    while path_nodes[-1] != v:
        path_nodes.append(int(P[path_nodes[-1]]))
    path_nodes.reverse()
    # translate node path into edge ids of the original arrays
    key = t.astype(np.int64) * n + h
    order = np.argsort(key)
    edges = []
    for a, b in zip(path_nodes, path_nodes[1:]):
        pos = order[np.searchsorted(key[order], a * n + b)]
        edges.append(int(idx[pos]))
    edges.append(int(idx[j]))
    return edges


def edge_cycle_costs(n, tails, heads, cost, potential, edge_mask, chunk: int = 256):
    """For every masked edge, the minimum cost of a closed walk using it.

    Same nonnegativity requirement on reduced costs as best_closed_walks.
    Unmasked edges get ``inf``.
    """
    out = np.full(len(tails), np.inf)
    idx = np.flatnonzero(edge_mask)
    if len(idx) == 0:
        return out
    t, h = tails[idx], heads[idx]
    red = reduced_costs(t, h, cost[idx], potential)
    mat = csr_matrix((red, (t, h)), shape=(n, n))
    sources = np.unique(h)
    for lo in range(0, len(sources), chunk):
        src = sources[lo:lo + chunk]
        D = dijkstra(mat, directed=True, indices=src)
        row_of = np.full(n, -1, dtype=np.int64)
        row_of[src] = np.arange(len(src))
        sel = np.flatnonzero(row_of[h] >= 0)
        out[idx[sel]] = red[sel] + D[row_of[h[sel]], t[sel]]
    return out
