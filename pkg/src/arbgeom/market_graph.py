"""No-arbitrage analysis on directed exchange-rate graphs.

Rates multiply along a path, so everything is done with log-rates: a cycle
is free of arbitrage when its log-rates sum to zero, and a graph admits a
global log-price ``pi`` (one price per asset) exactly when every cycle does.
Profitable cycles are negative cycles under the weight ``-log rate``.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import GraphError

DEFAULT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MarketGraph:
    nodes: tuple
    edges: tuple
    _index: dict = field(init=False, repr=False)
    _rate: dict = field(init=False, repr=False)

    def __init__(self, nodes, edges):
        nodes = tuple(nodes)
        edges = tuple((str(a), str(b), float(r)) for a, b, r in edges)
        for n in nodes:
            if not isinstance(n, str) or not n:
                raise GraphError(f"node identifiers must be nonempty strings, got {n!r}")
        if len(set(nodes)) != len(nodes):
            raise GraphError("duplicate node identifier")
        index = {n: i for i, n in enumerate(nodes)}
        rate = {}
        for a, b, r in edges:
            if a not in index or b not in index:
                raise GraphError(f"edge {a}->{b} references an unknown node")
            if a == b:
                raise GraphError(f"self-loop at {a}")
            if not (r > 0.0 and math.isfinite(r)):
                raise GraphError(f"rate for {a}->{b} must be positive and finite, got {r}")
            if (a, b) in rate:
                raise GraphError(f"duplicate edge {a}->{b}")
            rate[(a, b)] = r
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_rate", rate)

    @classmethod
    def from_edges(cls, edges) -> "MarketGraph":
        """Build a graph whose nodes are the edge endpoints in first-seen order."""
        nodes = []
        for a, b, _ in edges:
            for n in (a, b):
                if n not in nodes:
                    nodes.append(n)
        return cls(nodes, edges)

    def rate(self, a: str, b: str) -> float:
        try:
            return self._rate[(a, b)]
        except KeyError:
            raise GraphError(f"no edge {a}->{b}") from None

    def has_edge(self, a: str, b: str) -> bool:
        return (a, b) in self._rate

    def successors(self, a: str):
        return [b for (x, b, _) in self.edges if x == a]

    def reversed(self) -> "MarketGraph":
        """Every edge flipped with its rate inverted."""
        return MarketGraph(self.nodes, [(b, a, 1.0 / r) for a, b, r in self.edges])

    def to_dict(self) -> dict:
        return {"edges": [{"from": a, "to": b, "rate": r} for a, b, r in self.edges]}


@dataclass(frozen=True)
class CycleReport:
    cycle: tuple
    log_gain: float

    def to_dict(self) -> dict:
        return {"cycle": list(self.cycle), "log_gain": self.log_gain}


@dataclass(frozen=True)
class PotentialAssignment:
    potentials: dict
    reference: str
    component_references: tuple = ()


def cycle_log_sum(graph: MarketGraph, cycle) -> float:
    """Sum of log-rates along a closed node sequence (first == last)."""
    cycle = list(cycle)
    if len(cycle) < 2 or cycle[0] != cycle[-1]:
        raise GraphError("cycle must start and end at the same node")
    return math.fsum(math.log(graph.rate(a, b)) for a, b in zip(cycle[:-1], cycle[1:]))


def _extract_cycle(pred: np.ndarray, start: int, n: int) -> Optional[list]:
    v = start
    for _ in range(n):
        v = int(pred[v])
        if v < 0:
            return None
    # v now sits on a predecessor cycle; walk it once
    cyc = [v]
    u = int(pred[v])
    while u != v:
        if u < 0 or len(cyc) > n:
            return None
        cyc.append(u)
        u = int(pred[u])
    cyc.append(v)
    cyc.reverse()
    return cyc


def find_arbitrage(graph: MarketGraph, tol: float = DEFAULT_TOL) -> Optional[CycleReport]:
    """Return one cycle whose rate product exceeds ``exp(tol)``, or ``None``.

    Bellman-Ford relaxation on ``-log rate`` from a virtual source.  Edges only
    relax when they improve a distance by more than ``tol / (2 |V|)``; any
    cycle with log gain above ``tol`` keeps at least one such edge relaxable,
    while consistent graphs are immune to round-off churn.
    """
    n = len(graph.nodes)
    if n == 0 or not graph.edges:
        return None
    idx = graph._index
    src = np.array([idx[a] for a, _, _ in graph.edges], dtype=np.int64)
    dst = np.array([idx[b] for _, b, _ in graph.edges], dtype=np.int64)
    w = np.array([-math.log(r) for _, _, r in graph.edges], dtype=np.float64)
    pred, candidates = kernels.bellman_ford(n, src, dst, w, tol / (2.0 * n))
    seen = set()
    for c in candidates.tolist():
        cyc = _extract_cycle(pred, c, n)
        if cyc is None:
            continue
        names = tuple(graph.nodes[i] for i in cyc)
        key = frozenset(names)
        if key in seen:
            continue
        seen.add(key)
        gain = cycle_log_sum(graph, names)
        if gain > tol:
            return CycleReport(_rotate(graph, names), gain)
    return None


def _rotate(graph: MarketGraph, cycle: tuple) -> tuple:
    """Rotate a closed cycle to start at its earliest node in graph order."""
    body = list(cycle[:-1])
    k = body.index(min(body, key=graph._index.__getitem__))
    body = body[k:] + body[:k]
    return tuple(body + [body[0]])


def node_potentials(graph: MarketGraph, tol: float = DEFAULT_TOL) -> Optional[PotentialAssignment]:
    """Log-prices ``pi`` with ``log rate(a->b) = pi(b) - pi(a)`` on every edge.

    Potentials are laid down along a BFS spanning forest (one reference per
    weakly connected component, taken in node order) and every edge is then
    checked against ``tol``.  ``None`` means some cycle carries nonzero log sum.
    """
    adj: dict = {v: [] for v in graph.nodes}
    for a, b, r in graph.edges:
        lr = math.log(r)
        adj[a].append((b, lr))
        adj[b].append((a, -lr))
    pi: dict = {}
    refs = []
    for root in graph.nodes:
        if root in pi:
            continue
        refs.append(root)
        pi[root] = 0.0
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v, lr in adj[u]:
                if v not in pi:
                    pi[v] = pi[u] + lr
                    queue.append(v)
    for a, b, r in graph.edges:
        if abs(pi[b] - pi[a] - math.log(r)) > tol:
            return None
    if not refs:
        return PotentialAssignment({}, "", ())
    return PotentialAssignment({v: pi[v] for v in graph.nodes}, refs[0], tuple(refs))


def triangular_scan(graph: MarketGraph, tol: float = DEFAULT_TOL) -> list[CycleReport]:
    """All directed 3-cycles with log gain above ``tol``, best first.

    Each triangle is visited once per orientation; only profitable
    orientations are reported.
    """
    reports = []
    for a, b, c in itertools.combinations(graph.nodes, 3):
        for cyc in ((a, b, c, a), (a, c, b, a)):
            if all(graph.has_edge(x, y) for x, y in zip(cyc[:-1], cyc[1:])):
                gain = cycle_log_sum(graph, cyc)
                if gain > tol:
                    reports.append(CycleReport(cyc, gain))
    reports.sort(key=lambda r: -r.log_gain)
    return reports


def simple_cycles(graph: MarketGraph, max_len: Optional[int] = None):
    """Yield every directed simple cycle once, rooted at its smallest node index.

    Exhaustive DFS; exponential in general, meant for small graphs.
    """
    order = {v: i for i, v in enumerate(graph.nodes)}
    succ = {v: graph.successors(v) for v in graph.nodes}
    limit = max_len or len(graph.nodes)

    def dfs(root, path, on_path):
        for nxt in succ[path[-1]]:
            if nxt == root:
                yield tuple(path + [root])
            elif order[nxt] > order[root] and nxt not in on_path and len(path) < limit:
                on_path.add(nxt)
                yield from dfs(root, path + [nxt], on_path)
                on_path.discard(nxt)

    for root in graph.nodes:
        yield from dfs(root, [root], {root})
