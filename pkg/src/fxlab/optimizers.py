"""Activation heuristics: choose k active nodes to raise fixation probability.

Every selector returns exactly ``min(k, n)`` distinct nodes and breaks ties
towards the lower node index.
"""

from __future__ import annotations

import enum
import heapq
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import exact, moran, weak
from .errors import OracleFailure
from .graph import Graph, temperatures

Oracle = Callable[[frozenset], tuple[float, float]]

GAIN_DIGITS = 12  # marginal gains are compared after rounding to this many decimals


class Heuristic(str, enum.Enum):
    RANDOM = "random"
    HIGH_DEGREE = "high-degree"
    CENTRALITY = "centrality"
    TEMPERATURE = "temperature"
    VERTEX_COVER = "vertex-cover"
    WEAK_SELECTOR = "weak-selector"
    LAZY_GREEDY = "lazy-greedy"


@dataclass(frozen=True)
class Selection:
    heuristic: Heuristic
    chosen: tuple[int, ...]  # in pick order
    k: int
    seed: Optional[int] = None
    oracle_evals: int = 0
    objective: Optional[float] = None

    @property
    def active(self) -> frozenset:
        return frozenset(self.chosen)


def _budget(g: Graph, k: int) -> int:
    if k < 0:
        raise ValueError("k must be >= 0")
    return min(k, g.n)


def select_random(g: Graph, k: int, seed: int) -> Selection:
    m = _budget(g, k)
    rng = np.random.default_rng(seed)
    chosen = tuple(sorted(int(u) for u in rng.choice(g.n, size=m, replace=False)))
    return Selection(Heuristic.RANDOM, chosen, k, seed=seed)


def select_high_degree(g: Graph, k: int) -> Selection:
    chosen = weak.top_k(g.degrees.astype(float), _budget(g, k))
    return Selection(Heuristic.HIGH_DEGREE, chosen, k)


def betweenness(g: Graph) -> np.ndarray:
    """Shortest-path betweenness on the unweighted support (Brandes).

    Digraphs use directed paths.  Undirected scores are halved so each
    unordered pair counts once.
    """
    n = g.n
    adj = [g.out_idx[g.out_ptr[u] : g.out_ptr[u + 1]].tolist() for u in range(n)]
    cb = np.zeros(n)
    for s in range(n):
        order = []
        preds = [[] for _ in range(n)]
        sigma = np.zeros(n)
        sigma[s] = 1.0
        dist = np.full(n, -1)
        dist[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            order.append(v)
            for w in adj[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        dep = np.zeros(n)
        for w in reversed(order):
            for v in preds[w]:
                dep[v] += sigma[v] / sigma[w] * (1.0 + dep[w])
            if w != s:
                cb[w] += dep[w]
    return cb / 2.0 if g.undirected else cb


def select_centrality(g: Graph, k: int) -> Selection:
    chosen = weak.top_k(betweenness(g), _budget(g, k))
    return Selection(Heuristic.CENTRALITY, chosen, k)


def select_temperature(g: Graph, k: int) -> Selection:
    chosen = weak.top_k(temperatures(g), _budget(g, k))
    return Selection(Heuristic.TEMPERATURE, chosen, k)


def coverage_edges(g: Graph) -> list[tuple[int, int]]:
    return g.undirected_edges() if g.undirected else [(u, v) for u, v, _ in g.edges()]


def coverage(g: Graph, nodes) -> int:
    """Number of edges with at least one endpoint in ``nodes``."""
    nodes = set(nodes)
    return sum(1 for u, v in coverage_edges(g) if u in nodes or v in nodes)


def select_vertex_cover(g: Graph, k: int) -> Selection:
    """Greedy maximum coverage: repeatedly add the node covering most new edges."""
    edges = coverage_edges(g)
    incident = [[] for _ in range(g.n)]
    for e, (u, v) in enumerate(edges):
        incident[u].append(e)
        incident[v].append(e)
    covered = np.zeros(len(edges), dtype=bool)
    chosen: list[int] = []
    for _ in range(_budget(g, k)):
        best, best_gain = -1, -1
        for u in range(g.n):
            if u in chosen:
                continue
            gain = sum(1 for e in incident[u] if not covered[e])
            if gain > best_gain:
                best, best_gain = u, gain
        chosen.append(best)
        covered[incident[best]] = True
    return Selection(Heuristic.VERTEX_COVER, tuple(chosen), k)


def select_weak(g: Graph, k: int) -> Selection:
    res = weak.weak_select(g, _budget(g, k))
    return Selection(Heuristic.WEAK_SELECTOR, res.chosen, k, objective=res.objective)


def lazy_greedy(g: Graph, k: int, oracle: Oracle,
                epsilon: Optional[float] = None) -> Selection:
    """CELF lazy greedy maximisation of a set function.

    Marginal gains from earlier rounds serve as upper bounds (valid when the
    objective is submodular).  The top candidate is re-evaluated against the
    current set and accepted if its fresh gain is at least the next bound
    minus ``epsilon``.  With ``epsilon=None`` the slack is twice the oracle's
    reported standard error, so exact oracles get zero slack.
    """
    m = _budget(g, k)
    evals = 0

    def call(nodes: frozenset) -> tuple[float, float]:
        nonlocal evals
        evals += 1
        try:
            value, err = oracle(nodes)
        except Exception as exc:
            raise OracleFailure(f"oracle failed on {sorted(nodes)}: {exc}") from exc
        return float(value), float(err)

    if m == 0:
        return Selection(Heuristic.LAZY_GREEDY, (), k, oracle_evals=0)
    current, _ = call(frozenset())
    heap = []
    for u in range(g.n):
        value, _ = call(frozenset([u]))
        gain = value - current
        heap.append((-round(gain, GAIN_DIGITS), u, 0, value))
    heapq.heapify(heap)
    chosen: list[int] = []
    while len(chosen) < m:
        neg, u, stamp, value = heapq.heappop(heap)
        if stamp == len(chosen):
            chosen.append(u)
            current = value
            continue
        value, err = call(frozenset(chosen) | {u})
        gain = value - current
        slack = 2.0 * err if epsilon is None else epsilon
        if not heap or round(gain, GAIN_DIGITS) >= -heap[0][0] - slack:
            chosen.append(u)
            current = value
        else:
            heapq.heappush(heap, (-round(gain, GAIN_DIGITS), u, len(chosen), value))
    return Selection(Heuristic.LAZY_GREEDY, tuple(chosen), k, oracle_evals=evals,
                     objective=current)


# ---------------------------------------------------------------------------
# Oracles for lazy_greedy


def strong_exact_oracle(g: Graph, cap_n: int = exact.DEFAULT_CAP_N) -> Oracle:
    return lambda s: (exact.exact_fp_strong(g, s, cap_n).average, 0.0)


def strong_mc_oracle(g: Graph, trials: int, seed: int) -> Oracle:
    """Monte-Carlo strong-selection oracle; every set reuses ``seed``."""
    def oracle(s):
        est = moran.estimate_fp_strong(g, s, trials, seed)
        return est.mean, est.stderr
    return oracle


def finite_exact_oracle(g: Graph, delta: float, cap_n: int = exact.DEFAULT_CAP_N) -> Oracle:
    return lambda s: (exact.exact_fp(g, s, delta, cap_n).average, 0.0)


def finite_mc_oracle(g: Graph, delta: float, trials: int, seed: int,
                     cap: Optional[int] = None) -> Oracle:
    def oracle(s):
        est = moran.estimate_fp(g, moran.ProcessParams(s, delta), trials, seed, cap=cap)
        return est.mean, est.stderr
    return oracle


def weak_oracle(g: Graph) -> Oracle:
    return lambda s: (weak.weak_objective(g, s), 0.0)


def select(g: Graph, heuristic, k: int, seed: int = 0,
           oracle: Optional[Oracle] = None, epsilon: Optional[float] = None) -> Selection:
    """Run one heuristic by name; ``lazy-greedy`` needs an ``oracle``."""
    h = Heuristic(heuristic)
    if h is Heuristic.RANDOM:
        return select_random(g, k, seed)
    if h is Heuristic.LAZY_GREEDY:
        if oracle is None:
            raise ValueError("lazy-greedy needs an oracle")
        return lazy_greedy(g, k, oracle, epsilon)
    table = {
        Heuristic.HIGH_DEGREE: select_high_degree,
        Heuristic.CENTRALITY: select_centrality,
        Heuristic.TEMPERATURE: select_temperature,
        Heuristic.VERTEX_COVER: select_vertex_cover,
        Heuristic.WEAK_SELECTOR: select_weak,
    }
    return table[h](g, k)
