"""Population-structure graphs: construction, validation, edge-list I/O.

A graph is a weighted digraph whose rows are probability distributions over
out-neighbours (the death step of the Moran process picks ``v`` with
probability ``w(u, v)``).  Undirected graphs are the special case with a
symmetric edge relation and uniform weights ``1/deg(u)``.
"""

from __future__ import annotations

import io
import math
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import (
    ConfigError,
    DuplicateEdge,
    EmptyGraph,
    NotStronglyConnected,
    ParseError,
    RowNotStochastic,
    SelfLoop,
)

ROW_TOL = 1e-12
RENORM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable weighted digraph with row-stochastic weights.

    ``weights[u, v]`` is the probability that an offspring of ``u`` replaces
    the occupant of ``v``.  Instances hash by identity so derived tables can
    be cached per graph.
    """

    n: int
    weights: np.ndarray
    undirected: bool = False
    labels: tuple[str, ...] = ()
    out_ptr: np.ndarray = field(init=False, repr=False)
    out_idx: np.ndarray = field(init=False, repr=False)
    out_cum: np.ndarray = field(init=False, repr=False)
    out_w: np.ndarray = field(init=False, repr=False)
    in_ptr: np.ndarray = field(init=False, repr=False)
    in_idx: np.ndarray = field(init=False, repr=False)
    in_w: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=np.float64)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(self.n)))
        us, vs = np.nonzero(w > 0)  # row-major, so grouped by source
        ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(us, minlength=self.n), out=ptr[1:])
        ow = w[us, vs]
        cum = np.empty_like(ow)
        for u in range(self.n):
            lo, hi = ptr[u], ptr[u + 1]
            cum[lo:hi] = np.cumsum(ow[lo:hi])
            if hi > lo:
                cum[hi - 1] = 1.0  # guards the inverse-CDF scan against rounding
        ivs, ius = np.nonzero(w.T > 0)  # grouped by target
        iptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(ivs, minlength=self.n), out=iptr[1:])
        for name, arr in (
            ("out_ptr", ptr),
            ("out_idx", vs.astype(np.int64)),
            ("out_cum", cum),
            ("out_w", ow),
            ("in_ptr", iptr),
            ("in_idx", ius.astype(np.int64)),
            ("in_w", w[ius, ivs]),
        ):
            arr = np.ascontiguousarray(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def out_neighbors(self, u: int) -> list[tuple[int, float]]:
        nbrs = self.out_idx[self.out_ptr[u] : self.out_ptr[u + 1]]
        return [(int(v), float(self.weights[u, v])) for v in nbrs]

    def in_neighbors(self, u: int) -> list[tuple[int, float]]:
        col = self.weights[:, u]
        return [(int(v), float(col[v])) for v in np.flatnonzero(col > 0)]

    def out_degree(self, u: int) -> int:
        return int(self.out_ptr[u + 1] - self.out_ptr[u])

    def deg(self, u: int) -> int:
        """Degree of ``u``; for digraphs this is the support out-degree."""
        return self.out_degree(u)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.out_ptr)

    def edges(self) -> list[tuple[int, int, float]]:
        """Support edges ``(u, v, w)`` sorted by ``(u, v)``."""
        us, vs = np.nonzero(self.weights > 0)
        return [(int(u), int(v), float(self.weights[u, v])) for u, v in zip(us, vs)]

    def undirected_edges(self) -> list[tuple[int, int]]:
        us, vs = np.nonzero(np.triu(self.weights > 0))
        return [(int(u), int(v)) for u, v in zip(us, vs)]

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown node label {label!r}") from None


def _strongly_connected(n: int, adj: np.ndarray) -> bool:
    """Forward and backward reachability from node 0 both cover every node."""
    for mat in (adj, adj.T):
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in np.flatnonzero(mat[u] & ~seen):
                seen[v] = True
                queue.append(v)
        if not seen.all():
            return False
    return True


def _check_index(n: int, u: int) -> None:
    if not 0 <= u < n:
        raise IndexError(f"node index {u} out of range [0, {n})")


def build_directed(
    n: int,
    weighted_edges: Iterable[Sequence],
    labels: Sequence[str] | None = None,
) -> Graph:
    """Build a digraph from ``(u, v, w)`` triples.

    Rows whose out-weights sum to within 1e-9 of one are renormalised;
    anything further off raises :class:`RowNotStochastic`.
    """
    if n <= 0:
        raise EmptyGraph("graph has no nodes")
    w = np.zeros((n, n))
    seen = set()
    for u, v, wt in weighted_edges:
        u, v, wt = int(u), int(v), float(wt)
        _check_index(n, u)
        _check_index(n, v)
        if u == v:
            raise SelfLoop(f"self-loop at node {u}")
        if (u, v) in seen:
            raise DuplicateEdge(f"duplicate edge ({u}, {v})")
        if not (wt > 0 and math.isfinite(wt)):
            raise RowNotStochastic(f"edge ({u}, {v}) has non-positive weight {wt}")
        seen.add((u, v))
        w[u, v] = wt
    sums = w.sum(axis=1)
    for u in range(n):
        if not w[u].any():
            raise NotStronglyConnected(f"node {u} has no out-edges")
        if abs(sums[u] - 1.0) > RENORM_TOL:
            raise RowNotStochastic(f"out-weights of node {u} sum to {sums[u]!r}")
    off = np.abs(sums - 1.0) > ROW_TOL
    w[off] /= sums[off, None]
    if n > 1 and not _strongly_connected(n, w > 0):
        raise NotStronglyConnected("support digraph is not strongly connected")
    if n == 1:
        raise NotStronglyConnected("a single node has no out-edges")
    return Graph(n, w, undirected=False, labels=tuple(labels or ()))


def build_directed_uniform(
    n: int, arcs: Iterable[Sequence], labels: Sequence[str] | None = None
) -> Graph:
    """Digraph with weights uniform over each node's out-arcs."""
    arcs = [(int(u), int(v)) for u, v in arcs]
    outdeg = [0] * max(n, 0)
    for u, v in arcs:
        _check_index(n, u)
        outdeg[u] += 1
    missing = [u for u in range(n) if outdeg[u] == 0]
    if n > 0 and missing:
        raise NotStronglyConnected(f"node {missing[0]} has no out-edges")
    return build_directed(n, [(u, v, 1.0 / outdeg[u]) for u, v in arcs], labels)


def build_undirected(
    n: int, edges: Iterable[Sequence], labels: Sequence[str] | None = None
) -> Graph:
    """Build a simple undirected graph; ``w(u, v) = 1/deg(u)``."""
    if n <= 0:
        raise EmptyGraph("graph has no nodes")
    adj = np.zeros((n, n), dtype=bool)
    for u, v in edges:
        u, v = int(u), int(v)
        _check_index(n, u)
        _check_index(n, v)
        if u == v:
            raise SelfLoop(f"self-loop at node {u}")
        if adj[u, v]:
            raise DuplicateEdge(f"duplicate edge ({u}, {v})")
        adj[u, v] = adj[v, u] = True
    if n == 1 or not _strongly_connected(n, adj):
        raise NotStronglyConnected("undirected graph is disconnected")
    deg = adj.sum(axis=1)
    w = adj / deg[:, None]
    return Graph(n, w, undirected=True, labels=tuple(labels or ()))


def temperature(g: Graph, u: int) -> float:
    """Total incoming replacement weight ``sum_v w(v, u)``."""
    return float(g.weights[:, u].sum())


def temperatures(g: Graph) -> np.ndarray:
    return g.weights.sum(axis=0)


# ---------------------------------------------------------------------------
# Edge-list text format

_NODES_DIRECTIVE = "# nodes:"


def parse_edge_list(
    text: str | TextIO, directed: bool = False, weighted: bool = False
) -> Graph:
    """Parse ``<u> <v> [<w>]`` lines into a graph.

    Labels map to indices in first-appearance order, unless a leading
    ``# nodes: a b c`` line fixes the order (written by :func:`serialize`).
    """
    if weighted and not directed:
        raise ParseError("weighted input is only supported for directed graphs")
    if not isinstance(text, str):
        text = text.read()
    index: dict[str, int] = {}

    def node(tok: str) -> int:
        if tok not in index:
            index[tok] = len(index)
        return index[tok]

    triples = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if raw.startswith(_NODES_DIRECTIVE) and not triples:
            for tok in raw[len(_NODES_DIRECTIVE) :].split():
                if tok in index:
                    raise ParseError(f"label {tok!r} declared twice", lineno)
                node(tok)
            continue
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        want = 3 if weighted else 2
        if len(toks) != want:
            raise ParseError(f"expected {want} fields, got {len(toks)}", lineno)
        wt = 1.0
        if weighted:
            try:
                wt = float(toks[2])
            except ValueError:
                raise ParseError(f"bad weight {toks[2]!r}", lineno) from None
        triples.append((node(toks[0]), node(toks[1]), wt))

    labels = sorted(index, key=index.get)
    n = len(labels)
    if directed and weighted:
        return build_directed(n, triples, labels)
    pairs = [(u, v) for u, v, _ in triples]
    if directed:
        return build_directed_uniform(n, pairs, labels)
    return build_undirected(n, pairs, labels)


def read_edge_list(path, directed: bool = False, weighted: bool = False) -> Graph:
    with open(path, encoding="utf-8") as fh:
        return parse_edge_list(fh, directed=directed, weighted=weighted)


def serialize(g: Graph) -> str:
    """Canonical text form; ``parse_edge_list(serialize(g))`` rebuilds ``g``.

    Undirected graphs list each edge once with ``u < v``; digraphs list every
    arc with its weight in round-trip precision.
    """
    out = io.StringIO()
    out.write(_NODES_DIRECTIVE + " " + " ".join(g.labels) + "\n")
    lab = g.labels
    if g.undirected:
        for u, v in g.undirected_edges():
            out.write(f"{lab[u]} {lab[v]}\n")
    else:
        for u, v, w in g.edges():
            out.write(f"{lab[u]} {lab[v]} {w!r}\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# Generators


def cycle(n: int) -> Graph:
    if n < 3:
        raise ConfigError("cycle needs n >= 3")
    return build_undirected(n, [(i, (i + 1) % n) for i in range(n)])


def complete(n: int) -> Graph:
    return build_undirected(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def star(n: int) -> Graph:
    """Star on ``n`` nodes: centre 0 joined to leaves ``1..n-1``."""
    return build_undirected(n, [(0, i) for i in range(1, n)])


def path(n: int) -> Graph:
    return build_undirected(n, [(i, i + 1) for i in range(n - 1)])


def random_connected(n: int, m: int, seed: int, max_tries: int = 10_000) -> Graph:
    """Uniform simple graph with ``m`` edges, resampled until connected."""
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if not n - 1 <= m <= len(pairs):
        raise ConfigError(f"random-connected({n}, {m}): need n-1 <= m <= n(n-1)/2")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        pick = rng.choice(len(pairs), size=m, replace=False)
        try:
            return build_undirected(n, [pairs[i] for i in sorted(pick)])
        except NotStronglyConnected:
            continue
    raise ConfigError(f"random-connected({n}, {m}): no connected sample in {max_tries} tries")


def random_strong_digraph(n: int, p: float, seed: int, weighted: bool = True) -> Graph:
    """Random strongly connected digraph: a Hamiltonian cycle plus extra arcs.

    With ``weighted`` each row gets Dirichlet-like random weights.
    """
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    arcs = {(int(perm[i]), int(perm[(i + 1) % n])) for i in range(n)}
    for u in range(n):
        for v in range(n):
            if u != v and rng.random() < p:
                arcs.add((u, v))
    arcs = sorted(arcs)
    if not weighted:
        return build_directed_uniform(n, arcs)
    raw = {a: rng.uniform(0.2, 1.0) for a in arcs}
    sums = np.zeros(n)
    for (u, _), x in raw.items():
        sums[u] += x
    return build_directed(n, [(u, v, x / sums[u]) for (u, v), x in raw.items()])


_GEN_RE = re.compile(r"^\s*([a-z-]+)\s*\(([^)]*)\)\s*$")


def from_spec(spec: str) -> Graph:
    """Build a graph from a generator spec such as ``cycle(50)``.

    Known generators: ``cycle(n)``, ``complete(n)``, ``star(n)``, ``path(n)``,
    ``random-connected(n, m, seed)``.
    """
    m = _GEN_RE.match(spec)
    if not m:
        raise ConfigError(f"bad generator spec {spec!r}")
    name = m.group(1)
    try:
        args = [int(a) for a in m.group(2).split(",") if a.strip()]
    except ValueError:
        raise ConfigError(f"bad generator arguments in {spec!r}") from None
    table = {"cycle": (cycle, 1), "complete": (complete, 1), "star": (star, 1),
             "path": (path, 1), "random-connected": (random_connected, 3)}
    if name not in table:
        raise ConfigError(f"unknown generator {name!r}")
    fn, arity = table[name]
    if len(args) != arity:
        raise ConfigError(f"{name} takes {arity} argument(s)")
    return fn(*args)
