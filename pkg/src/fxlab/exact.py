"""Exact fixation probabilities by enumerating all 2^n mutant configurations.

Configurations are n-bit integers (bit ``u`` set iff node ``u`` is a mutant).
The absorbing-chain systems are solved densely, so cost grows like 8^n;
``cap_n`` guards against accidental blow-ups (n = 12 is 4096 unknowns).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DirectedUnsupported, SolverSingular, TooLarge
from .graph import Graph

DEFAULT_CAP_N = 12


@dataclass(frozen=True)
class ExactResult:
    per_start: tuple[float, ...]
    average: float


def _check_size(g: Graph, cap_n: int) -> None:
    if g.n > cap_n:
        raise TooLarge(f"exact solver limited to n <= {cap_n}, got n = {g.n}")


def _bits(n: int) -> np.ndarray:
    states = np.arange(1 << n, dtype=np.int64)
    return ((states[:, None] >> np.arange(n)) & 1).astype(bool)


def _transitions(g: Graph, active_mask: np.ndarray, delta: float):
    """Yield ``(prob, next_state)`` arrays over all states for every support edge.

    Entry ``s`` of ``prob`` is the chance that, in state ``s``, node ``u``
    reproduces and its offspring lands on ``v``.  No-op pairs are included;
    the solver keeps their self-transition mass.
    """
    n = g.n
    states = np.arange(1 << n, dtype=np.int64)
    mut = _bits(n)
    fit = 1.0 + delta * (mut & active_mask)
    total = fit.sum(axis=1)
    for u, v, w in g.edges():
        prob = fit[:, u] / total * w
        nxt = np.where(mut[:, u], states | (1 << v), states & ~(1 << v))
        yield prob, nxt


def _solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SolverSingular(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SolverSingular("non-finite solution")
    return x


def _absorption(g: Graph, active_mask: np.ndarray, delta: float,
                transient: np.ndarray, winning: np.ndarray) -> np.ndarray:
    """Probability of reaching a ``winning`` state from every state.

    ``transient`` and ``winning`` are boolean masks over the 2^n states;
    all remaining states are absorbing losses.
    """
    size = 1 << g.n
    pos = np.full(size, -1, dtype=np.int64)
    tidx = np.flatnonzero(transient)
    pos[tidx] = np.arange(len(tidx))
    m = len(tidx)
    a = np.eye(m)
    b = np.zeros(m)
    for prob, nxt in _transitions(g, active_mask, delta):
        p, to = prob[tidx], nxt[tidx]
        inside = transient[to]
        np.add.at(a, (np.arange(m)[inside], pos[to[inside]]), -p[inside])
        b += np.where(winning[to] & ~inside, p, 0.0)
    x = _solve(a, b)
    out = winning.astype(float)
    out[tidx] = x
    return out


def _active_mask(g: Graph, active) -> np.ndarray:
    mask = np.zeros(g.n, dtype=bool)
    for u in active:
        if not 0 <= u < g.n:
            raise IndexError(f"node index {u} out of range [0, {g.n})")
        mask[u] = True
    return mask


def _singletons(g: Graph, values: np.ndarray) -> ExactResult:
    per = tuple(float(values[1 << u]) for u in range(g.n))
    return ExactResult(per, float(np.mean(per)))


def fixation_all_states(g: Graph, active, delta: float,
                        cap_n: int = DEFAULT_CAP_N) -> np.ndarray:
    """Fixation probability from every configuration, indexed by bitmask."""
    _check_size(g, cap_n)
    if delta < 0 or not np.isfinite(delta):
        raise ValueError("delta must be finite and >= 0")
    size = 1 << g.n
    full = size - 1
    transient = np.ones(size, dtype=bool)
    transient[[0, full]] = False
    winning = np.zeros(size, dtype=bool)
    winning[full] = True
    return _absorption(g, _active_mask(g, active), float(delta), transient, winning)


def exact_fp(g: Graph, active, delta: float, cap_n: int = DEFAULT_CAP_N) -> ExactResult:
    """fp(G^S, delta) and its per-start values from the full linear system."""
    return _singletons(g, fixation_all_states(g, active, delta, cap_n))


def exact_fp_strong(g: Graph, active, cap_n: int = DEFAULT_CAP_N) -> ExactResult:
    """delta -> infinity limit on undirected graphs.

    Once a mutant occupies an active node it fixates surely, so the chain
    only needs to be followed, neutrally, through configurations avoiding
    the active set.
    """
    if not g.undirected:
        raise DirectedUnsupported("strong-selection limit is defined for undirected graphs only")
    _check_size(g, cap_n)
    n = g.n
    size = 1 << n
    smask = 0
    for u in active:
        if not 0 <= u < n:
            raise IndexError(f"node index {u} out of range [0, {n})")
        smask |= 1 << u
    states = np.arange(size, dtype=np.int64)
    touches = (states & smask) != 0
    winning = touches.copy()
    winning[size - 1] = True
    transient = ~winning
    transient[0] = False
    return _singletons(g, _absorption(g, np.zeros(n, dtype=bool), 0.0, transient, winning))


def exact_occupation_psi(g: Graph, cap_n: int = DEFAULT_CAP_N) -> np.ndarray:
    """Expected neutral-process time with ``i`` mutant and ``j`` resident.

    Starts from a uniformly placed single mutant and sums the expected
    number of visits (fundamental matrix row) over configurations with
    ``i`` in X and ``j`` not in X.  Returns an ``n x n`` array with zero
    diagonal.
    """
    _check_size(g, cap_n)
    n = g.n
    size = 1 << n
    tidx = np.arange(1, size - 1)
    pos = np.full(size, -1, dtype=np.int64)
    pos[tidx] = np.arange(len(tidx))
    m = len(tidx)
    q = np.zeros((m, m))
    for prob, nxt in _transitions(g, np.zeros(n, dtype=bool), 0.0):
        p, to = prob[tidx], nxt[tidx]
        inside = (to != 0) & (to != size - 1)
        np.add.at(q, (np.arange(m)[inside], pos[to[inside]]), p[inside])
    start = np.zeros(m)
    start[pos[1 << np.arange(n)]] = 1.0 / n
    visits = _solve(np.eye(m) - q.T, start)
    mut = _bits(n)[tidx].astype(float)
    return (mut * visits[:, None]).T @ (1.0 - mut)


def finite_diff_fp_derivative(g: Graph, active, h: float = 1e-5,
                              cap_n: int = DEFAULT_CAP_N) -> float:
    """Forward difference of fp at delta = 0.

    The anchor is the solver's own delta = 0 value (1/n up to round-off), so
    solver error cancels instead of being amplified by 1/h.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    base = exact_fp(g, active, 0.0, cap_n).average
    return (exact_fp(g, active, h, cap_n).average - base) / h
