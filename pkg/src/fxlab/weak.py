"""First-order (delta -> 0) fixation maximisation.

Near neutrality the fixation probability is linear in the active set:
fp'(G^S, 0) = sum over active i of alpha_i, where

    alpha_i = (1/n) * sum_j p_ij * pi_j * psi_ij

with ``pi`` the neutral per-node fixation probabilities and ``psi_ij`` the
expected neutral time spent with ``i`` mutant and ``j`` resident.  Both come
from linear systems over the transition weights ``p_ij = w(u_i, u_j)``.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass

import numpy as np

from .errors import DirectedUnsupported, SolverSingular
from .graph import Graph


@dataclass(frozen=True)
class WeakSelection:
    chosen: tuple[int, ...]
    objective: float


def _solve(a: np.ndarray, b: np.ndarray, max_iter: int = 8) -> np.ndarray:
    """Solve ``a x = b`` to (nearly) correctly rounded float64.

    ``a`` and ``b`` are given in extended precision.  One float64
    factorisation (an explicit inverse, reused) is followed by iterative
    refinement with residuals in extended precision.  Without this,
    symmetric nodes come out a few ulps apart and exact comparisons of
    alpha sums become order dependent.
    """
    try:
        inv = np.linalg.inv(a.astype(float))
    except np.linalg.LinAlgError as exc:
        raise SolverSingular(str(exc)) from exc
    x = (inv @ b.astype(float)).astype(np.longdouble)
    for _ in range(max_iter):
        if not np.all(np.isfinite(x)):
            break
        dx = inv @ (b - a @ x).astype(float)
        x += dx
        if np.max(np.abs(dx), initial=0.0) <= 1e-17 * np.max(np.abs(x), initial=0.0):
            break
    out = x.astype(float)
    if not np.all(np.isfinite(out)):
        raise SolverSingular("non-finite solution")
    return out


def solve_pi(g: Graph) -> np.ndarray:
    """Neutral fixation probability of a single mutant at each node.

    Solves ``(sum_j p_ji) pi_i = sum_j p_ij pi_j`` with the last balance
    equation replaced by ``sum_i pi_i = 1``.
    """
    p = g.weights.astype(np.longdouble)
    a = np.diag(p.sum(axis=0)) - p
    a[-1, :] = 1.0
    b = np.zeros(g.n, dtype=np.longdouble)
    b[-1] = 1.0
    return _solve(a, b)


def pi_closed_form_undirected(g: Graph) -> np.ndarray:
    if not g.undirected:
        raise DirectedUnsupported("closed form only holds for undirected graphs")
    inv = 1.0 / g.degrees
    return inv / inv.sum()


def solve_psi(g: Graph) -> np.ndarray:
    """Solve the n(n-1)-unknown system for ``psi``; returns ``n x n``, zero diagonal.

    Row (i, j):  (T_i + T_j) psi_ij - sum_l p_li psi_lj - sum_l p_lj psi_il = 1,
    where ``T_k = sum_l p_lk`` and diagonal unknowns are pinned to zero.
    Unknowns are ordered row-major over (i, j), i != j.  Dense LU costs
    O(n^6), which is comfortable up to n of a few dozen.
    """
    n = g.n
    p = g.weights.astype(np.longdouble)
    col = np.full((n, n), -1, dtype=np.int64)
    off = ~np.eye(n, dtype=bool)
    col[off] = np.arange(n * (n - 1))
    temp = p.sum(axis=0)
    a = np.zeros((n * (n - 1), n * (n - 1)), dtype=np.longdouble)
    r = 0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            a[r, r] = temp[i] + temp[j]
            # psi_lj with l != j, and psi_il with l != i
            for ell in np.flatnonzero(p[:, i]):
                if ell != j:
                    a[r, col[ell, j]] -= p[ell, i]
            for ell in np.flatnonzero(p[:, j]):
                if ell != i:
                    a[r, col[i, ell]] -= p[ell, j]
            r += 1
    x = _solve(a, np.ones(n * (n - 1), dtype=np.longdouble))
    psi = np.zeros((n, n))
    psi[off] = x
    return psi


_alpha_cache: "weakref.WeakKeyDictionary[Graph, np.ndarray]" = weakref.WeakKeyDictionary()


def alpha_scores(g: Graph) -> np.ndarray:
    """Per-node contribution to fp'(G^S, 0); cached per graph instance."""
    cached = _alpha_cache.get(g)
    if cached is None:
        pi = solve_pi(g)
        psi = solve_psi(g)
        terms = g.weights * pi[None, :] * psi
        # fsum makes the row sum independent of neighbour order
        cached = np.array([math.fsum(row) for row in terms]) / g.n
        cached.setflags(write=False)
        _alpha_cache[g] = cached
    return cached


def weak_objective(g: Graph, active) -> float:
    """fp'(G^S, 0) for the given active set."""
    alpha = alpha_scores(g)
    return math.fsum(alpha[u] for u in set(active))


TIE_TOL = 1e-12


def top_k(scores, k: int, tol: float = TIE_TOL) -> tuple[int, ...]:
    """Indices of the ``k`` largest scores.

    Scores within ``tol`` (relative to the current maximum) count as tied and
    go to the lower index, so solver round-off on symmetric nodes cannot
    reorder them.
    """
    remaining = list(range(len(scores)))
    chosen = []
    for _ in range(max(0, min(k, len(scores)))):
        best = max(scores[u] for u in remaining)
        cut = best - tol * max(1.0, abs(best))
        u = next(u for u in remaining if scores[u] >= cut)
        chosen.append(u)
        remaining.remove(u)
    return tuple(chosen)


def weak_select(g: Graph, k: int) -> WeakSelection:
    """Optimal active set of size ``min(k, n)`` in the weak-selection limit."""
    if k < 0:
        raise ValueError("k must be >= 0")
    alpha = alpha_scores(g)
    chosen = top_k(alpha, k)
    return WeakSelection(chosen, math.fsum(alpha[u] for u in chosen))
