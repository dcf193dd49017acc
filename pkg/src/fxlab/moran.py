"""Monte-Carlo simulation of the positional Moran process.

The hot loop is compiled with numba.  Every trial draws from its own
counter-based SplitMix64 stream keyed by ``(seed, trial_index)``, so an
estimate depends only on ``(graph, params, trials, seed)`` and never on how
trials are scheduled across threads.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass

import numba
import numpy as np
from numba import njit, prange

from .errors import DirectedUnsupported, ExcessiveTimeouts
from .graph import Graph

Configuration = frozenset  # set of mutant-occupied node indices

# prefer OpenMP so numba never probes (and warns about) an old TBB
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

MAX_TIMEOUT_RATE = 1e-3
CAP_SAFETY = 20


class OutcomeKind(enum.IntEnum):
    EXTINCTION = 0
    FIXATION = 1
    TIMEOUT = 2


@dataclass(frozen=True)
class Outcome:
    kind: OutcomeKind
    steps: int


@dataclass(frozen=True)
class ProcessParams:
    active: frozenset
    delta: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "active", frozenset(int(u) for u in self.active))
        if not (math.isfinite(self.delta) and self.delta >= 0):
            raise ValueError(f"delta must be finite and >= 0, got {self.delta}")


@dataclass(frozen=True)
class FpEstimate:
    mean: float
    trials: int
    fixations: int
    timeouts: int
    stderr: float
    ci95: tuple[float, float]
    mean_steps: float = float("nan")

    @classmethod
    def from_counts(cls, fixations: int, trials: int, timeouts: int = 0,
                    mean_steps: float = float("nan")) -> "FpEstimate":
        mean = fixations / trials
        se = math.sqrt(mean * (1.0 - mean) / trials)
        ci = (max(0.0, mean - 1.96 * se), min(1.0, mean + 1.96 * se))
        return cls(mean, trials, fixations, timeouts, se, ci, mean_steps)


def fitness(cfg, params: ProcessParams, u: int) -> float:
    return 1.0 + params.delta if (u in cfg and u in params.active) else 1.0


def total_fitness(n: int, cfg, params: ProcessParams) -> float:
    """Population fitness ``F_S(X)``; residents and inactive mutants count 1."""
    boosted = sum(1 for u in cfg if u in params.active)
    return n + params.delta * boosted


def default_cap(n: int, delta: float = 0.0) -> int:
    """Step cap ``20 (1 + delta) n^6``: a multiple of the absorption-time bound."""
    return int(math.ceil(CAP_SAFETY * (1.0 + delta) * n**6))


def hoeffding_trials(eps: float, confidence: float = 0.95) -> int:
    """Trials so the empirical mean is within ``eps`` with the given confidence."""
    return math.ceil(math.log(2.0 / (1.0 - confidence)) / (2.0 * eps * eps))


def apply_thread_limit() -> None:
    """Honour ``FXLAB_THREADS``; only throughput changes, never results."""
    val = os.environ.get("FXLAB_THREADS")
    if not val:
        return
    want = max(1, int(val))
    numba.set_num_threads(min(want, numba.config.NUMBA_NUM_THREADS))


# ---------------------------------------------------------------------------
# Compiled core

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_SEED_SALT = np.uint64(0x2545F4914F6CDD1D)
_TO_UNIT = 1.0 / 9007199254740992.0  # 2**-53


@njit(inline="always")
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(inline="always")
def _uniform(state):
    state = state + _GAMMA
    return (_mix(state) >> np.uint64(11)) * _TO_UNIT, state


@njit(inline="always")
def _trial_key(seed_key, trial):
    return _mix(seed_key ^ (np.uint64(trial) * _GAMMA))


@njit(cache=True)
def _run_step(n, ptr, idx, cum, active, delta, mut, state, cap, strong):
    """Step-by-step trajectory, in place on ``mut``; returns (kind, steps, state).

    In ``strong`` mode the dynamics are neutral and a mutant on an active
    node counts as fixation.
    """
    # boosted mutants (mutant on an active node) kept in a swap-remove list
    blist = np.empty(n, dtype=np.int64)
    bpos = np.full(n, -1, dtype=np.int64)
    count = 0
    boosted = 0
    for i in range(n):
        if mut[i]:
            count += 1
            if active[i]:
                blist[boosted] = i
                bpos[i] = boosted
                boosted += 1
    if strong and boosted > 0:
        return 1, 0, state
    steps = 0
    while 0 < count < n:
        if steps >= cap:
            return 2, steps, state
        steps += 1
        # fitness 1 + delta*[boosted] is a mixture: uniform over all nodes
        # with weight n, uniform over boosted nodes with weight delta*boosted
        r, state = _uniform(state)
        target = r * (n + delta * boosted)
        if strong or target < n:
            u = int(target) if not strong else int(r * n)
            if u >= n:
                u = n - 1
        else:
            j = int((target - n) / delta)
            if j >= boosted:
                j = boosted - 1
            u = blist[j]
        r, state = _uniform(state)
        lo = ptr[u]
        hi = ptr[u + 1]
        v = idx[hi - 1]
        for e in range(lo, hi):
            if r < cum[e]:
                v = idx[e]
                break
        if mut[u] == mut[v]:
            continue
        mut[v] = mut[u]
        if mut[v]:
            count += 1
            if active[v]:
                if strong:
                    return 1, steps, state
                blist[boosted] = v
                bpos[v] = boosted
                boosted += 1
        else:
            count -= 1
            if active[v]:
                j = bpos[v]
                last = blist[boosted - 1]
                blist[j] = last
                bpos[last] = j
                bpos[v] = -1
                boosted -= 1
    return (1 if count == n else 0), steps, state


@njit(cache=True)
def _run_jump(n, ptr, idx, ow, iptr, iidx, iw, active, delta, mut, state, cap, strong):
    """Same law as :func:`_run_step`, simulated on the embedded jump chain.

    Steps that change nothing are skipped in bulk: the waiting time until
    the next type-changing replacement is geometric with success probability
    ``sum_u f(u) d(u) / F``, where ``d(u)`` is the out-weight of ``u`` towards
    nodes of the other type.  The returned step count has the same
    distribution as the step-by-step count.
    """
    d = np.zeros(n)
    dc = np.zeros(n, dtype=np.int64)
    count = 0
    boosted = 0
    for u in range(n):
        if mut[u]:
            count += 1
            if active[u]:
                boosted += 1
        for e in range(ptr[u], ptr[u + 1]):
            if mut[idx[e]] != mut[u]:
                d[u] += ow[e]
                dc[u] += 1
    if strong:
        if boosted > 0:
            return 1, 0, state
        delta = 0.0
    steps = 0
    while 0 < count < n:
        total = n + delta * boosted
        rate = 0.0
        for u in range(n):
            if dc[u] > 0:
                f = 1.0 + delta if (mut[u] and active[u]) else 1.0
                rate += f * d[u]
        p = rate / total
        wait = 1.0
        if p < 1.0:
            r, state = _uniform(state)
            wait += np.floor(np.log1p(-r) / np.log1p(-p))
        if steps + wait > cap:
            return 2, cap, state
        steps += int(wait)
        r, state = _uniform(state)
        target = r * rate
        acc = 0.0
        u = -1
        for i in range(n):
            if dc[i] > 0:
                f = 1.0 + delta if (mut[i] and active[i]) else 1.0
                acc += f * d[i]
                u = i
                if target < acc:
                    break
        r, state = _uniform(state)
        target = r * d[u]
        acc = 0.0
        v = -1
        for e in range(ptr[u], ptr[u + 1]):
            x = idx[e]
            if mut[x] != mut[u]:
                acc += ow[e]
                v = x
                if target < acc:
                    break
        t = mut[u]
        mut[v] = t
        if t:
            count += 1
            if active[v]:
                if strong:
                    return 1, steps, state
                boosted += 1
        else:
            count -= 1
            if active[v]:
                boosted -= 1
        d[v] = 0.0
        dc[v] = 0
        for e in range(ptr[v], ptr[v + 1]):
            if mut[idx[e]] != t:
                d[v] += ow[e]
                dc[v] += 1
        for e in range(iptr[v], iptr[v + 1]):
            x = iidx[e]
            if mut[x] == t:
                dc[x] -= 1
                d[x] = d[x] - iw[e] if dc[x] > 0 else 0.0
            else:
                dc[x] += 1
                d[x] += iw[e]
    return (1 if count == n else 0), steps, state


@njit(cache=True, parallel=True)
def _estimate(n, ptr, idx, cum, ow, iptr, iidx, iw, active, delta, seed_key, trials,
              cap, strong, jump, kinds, steps):
    for t in prange(trials):
        state = _trial_key(seed_key, t)
        r, state = _uniform(state)
        u = int(r * n)
        if u >= n:
            u = n - 1
        mut = np.zeros(n, dtype=np.uint8)
        mut[u] = 1
        if jump:
            k, s, state = _run_jump(n, ptr, idx, ow, iptr, iidx, iw, active, delta,
                                    mut, state, cap, strong)
        else:
            k, s, state = _run_step(n, ptr, idx, cum, active, delta, mut, state, cap, strong)
        kinds[t] = k
        steps[t] = s


def _seed_key(seed: int) -> np.uint64:
    # splitmix finaliser on the reduced seed, done in Python ints
    z = (int(seed) ^ int(_SEED_SALT)) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * int(_M1)) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * int(_M2)) & 0xFFFFFFFFFFFFFFFF
    return np.uint64(z ^ (z >> 31))


def _mask(n: int, nodes) -> np.ndarray:
    m = np.zeros(n, dtype=np.uint8)
    for u in nodes:
        if not 0 <= u < n:
            raise IndexError(f"node index {u} out of range [0, {n})")
        m[u] = 1
    return m


# ---------------------------------------------------------------------------
# Public API


def step(g: Graph, params: ProcessParams, cfg, rng: np.random.Generator):
    """One birth-death update; absorbing configurations are returned unchanged."""
    cfg = frozenset(cfg)
    if len(cfg) in (0, g.n):
        return cfg
    fit = np.ones(g.n)
    for u in cfg:
        if u in params.active:
            fit[u] += params.delta
    u = int(np.searchsorted(np.cumsum(fit), rng.random() * fit.sum(), side="right"))
    u = min(u, g.n - 1)
    lo, hi = g.out_ptr[u], g.out_ptr[u + 1]
    e = int(np.searchsorted(g.out_cum[lo:hi], rng.random(), side="right"))
    v = int(g.out_idx[lo + min(e, hi - lo - 1)])
    if (u in cfg) == (v in cfg):
        return cfg
    return cfg | {v} if u in cfg else cfg - {v}


METHODS = ("jump", "step")


def _trajectory(g: Graph, active, delta: float, start, state, cap: int, strong: bool,
                method: str):
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    mut = _mask(g.n, start)
    act = _mask(g.n, active)
    if method == "jump":
        return _run_jump(g.n, g.out_ptr, g.out_idx, g.out_w, g.in_ptr, g.in_idx, g.in_w,
                         act, float(delta), mut, state, cap, strong)
    return _run_step(g.n, g.out_ptr, g.out_idx, g.out_cum, act, float(delta), mut,
                     state, cap, strong)


def simulate(g: Graph, params: ProcessParams, start, rng: np.random.Generator,
             cap: int | None = None, method: str = "jump") -> Outcome:
    """Run from ``start`` until absorption or ``cap`` steps.

    ``method="step"`` performs every birth-death update explicitly;
    ``"jump"`` (default) skips runs of no-op updates but yields the same
    distribution of outcomes and step counts.
    """
    cap = default_cap(g.n, params.delta) if cap is None else int(cap)
    if cap < 1:
        raise ValueError("cap must be >= 1")
    state = np.uint64(rng.bit_generator.random_raw())
    kind, steps, _ = _trajectory(g, params.active, params.delta, start, state, cap,
                                 False, method)
    return Outcome(OutcomeKind(kind), int(steps))


def simulate_strong(g: Graph, active, start, rng: np.random.Generator,
                    cap: int | None = None, method: str = "jump") -> Outcome:
    """Strong-selection run: neutral dynamics until a mutant sits on an active node."""
    if not g.undirected:
        raise DirectedUnsupported("strong-selection dynamics are defined for undirected graphs only")
    cap = default_cap(g.n) if cap is None else int(cap)
    state = np.uint64(rng.bit_generator.random_raw())
    kind, steps, _ = _trajectory(g, active, 0.0, start, state, cap, True, method)
    return Outcome(OutcomeKind(kind), int(steps))


def _estimate_counts(g: Graph, active, delta: float, trials: int, seed: int,
                     cap: int, strong: bool, method: str) -> FpEstimate:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    apply_thread_limit()
    kinds = np.empty(trials, dtype=np.int8)
    steps = np.empty(trials, dtype=np.int64)
    _estimate(g.n, g.out_ptr, g.out_idx, g.out_cum, g.out_w, g.in_ptr, g.in_idx, g.in_w,
              _mask(g.n, active), float(delta), _seed_key(seed), trials, int(cap),
              strong, method == "jump", kinds, steps)
    fix = int(np.count_nonzero(kinds == 1))
    tout = int(np.count_nonzero(kinds == 2))
    est = FpEstimate.from_counts(fix, trials, tout, float(steps.mean()))
    if tout / trials > MAX_TIMEOUT_RATE:
        raise ExcessiveTimeouts(
            f"{tout} of {trials} trials hit the step cap {cap}", estimate=est)
    return est


def estimate_fp(g: Graph, params: ProcessParams, trials: int, seed: int,
                cap: int | None = None, method: str = "jump") -> FpEstimate:
    """Estimate fp(G^S, delta) from uniformly placed single mutants.

    Timeouts count as extinctions.  Digraphs need an explicit ``cap`` since
    the polynomial absorption bound is only known for undirected graphs.
    """
    if cap is None:
        if not g.undirected:
            raise DirectedUnsupported("default step cap needs an undirected graph; pass cap")
        cap = default_cap(g.n, params.delta)
    return _estimate_counts(g, params.active, params.delta, trials, seed, cap, False, method)


def estimate_fp_strong(g: Graph, active, trials: int, seed: int,
                       cap: int | None = None, method: str = "jump") -> FpEstimate:
    """Estimate the delta -> infinity fixation probability."""
    if not g.undirected:
        raise DirectedUnsupported("strong-selection dynamics are defined for undirected graphs only")
    cap = default_cap(g.n) if cap is None else cap
    return _estimate_counts(g, frozenset(active), 0.0, trials, seed, cap, True, method)
