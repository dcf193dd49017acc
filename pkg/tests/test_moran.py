import math
import os
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest

from fxlab import exact, graph, moran
from fxlab.errors import DirectedUnsupported, ExcessiveTimeouts
from fxlab.moran import OutcomeKind, ProcessParams

from conftest import random_digraph, random_undirected


def isothermal_fp(n, r):
    """Single-mutant fixation on a complete graph via the 1-D birth-death chain.

    Built from the forward/backward transition probabilities at each mutant
    count i, without assuming their ratio in closed form.
    """
    total, prod = Fraction(1), Fraction(1)
    for i in range(1, n):
        f = r * i + (n - i)
        up = Fraction(r * i, f) * Fraction(n - i, n - 1)
        down = Fraction(n - i, f) * Fraction(i, n - 1)
        prod *= down / up
        total += prod
    return 1 / total


def within(est, target, k=3.0):
    return abs(est.mean - target) <= k * max(est.stderr, 1e-12)


def test_isothermal_oracle_closed_form():
    assert isothermal_fp(4, 2) == Fraction(8, 15)


def test_fitness():
    p = ProcessParams({0}, 1 / 3)
    assert moran.fitness({0}, p, 0) == pytest.approx(4 / 3)
    assert moran.fitness(set(), p, 0) == 1.0
    assert moran.fitness({1}, ProcessParams({0}, 10.0), 1) == 1.0
    assert moran.total_fitness(4, {0, 1}, p) == pytest.approx(4 + 1 / 3)


def test_params_reject_bad_delta():
    for d in (-1.0, math.inf, math.nan):
        with pytest.raises(ValueError):
            ProcessParams(set(), d)


def test_step_absorbing_fixed_points(k4):
    rng = np.random.default_rng(0)
    p = ProcessParams({0}, 1.0)
    assert moran.step(k4, p, frozenset(range(4)), rng) == frozenset(range(4))
    assert moran.step(k4, p, frozenset(), rng) == frozenset()


def test_step_k2_neutral_split(k2):
    rng = np.random.default_rng(11)
    p = ProcessParams(set(), 0.0)
    draws = 10_000
    full = sum(moran.step(k2, p, {0}, rng) == {0, 1} for _ in range(draws))
    # the only other outcome is extinction
    assert abs(full / draws - 0.5) <= 4 * math.sqrt(0.25 / draws)


def test_step_changes_at_most_one_node():
    g = random_digraph(7, 3)
    rng = np.random.default_rng(5)
    p = ProcessParams({1, 4}, 2.0)
    cfg = frozenset({0, 1, 2})
    for _ in range(500):
        nxt = moran.step(g, p, cfg, rng)
        assert len(cfg ^ nxt) <= 1
        cfg = nxt if 0 < len(nxt) < g.n else frozenset({0, 1, 2})


@pytest.mark.parametrize("method", moran.METHODS)
def test_simulate_trivial_starts(k4, method):
    rng = np.random.default_rng(0)
    p = ProcessParams({0}, 1.0)
    assert moran.simulate(k4, p, range(4), rng, method=method) == moran.Outcome(OutcomeKind.FIXATION, 0)
    assert moran.simulate(k4, p, (), rng, method=method) == moran.Outcome(OutcomeKind.EXTINCTION, 0)


@pytest.mark.parametrize("method", moran.METHODS)
def test_simulate_k4_full_activation(k4, method):
    rng = np.random.default_rng(2024)
    p = ProcessParams(range(4), 1.0)
    runs = 100_000
    fix = sum(moran.simulate(k4, p, {int(rng.integers(4))}, rng, method=method).kind
              == OutcomeKind.FIXATION for _ in range(runs))
    target = float(isothermal_fp(4, 2))
    assert abs(fix / runs - target) <= 3 * math.sqrt(target * (1 - target) / runs)


def test_simulate_timeout_reports_cap(k4):
    rng = np.random.default_rng(1)
    out = moran.simulate(graph.cycle(30), ProcessParams(set(), 0.0), {0, 1, 2, 3, 4, 5}, rng, cap=3)
    assert out.kind in (OutcomeKind.TIMEOUT, OutcomeKind.EXTINCTION, OutcomeKind.FIXATION)
    if out.kind == OutcomeKind.TIMEOUT:
        assert out.steps == 3


def test_estimate_k4_golden(k4):
    est = moran.estimate_fp(k4, ProcessParams({0, 1}, 1 / 3), 100_000, seed=7)
    assert within(est, 28984 / 94153)
    assert est.mean == est.fixations / est.trials
    assert est.stderr == pytest.approx(math.sqrt(est.mean * (1 - est.mean) / est.trials))
    assert est.ci95[0] <= est.mean <= est.ci95[1]


def test_estimate_neutral_is_one_over_n():
    g = random_undirected(7, 9)
    est = moran.estimate_fp(g, ProcessParams({0, 3, 5}, 0.0), 100_000, seed=1)
    assert within(est, 1 / 7)


def test_estimate_k2_closed_form(k2):
    est = moran.estimate_fp(k2, ProcessParams({0}, 1.0), 100_000, seed=3)
    assert within(est, 7 / 12)


@pytest.mark.parametrize("seed", range(3))
def test_jump_and_step_kernels_agree_with_exact(seed):
    g = random_undirected(6, 100 + seed)
    active, delta = {0, 2}, 2.0
    truth = exact.exact_fp(g, active, delta).average
    a = moran.estimate_fp(g, ProcessParams(active, delta), 40_000, seed, method="jump")
    b = moran.estimate_fp(g, ProcessParams(active, delta), 40_000, seed, method="step")
    assert within(a, truth, 4) and within(b, truth, 4)
    # same step-count law
    assert a.mean_steps == pytest.approx(b.mean_steps, rel=0.05)


def test_jump_kernel_on_weighted_digraph():
    g = random_digraph(6, 41)
    truth = exact.exact_fp(g, {1, 3}, 1.5).average
    est = moran.estimate_fp(g, ProcessParams({1, 3}, 1.5), 60_000, 2, cap=10**9)
    assert within(est, truth, 4)


def test_directed_needs_explicit_cap():
    g = random_digraph(5, 1)
    with pytest.raises(DirectedUnsupported):
        moran.estimate_fp(g, ProcessParams({0}, 1.0), 10, 0)


def test_determinism_same_seed(k4):
    p = ProcessParams({0, 1}, 1 / 3)
    assert moran.estimate_fp(k4, p, 20_000, 5) == moran.estimate_fp(k4, p, 20_000, 5)
    assert moran.estimate_fp(k4, p, 20_000, 5) != moran.estimate_fp(k4, p, 20_000, 6)


def test_determinism_across_thread_counts():
    code = (
        "from fxlab import graph, moran;"
        "g = graph.cycle(12);"
        "e = moran.estimate_fp(g, moran.ProcessParams({0, 5}, 3.0), 20000, 99);"
        "print(e.fixations, e.mean_steps)"
    )
    outs = set()
    for threads in ("1", "3"):
        env = dict(os.environ, NUMBA_NUM_THREADS="4", FXLAB_THREADS=threads)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                             text=True, check=True)
        outs.add(res.stdout)
    assert len(outs) == 1


def test_excessive_timeouts_carry_estimate():
    g = graph.cycle(20)
    with pytest.raises(ExcessiveTimeouts) as info:
        moran.estimate_fp(g, ProcessParams(set(), 0.0), 1000, 0, cap=2)
    est = info.value.estimate
    assert est.timeouts > 1 and est.mean == est.fixations / est.trials


def test_hoeffding_trials():
    assert moran.hoeffding_trials(0.01) == math.ceil(math.log(40) / 0.0002)
    assert moran.hoeffding_trials(0.1) < moran.hoeffding_trials(0.01)


def test_default_cap():
    assert moran.default_cap(3, 1.0) == 20 * 2 * 3**6


# -- strong selection -------------------------------------------------------

def test_strong_start_on_active_fixates(star4):
    rng = np.random.default_rng(0)
    assert moran.simulate_strong(star4, {0}, {0}, rng) == moran.Outcome(OutcomeKind.FIXATION, 0)


def test_strong_rejects_digraphs():
    g = random_digraph(4, 2)
    rng = np.random.default_rng(0)
    with pytest.raises(DirectedUnsupported):
        moran.simulate_strong(g, {0}, {1}, rng)
    with pytest.raises(DirectedUnsupported):
        moran.estimate_fp_strong(g, {0}, 10, 0)


def test_strong_k2_hand_value(k2):
    rng = np.random.default_rng(8)
    runs = 100_000
    fix = sum(moran.simulate_strong(k2, {0}, {int(rng.integers(2))}, rng).kind
              == OutcomeKind.FIXATION for _ in range(runs))
    assert abs(fix / runs - 0.75) <= 3 * math.sqrt(0.75 * 0.25 / runs)


def test_strong_empty_active_is_neutral():
    g = graph.cycle(5)
    est = moran.estimate_fp_strong(g, set(), 100_000, 4)
    assert within(est, 0.2)


@pytest.mark.parametrize("g, active, target", [
    (graph.cycle(4), {0, 2}, 0.75),
    (graph.star(4), {0}, 13 / 16),
    (graph.cycle(6), set(range(6)), 1.0),
])
def test_strong_estimates(g, active, target):
    est = moran.estimate_fp_strong(g, active, 100_000, 12)
    assert within(est, target) or est.mean == target


def test_statistical_monotonicity():
    g = random_undirected(6, 77)
    lo = moran.estimate_fp(g, ProcessParams({1}, 0.5), 50_000, 1)
    hi = moran.estimate_fp(g, ProcessParams({1, 4}, 1.5), 50_000, 2)
    assert lo.mean <= hi.mean + 4 * (lo.stderr + hi.stderr)


def test_mean_steps_below_bound():
    g = random_undirected(8, 5)
    est = moran.estimate_fp(g, ProcessParams({0, 1}, 2.0), 20_000, 3)
    assert est.timeouts == 0
    assert est.mean_steps <= 3.0 * 8**6
