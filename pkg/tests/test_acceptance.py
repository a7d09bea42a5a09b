"""One test per acceptance check; conftest prints a PASS/FAIL line per criterion."""

import math
import random
import string
import time

import numpy as np
import pytest

from conftest import random_convex_values, random_grid
from extremal.core import moments, validate_problem
from extremal.errors import ParseError
from extremal.exprlang import eval_expr, parse
from extremal.objective import Tabulated
from extremal.oracle import lp_extremal, random_feasible
from extremal.quantum import (
    LzjcModel,
    PathSymmetricState,
    battery_optimal_state,
    lzjc_optimal,
    lzjc_sweep,
    mzi_gap_to_optimal,
    mzi_noon_gap,
    mzi_optimal_state,
    mzi_qfi,
)
from extremal.segment import segmented_extremal
from extremal.solver import endpoint_two_point, extremal_expectation, interior_two_point, split_distribution

MODEL = LzjcModel(v=1.0, delta=0.3, truncation=100)


@pytest.fixture(scope="module")
def headline():
    start = time.perf_counter()
    dist, report, result = lzjc_optimal(MODEL, 20.0)
    return dist, report, result, time.perf_counter() - start


# ---------------------------------------------------------------- 1


def test_criterion_1_fmax(headline):
    _, report, _, _ = headline
    assert abs(report.fisher_information - 25.824) <= 0.01


def test_criterion_1_second_interval_share(headline):
    _, _, result, _ = headline
    p2, n2 = result.allocations[1]
    assert abs(p2 - 0.0949) <= 0.001
    assert abs(n2 - 9.49) <= 0.05


def test_criterion_1_weight_at_100(headline):
    dist, _, _, _ = headline
    assert abs(dist[100] - 0.0949) <= 0.001


def test_criterion_1_weights_11_12(headline):
    # expected to fail: the published pair comes from a rounded n2, see the decisions ledger
    dist, _, _, _ = headline
    assert dist.support == (11.0, 12.0, 100.0)
    assert abs(dist[11] - 0.3512) <= 0.001
    assert abs(dist[12] - 0.5539) <= 0.001


def test_criterion_1_timing(headline):
    assert headline[3] < 5.0


# ---------------------------------------------------------------- 2


def test_criterion_2_flags():
    start = time.perf_counter()
    rows = lzjc_sweep(MODEL, range(1, 21))
    elapsed = time.perf_counter() - start
    flags = {int(r["n_bar"]): r for r in rows}
    assert all(flags[n]["beats_heisenberg"] for n in range(1, 5))
    assert not flags[20]["beats_heisenberg"]
    assert all(flags[n]["beats_sql"] for n in range(5, 21))
    assert elapsed < 30.0


# ---------------------------------------------------------------- 3


def test_criterion_3_monotone_and_segmented():
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    for i in range(500):
        grid = random_grid(rng, int(rng.integers(2, 51)))
        obj = Tabulated.from_values(grid, random_convex_values(rng, grid, concave=bool(i % 2)))
        p_bar = float(rng.uniform(0.05, 1.0))
        prob = validate_problem(grid, p_bar, p_bar * float(rng.uniform(grid[0], grid[-1])))
        direction = ("max", "min")[(i // 2) % 2]
        got = extremal_expectation(prob, obj, direction).value
        ref = lp_extremal(prob, obj, direction).best_value
        assert abs(got - ref) <= 1e-10 * max(1.0, abs(ref)), (i, got, ref)
    for i in range(100):
        k = int(rng.integers(4, 31))
        grid = random_grid(rng, k, -20, 60)
        obj = Tabulated.from_values(grid, (rng.normal(size=k) * 5).tolist())
        p_bar = float(rng.uniform(0.2, 1.0))
        prob = validate_problem(grid, p_bar, p_bar * float(rng.uniform(grid[0], grid[-1])))
        direction = ("max", "min")[i % 2]
        got = segmented_extremal(prob, obj, direction).value
        ref = lp_extremal(prob, obj, direction).best_value
        assert abs(got - ref) <= 1e-9 * max(1.0, abs(ref)), (i, got, ref)
    assert time.perf_counter() - start < 60.0


# ---------------------------------------------------------------- 4


def _sandwich_draws(concave, draws):
    rng = np.random.default_rng(40 + concave)
    for i in range(draws):
        grid = random_grid(rng, int(rng.integers(3, 25)))
        obj = Tabulated.from_values(grid, random_convex_values(rng, grid, concave))
        p_bar = float(rng.uniform(0.05, 1.0))
        prob = validate_problem(grid, p_bar, p_bar * float(rng.uniform(grid[0], grid[-1])))
        yield prob, obj, random_feasible(prob, i)


@pytest.mark.parametrize("concave", [False, True], ids=["increasing", "decreasing"])
def test_criterion_4_sandwich(concave):
    for prob, obj, p in _sandwich_draws(concave, 1000):
        e = p.expectation(obj)
        inner = interior_two_point(prob).expectation(obj)
        outer = endpoint_two_point(prob).expectation(obj)
        tol = 1e-10 * max(1.0, abs(inner), abs(outer))
        lo, hi = (outer, inner) if concave else (inner, outer)
        assert lo - tol <= e <= hi + tol


@pytest.mark.parametrize("concave", [False, True], ids=["convex", "concave"])
def test_criterion_4_jensen(concave):
    rng = np.random.default_rng(44 + concave)
    for i in range(1000):
        grid = random_grid(rng, int(rng.integers(3, 25)))
        obj = Tabulated.from_values(grid, random_convex_values(rng, grid, concave))
        n_bar = grid[int(rng.integers(len(grid)))]
        prob = validate_problem(grid, 1.0, n_bar)
        e = random_feasible(prob, i).expectation(obj)
        tol = 1e-10 * max(1.0, abs(obj(n_bar)))
        if concave:
            assert e <= obj(n_bar) + tol
        else:
            assert e >= obj(n_bar) - tol


# ---------------------------------------------------------------- 5


def test_criterion_5_identities_and_reassembly():
    rng = np.random.default_rng(5)
    for i in range(200):
        grid = random_grid(rng, int(rng.integers(3, 40)), 0, 100)
        p_bar = float(rng.uniform(0.1, 1.0))
        on_grid = i % 4 == 0
        ratio = grid[int(rng.integers(len(grid) - 1))] if on_grid else float(rng.uniform(grid[0], grid[-1] - 1e-6))
        prob = validate_problem(grid, p_bar, p_bar * ratio)
        p = random_feasible(prob, i)
        fam = split_distribution(p, prob)
        res = fam.residuals()
        assert res["probability"] <= 1e-12 and res["moment"] <= 1e-12
        assert fam.reassembled() == p


# ---------------------------------------------------------------- 6


def test_criterion_6_random_states():
    rng = np.random.default_rng(6)
    for _ in range(500):
        cap = int(rng.integers(1, 80))
        levels = rng.choice(cap + 1, size=int(rng.integers(1, min(cap + 1, 8) + 1)), replace=False)
        w = rng.dirichlet(np.ones(len(levels)))
        w[-1] = 1.0 - math.fsum(w[:-1])
        if (levels == 0).all():
            continue
        state = PathSymmetricState(dict(zip(levels.tolist(), w.tolist())))
        assert mzi_noon_gap(state) <= 1e-10
        assert mzi_gap_to_optimal(state, cap) >= -1e-10


def test_criterion_6_optimal_qfi():
    rng = np.random.default_rng(66)
    for _ in range(500):
        cap = int(rng.integers(1, 200))
        n_bar = float(rng.uniform(0.01, cap))
        state, report = mzi_optimal_state(n_bar, cap)
        assert report.fisher_information == cap * n_bar
        assert math.isclose(mzi_qfi(state).fisher_information, cap * n_bar, rel_tol=1e-15)


def test_criterion_6_cap_at_mean_is_noon():
    for n in range(1, 50):
        state, _ = mzi_optimal_state(float(n), n)
        assert state == PathSymmetricState.noon(n)


# ---------------------------------------------------------------- 7


def test_criterion_7_battery():
    rng = np.random.default_rng(7)
    for n_bar in np.concatenate([rng.uniform(0, 200, 2000), np.arange(0, 50)]):
        dist = battery_optimal_state(float(n_bar))
        p, mean = moments(dist)
        assert p == 1.0 and mean == float(n_bar)
        if float(n_bar).is_integer():
            assert dist.support == (float(n_bar),)


# ---------------------------------------------------------------- 8


def test_criterion_8_precedence():
    assert eval_expr(parse("2+3*4"), 0.0) == 14
    assert eval_expr(parse("2^3^2"), 0.0) == 512


def test_criterion_8_fuzz():
    rnd = random.Random(8)
    alphabet = string.digits + "x+-*/^()., eE" + "sqrtexplogsincosabspi" + string.punctuation[:10]
    for _ in range(100_000):
        text = "".join(rnd.choice(alphabet) for _ in range(rnd.randint(0, 16)))
        try:
            parse(text)
        except ParseError:
            pass
