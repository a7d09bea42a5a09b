import math

import numpy as np

from extremal.core import WeightedDistribution, moments, validate_problem
from extremal.objective import Expression, Power, Tabulated
from extremal.oracle import enumerate_vertices, lp_extremal, random_feasible, vertex_distributions


def test_convex_max_and_min():
    prob = validate_problem([0, 1, 2], 1.0, 1.0)
    hi = lp_extremal(prob, Power(2), "max")
    lo = lp_extremal(prob, Power(2), "min")
    assert hi.best_value == 2.0 and hi.best_support == WeightedDistribution.from_mapping({0: 0.5, 2: 0.5})
    assert lo.best_value == 1.0 and lo.best_support.pairs == ((1.0, 1.0),)


def test_concave_table():
    table = Tabulated.from_values([0, 1, 4, 9], [0, 1, 2, 3])
    rep = lp_extremal(validate_problem([0, 1, 4, 9], 1.0, 4.0), table, "max")
    assert rep.best_value == 2.0 and rep.best_support.pairs == ((4.0, 1.0),)


def test_candidate_count():
    for k in (2, 5, 17):
        grid = list(range(k))
        on = validate_problem(grid, 1.0, 1.0)
        off = validate_problem(grid, 1.0, 0.5)
        assert lp_extremal(on, Power(2), "max").candidates_examined == k * (k - 1) // 2 + 1
        assert lp_extremal(off, Power(2), "max").candidates_examined == k * (k - 1) // 2


def test_vertices_are_feasible_and_sparse():
    prob = validate_problem([-3, 0, 1, 5, 8], 0.7, 0.7 * 2.2)
    verts = vertex_distributions(prob)
    assert verts
    for d in verts:
        p, n = moments(d)
        assert len(d) <= 2
        assert math.isclose(p, 0.7, abs_tol=1e-14) and math.isclose(n, 0.7 * 2.2, abs_tol=1e-13)
    raw, _ = enumerate_vertices(prob)
    assert len(raw) >= len(verts)


def test_tie_goes_to_smallest_support():
    # affine objective: every vertex has the same value
    prob = validate_problem([0, 1, 2, 3], 1.0, 1.5)
    rep = lp_extremal(prob, Expression("2*x + 1"), "max")
    assert rep.best_support.support == (0.0, 2.0)


def test_random_feasible_moments_and_determinism():
    prob = validate_problem(list(range(21)), 1.0, 7.0)
    a = random_feasible(prob, 42)
    assert a == random_feasible(prob, 42)
    p, n = moments(a)
    assert abs(p - 1.0) <= 1e-14 and abs(n - 7.0) <= 1e-14 * 7


def test_random_feasible_spread():
    prob = validate_problem(list(range(21)), 1.0, 7.0)
    wide = 0
    for seed in range(1000):
        d = random_feasible(prob, seed)
        p, n = moments(d)
        assert abs(p - 1.0) <= 1e-14 and abs(n - 7.0) <= 1e-13
        wide += len(d) >= 3
    assert wide >= 900


def test_sampled_points_lie_between_oracle_extremes():
    rng = np.random.default_rng(3)
    for seed in range(200):
        k = int(rng.integers(3, 25))
        grid = sorted(rng.choice(np.arange(-20, 60), k, replace=False).tolist())
        obj = Tabulated.from_values(grid, rng.normal(size=k).tolist())
        p_bar = float(rng.uniform(0.1, 1))
        prob = validate_problem(grid, p_bar, p_bar * float(rng.uniform(grid[0], grid[-1])))
        hi = lp_extremal(prob, obj, "max").best_value
        lo = lp_extremal(prob, obj, "min").best_value
        e = random_feasible(prob, seed).expectation(obj)
        assert lo - 1e-12 <= e <= hi + 1e-12
