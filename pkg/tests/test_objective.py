import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from extremal.errors import OutOfDomain
from extremal.objective import (
    Continuous,
    Discrete,
    Expression,
    LzjcF,
    MziF,
    Power,
    Slope,
    Tabulated,
    builtin,
    classify_slope,
    classify_values,
    evaluate,
    find_inflections,
)

GRID_100 = [float(n) for n in range(101)]


def lzjc_reference(n, v=1.0, delta=0.3):
    """High-precision evaluation of the LZ-JC per-level Fisher kernel."""
    mpmath.mp.dps = 40
    d = mpmath.mpf(delta) ** 2 * (n + 1) / (4 * mpmath.mpf(v))
    a = 2 * mpmath.pi * d
    return float(16 * mpmath.pi**2 * d**2 * mpmath.e ** (-a) / (mpmath.mpf(delta) ** 2 * (1 - mpmath.e ** (-a))))


def test_power():
    assert evaluate(Power(2), 3) == 9


def test_lzjc_matches_high_precision_reference():
    f = LzjcF(1.0, 0.3)
    for n in range(101):
        assert math.isclose(f(n), lzjc_reference(n), rel_tol=1e-12)
    assert np.allclose(f.many(GRID_100), [lzjc_reference(n) for n in range(101)], rtol=1e-12)


def test_lzjc_peak_near_eleven():
    values = [lzjc_reference(n) for n in range(101)]
    f = LzjcF(1.0, 0.3)
    peak = int(np.argmax(values))
    assert int(np.argmax(f.many(GRID_100))) == peak
    assert abs(peak - 11) <= 1


def test_lzjc_positive_and_decaying_tail():
    f = LzjcF(1.0, 0.3)
    assert all(f(n) > 0 for n in range(101))
    tail = [f(n) for n in range(90, 101)]
    assert all(a > b for a, b in zip(tail, tail[1:]))


def test_lzjc_parameter_checks():
    with pytest.raises(ValueError):
        LzjcF(0.0, 0.3)
    with pytest.raises(ValueError):
        LzjcF(1.0, 0.0)
    with pytest.raises(OutOfDomain):
        LzjcF(1.0, 0.3)(-1.0)


def test_mzi_kernel():
    assert MziF(0.5)(3) == 6.0


def test_table_missing_point():
    t = Tabulated.from_values([0, 1], [1, 2])
    with pytest.raises(OutOfDomain):
        t(0.5)
    assert t.covers([0, 1]) and not t.covers([0, 2])


def test_builtin_catalog():
    assert builtin("power", exponent=3)(2) == 8
    with pytest.raises(ValueError):
        builtin("nope")


def test_classify_convex_and_concave():
    assert classify_slope(Power(2), range(11)).kind is Slope.INCREASING
    sqrt_table = Tabulated.from_values([0, 1, 4, 9], [0, 1, 2, 3])
    assert classify_slope(sqrt_table, [0, 1, 4, 9]).kind is Slope.DECREASING


def test_classify_lzjc_breakpoint():
    shape = classify_slope(LzjcF(1.0, 0.3), GRID_100)
    assert shape.is_mixed
    assert shape.breakpoints == (20.0,)
    assert shape.runs == (Slope.DECREASING, Slope.INCREASING)


def test_short_grids_and_affine_are_increasing():
    assert classify_slope(Expression("-x^2"), [0, 1]).kind is Slope.INCREASING
    assert classify_slope(Expression("3*x - 1"), range(10)).kind is Slope.INCREASING


def test_flat_stretch_takes_lower_neighbour():
    # concave, then affine, then convex
    values = [0, 2, 3, 4, 5, 7, 10]
    shape = classify_values(values, list(range(7)))
    # second differences -1, 0, 0, 1, 1: the flat pair joins the concave run
    assert shape.breakpoints == (3.0,)
    assert shape.runs == (Slope.DECREASING, Slope.INCREASING)


def test_leading_flat_stretch_takes_first_class():
    values = [0, 1, 2, 4, 7]
    assert classify_values(values, list(range(5))).kind is Slope.INCREASING


def test_inflections_cubic_continuous():
    roots = find_inflections(Expression("x^3 - 3*x"), -2, 2, Continuous())
    assert len(roots) == 1 and abs(roots[0]) < 1e-6


def test_inflections_lzjc_continuous():
    roots = find_inflections(LzjcF(1.0, 0.3), 0, 100, Continuous())
    assert len(roots) == 1
    assert abs(roots[0] - 20.83) < 0.01


def test_inflections_lzjc_continuous_against_reference():
    # independent root of the analytic second derivative at high precision
    mpmath.mp.dps = 40
    f = lambda n: 16 * mpmath.pi**2 * (mpmath.mpf("0.09") * (n + 1) / 4) ** 2 / (
        mpmath.mpf("0.09") * (mpmath.e ** (2 * mpmath.pi * mpmath.mpf("0.09") * (n + 1) / 4) - 1)
    )
    ref = mpmath.findroot(lambda n: mpmath.diff(f, n, 2), (15, 25), solver="illinois")
    roots = find_inflections(LzjcF(1.0, 0.3), 0, 100, Continuous())
    assert abs(roots[0] - float(ref)) < 1e-4


def test_inflections_discrete_and_none():
    assert find_inflections(LzjcF(1.0, 0.3), 0, 100, Discrete(GRID_100)) == [20.0]
    assert find_inflections(Power(2), -5, 5, Continuous()) == []
    assert find_inflections(Power(2), -5, 5, Discrete(range(-5, 6))) == []


def test_inflections_need_proper_range():
    with pytest.raises(ValueError):
        find_inflections(Power(2), 1, 1, Continuous())


@given(
    st.lists(st.floats(-100, 100), min_size=3, max_size=25),
    st.floats(0.1, 10.0),
    st.floats(-50, 50),
)
def test_classification_affine_invariant(values, c, b):
    grid = list(range(len(values)))
    base = classify_values(values, grid)
    moved = classify_values([c * v + b for v in values], grid)
    # differences far from the tolerance band keep their sign under scaling
    diffs = np.diff(np.diff(values))
    if np.all((np.abs(diffs) > 1e-8 / min(c, 1.0)) | (diffs == 0)):
        assert moved == base


@given(st.lists(st.floats(-100, 100), min_size=3, max_size=25))
def test_mixed_runs_are_pure_and_alternate(values):
    grid = list(range(len(values)))
    shape = classify_values(values, grid)
    if not shape.is_mixed:
        return
    bounds = [grid[0], *shape.breakpoints, grid[-1]]
    for a, b in zip(shape.runs, shape.runs[1:]):
        assert a is not b
    for k, kind in enumerate(shape.runs):
        idx = [i for i in grid if bounds[k] <= i <= bounds[k + 1]]
        sub_values = [values[i] for i in idx]
        sub = classify_values(sub_values, idx)
        assert not sub.is_mixed
        # an all-flat run reclassifies as Increasing by convention
        if len(idx) >= 3 and np.any(np.abs(np.diff(sub_values, 2)) > 1e-10):
            assert sub.kind is kind
