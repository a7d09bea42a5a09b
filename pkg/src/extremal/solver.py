"""Closed-form extremal distributions for convex and concave objectives.

For a problem (grid, p_bar, n_bar):

* the *interior* pair puts all mass on the adjacent grid points straddling
  ``n_bar / p_bar``;
* the *endpoint* pair puts all mass on ``x_1`` and ``x_K``.

With decreasing average slope (concave F) the interior pair maximizes E[F]
and the endpoint pair minimizes it; with increasing slope the roles swap.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Sequence

from .core import (
    Branch,
    Direction,
    ExtremalResult,
    MomentProblem,
    WeightedDistribution,
    moments,
    rounding_tol,
)
from .errors import DegenerateSplit, MixedSlopeRequiresSegmentation, NegativeMean
from .objective import Objective, Slope, classify_slope


def two_point(lo: float, hi: float, p: float, n: float, tol: float) -> WeightedDistribution:
    """Weights on ``lo < hi`` with total ``p`` and first moment ``n``.

    Numerators within ``tol`` of zero are snapped to zero so boundary means
    give a clean point mass.
    """
    num_lo = hi * p - n
    num_hi = n - lo * p
    if num_lo < -tol or num_hi < -tol:
        raise ArithmeticError(f"mean {n!r} outside [{lo * p!r}, {hi * p!r}]")
    num_lo = 0.0 if num_lo <= tol else num_lo
    num_hi = 0.0 if num_hi <= tol else num_hi
    return WeightedDistribution.from_mapping([(lo, num_lo / (hi - lo)), (hi, num_hi / (hi - lo))])


def pivot_index(grid: Sequence[float], ratio: float) -> int:
    """Index m with ``grid[m] <= ratio < grid[m+1]`` (m = K-1 when ratio is the top point)."""
    m = bisect.bisect_right(grid, ratio) - 1
    return min(max(m, 0), len(grid) - 1)


def locate(problem: MomentProblem) -> tuple[int, bool]:
    """Pivot index and whether ``n_bar / p_bar`` lies on the grid.

    Ratios within rounding of a grid point are snapped onto it.
    """
    grid, p, n = problem.grid, problem.p_bar, problem.n_bar
    m = pivot_index(grid, problem.ratio)
    tol = rounding_tol(grid)
    if m + 1 < len(grid) and abs(grid[m + 1] * p - n) <= tol:
        return m + 1, True
    if abs(grid[m] * p - n) <= tol or m == len(grid) - 1:
        return m, True
    return m, False


def interior_two_point(problem: MomentProblem) -> WeightedDistribution:
    grid, p, n = problem.grid, problem.p_bar, problem.n_bar
    m, on_grid = locate(problem)
    if on_grid:
        return WeightedDistribution.from_mapping({grid[m]: p})
    return two_point(grid[m], grid[m + 1], p, n, rounding_tol(grid))


def endpoint_two_point(problem: MomentProblem) -> WeightedDistribution:
    grid, p, n = problem.grid, problem.p_bar, problem.n_bar
    if len(grid) == 1:
        return WeightedDistribution.from_mapping({grid[0]: p})
    return two_point(grid[0], grid[-1], p, n, rounding_tol(grid))


def extremal_expectation(problem: MomentProblem, obj: Objective, direction: Direction | str) -> ExtremalResult:
    direction = Direction.parse(direction)
    shape = classify_slope(obj, problem.grid)
    if shape.is_mixed:
        raise MixedSlopeRequiresSegmentation(shape.breakpoints)
    concave = shape.kind is Slope.DECREASING
    use_interior = concave == (direction is Direction.MAX)
    if use_interior:
        dist, branch = interior_two_point(problem), Branch.INTERIOR_TWO_POINT
    else:
        dist, branch = endpoint_two_point(problem), Branch.ENDPOINT_TWO_POINT
    if len(dist) == 1:
        branch = Branch.SINGLETON
    return ExtremalResult(dist, dist.expectation(obj), branch, direction)


def adjacent_fock_distribution(n_bar: float) -> WeightedDistribution:
    """Split unit mass between ``floor(n_bar)`` and ``floor(n_bar) + 1``."""
    n_bar = float(n_bar)
    if n_bar < 0 or math.isnan(n_bar):
        raise NegativeMean(f"mean photon number must be >= 0, got {n_bar!r}")
    lo = math.floor(n_bar)
    frac = n_bar - lo
    if frac == 0.0:
        return WeightedDistribution.from_mapping({float(lo): 1.0})
    return WeightedDistribution.from_mapping({float(lo): 1.0 - frac, float(lo + 1): frac})


# ---------------------------------------------------------------- splitting

@dataclass(frozen=True)
class SplitGroup:
    """One group of the equal-probability / equal-moment decomposition.

    ``lower`` holds this group's share of every lower-region point;
    ``upper`` is the single upper-region point with its full weight.
    ``budget`` is the group's probability in the extremal pair and
    ``pivot_weights`` the pair weights ``(at x_m, at x_{m+1})`` it receives
    (the second is zero when ``n_bar / p_bar`` sits on the grid).
    """

    lower: tuple[tuple[float, float], ...]
    upper: tuple[float, float]
    budget: float
    pivot_weights: tuple[float, float]


@dataclass(frozen=True)
class SplitFamily:
    groups: tuple[SplitGroup, ...]
    pivot: tuple[float, float | None]
    m: int
    on_grid: bool
    pivot_mass: float  # p(x_m) kept whole when the ratio is on the grid
    source: WeightedDistribution

    def reassembled(self) -> WeightedDistribution:
        parts: list[tuple[float, float]] = []
        for g in self.groups:
            parts.extend(g.lower)
            parts.append(g.upper)
        if self.pivot_mass:
            parts.append((self.pivot[0], self.pivot_mass))
        return WeightedDistribution.from_mapping(parts)

    def residuals(self) -> dict[str, float]:
        """Largest violation of the probability and moment identities over all groups."""
        xm, xm1 = self.pivot
        prob = mom = 0.0
        for g in self.groups:
            lhs_p = math.fsum([w for _, w in g.lower] + [g.upper[1]])
            lhs_n = math.fsum([x * w for x, w in g.lower] + [g.upper[0] * g.upper[1]])
            a, b = g.pivot_weights
            if self.on_grid:
                rhs_p, rhs_n = g.budget, xm * g.budget
            else:
                rhs_p, rhs_n = a + b, xm * a + xm1 * b
            prob = max(prob, abs(lhs_p - rhs_p))
            mom = max(mom, abs(lhs_n - rhs_n))
        return {"probability": prob, "moment": mom}


def split_distribution(p: WeightedDistribution, problem: MomentProblem) -> SplitFamily:
    """Decompose ``p`` into groups that each match a slice of the interior pair.

    Group j collects the upper point ``x_{m+j}`` and a share of every lower
    point proportional to ``(x_{m+j} - x_m) p(x_{m+j})``. Each group then has
    the same probability and the same first moment as its slice of the
    interior two-point distribution. Groups with an empty upper point are
    skipped.
    """
    grid, pbar, nbar = problem.grid, problem.p_bar, problem.n_bar
    m, on_grid = locate(problem)
    xm = grid[m]
    xm1 = None if m == len(grid) - 1 else grid[m + 1]
    w = p.weights

    if on_grid:
        lower_pts = [x for x in grid[:m] if w.get(x, 0.0)]
    else:
        lower_pts = [x for x in grid[: m + 1] if w.get(x, 0.0)]
    upper_pts = [x for x in grid[m + 1 :] if w.get(x, 0.0)]
    shares = [(x - xm) * w[x] for x in upper_pts]
    total = math.fsum(shares)

    if total == 0.0:
        if on_grid and not lower_pts:
            return SplitFamily((), (xm, xm1), m, True, w.get(xm, 0.0), p)
        raise DegenerateSplit("no mass above the pivot; the split denominator is zero")

    pivot_mass = w.get(xm, 0.0) if on_grid else 0.0
    lower_total = math.fsum(w[x] for x in lower_pts)
    excess = nbar - xm * pbar  # zero when the ratio is on the grid
    groups = []
    for x_up, s in zip(upper_pts, shares):
        frac = s / total
        lower = tuple((x, frac * w[x]) for x in lower_pts)
        if on_grid:
            budget = frac * lower_total + w[x_up]
            pivot_weights = (budget, 0.0)
        else:
            gap = xm1 - xm
            share_excess = frac * excess
            hi_w = share_excess / gap
            lo_w = frac * (lower_total - excess / gap) + w[x_up]
            budget = lo_w + hi_w
            pivot_weights = (lo_w, hi_w)
        groups.append(SplitGroup(lower, (x_up, w[x_up]), budget, pivot_weights))
    if len(groups) > 1 and lower_pts:
        groups = _close_shares(groups, lower_pts, w)
    return SplitFamily(tuple(groups), (xm, xm1), m, on_grid, pivot_mass, p)


def _close_shares(groups: list[SplitGroup], lower_pts: list[float], w: dict[float, float]) -> list[SplitGroup]:
    """Snap lower shares to multiples of ulp(w(x)) and give the remainder to the last group.

    Every partial sum is then a representable multiple of the same quantum,
    so adding the shares back in any order reproduces w(x) bitwise.
    """
    cols = []
    for idx, x in enumerate(lower_pts):
        q = math.ulp(w[x])
        col = [math.floor(g.lower[idx][1] / q) * q for g in groups[:-1]]
        col.append(w[x] - math.fsum(col))
        cols.append(col)
    return [
        SplitGroup(tuple((x, cols[i][j]) for i, x in enumerate(lower_pts)), g.upper, g.budget, g.pivot_weights)
        for j, g in enumerate(groups)
    ]


def check_feasible(dist: WeightedDistribution, problem: MomentProblem, tol: float = 1e-12) -> bool:
    p_total, mean = moments(dist)
    return abs(p_total - problem.p_bar) <= tol and abs(mean - problem.n_bar) <= tol * max(1.0, abs(problem.n_bar))
