"""Extremal expectations of non-convex, non-concave objectives.

The domain is cut at inflection breakpoints into intervals on which the
objective is either convex or concave. Each interval i receives a share
``p_i`` of the probability and ``n_i`` of the first moment; inside an
interval the closed-form two-point rule is optimal, so the problem reduces
to choosing the allocation ``(p_i, n_i)``.

The allocation is searched over ``(p_i, r_i = n_i / p_i)`` for every interval
but one (whose share is fixed by the totals): a coarse sweep, compass
refinement, then an explicit pass over the faces where some ratio sits on
an interval end, since optima tend to live there.

Two valuations of the interior rule are offered:

``grid``
    the interior rule is valued by the adjacent-grid-pair expectation. The
    outer objective is piecewise linear with kinks at grid ratios, and an
    exact candidate pass over those kinks makes the result match vertex
    enumeration.
``continuous``
    the interior rule is valued as ``p_i * H(n_i / p_i)`` with ``H`` evaluated
    off-grid, and only the reported distribution is snapped onto the grid.
    ``AllocationResult.objective_value`` then differs from the realized
    ``value``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .core import Direction, MomentProblem, WeightedDistribution, moments, rounding_tol
from .errors import NoFeasibleAllocation, RatioOutsideInterval
from .objective import (
    Continuous,
    Discrete,
    Objective,
    Slope,
    Tabulated,
    classify_slope,
    find_inflections,
    second_derivative,
)
from .solver import endpoint_two_point, interior_two_point, two_point


class Valuation(enum.Enum):
    GRID = "grid"
    CONTINUOUS = "continuous"


INTERIOR = "interior"
ENDPOINT = "endpoint"


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    slope: Slope
    points: tuple[float, ...] | None = None  # grid points inside, None on a continuum

    def rule(self, direction: Direction) -> str:
        concave = self.slope is Slope.DECREASING
        return INTERIOR if concave == (direction is Direction.MAX) else ENDPOINT


@dataclass(frozen=True)
class SegmentPlan:
    intervals: tuple[Interval, ...]
    objective: Objective
    direction: Direction | None = None
    allocations: tuple[tuple[float, float], ...] | None = None

    @property
    def discrete(self) -> bool:
        return self.intervals[0].points is not None

    @property
    def lo(self) -> float:
        return self.intervals[0].lo

    @property
    def hi(self) -> float:
        return self.intervals[-1].hi

    def grid(self) -> tuple[float, ...] | None:
        if not self.discrete:
            return None
        return tuple(sorted({x for iv in self.intervals for x in iv.points}))


@dataclass
class OptimizerTrace:
    evaluations: int = 0
    sweep_points: int = 0
    refinement_steps: int = 0
    boundary_faces: int = 0
    kink_candidates: int = 0
    notes: list[str] = field(default_factory=list)

    def note(self, text: str) -> None:
        if text not in self.notes:
            self.notes.append(text)


@dataclass(frozen=True)
class SegmentOptions:
    resolution: int = 200
    step_tol: float = 1e-6
    valuation: Valuation = Valuation.GRID
    max_sweep_points: int = 40_000
    p_bar: float = 1.0
    tie_tol: float = 1e-12
    seed: int = 0
    max_refine_evals: int = 40_000


@dataclass(frozen=True)
class AllocationResult:
    allocations: tuple[tuple[float, float], ...]
    distribution: WeightedDistribution
    value: float
    objective_value: float
    direction: Direction
    valuation: Valuation
    plan: SegmentPlan
    trace: OptimizerTrace


# ---------------------------------------------------------------- domain split

def _interval_slope(obj: Objective, lo: float, hi: float, points) -> Slope:
    if points is not None:
        shape = classify_slope(obj, points)
        if shape.is_mixed:
            raise ValueError(f"interval [{lo}, {hi}] is not slope-monotone on its grid points")
        return shape.kind
    mid = 0.5 * (lo + hi)
    g = second_derivative(obj, mid, (hi - lo) * 1e-4)
    if g < 0:
        return Slope.DECREASING
    if g > 0:
        return Slope.INCREASING
    shape = classify_slope(obj, np.linspace(lo, hi, 201))
    return Slope.INCREASING if shape.is_mixed else shape.kind


def segment_domain(
    obj: Objective,
    lo: float,
    hi: float,
    mode: Discrete | Continuous,
    breakpoints: Sequence[float] | None = None,
) -> SegmentPlan:
    """Split ``[lo, hi]`` at the objective's inflections into slope-pure intervals.

    ``breakpoints`` overrides the detected inflections. On a discrete grid an
    off-grid breakpoint leaves a gap: each side keeps only its own grid points.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    if isinstance(mode, Discrete):
        pts = [x for x in mode.grid if lo <= x <= hi]
        if breakpoints is None:
            shape = classify_slope(obj, pts)
            bounds = [pts[0], *shape.breakpoints, pts[-1]]
            intervals = []
            for k, kind in enumerate(shape.runs):
                sub = tuple(x for x in pts if bounds[k] <= x <= bounds[k + 1])
                intervals.append(Interval(sub[0], sub[-1], kind, sub))
            return SegmentPlan(tuple(intervals), obj)
        bounds = [pts[0], *sorted(b for b in breakpoints if pts[0] < b < pts[-1]), pts[-1]]
        intervals = []
        for a, b in zip(bounds, bounds[1:]):
            sub = tuple(x for x in pts if a <= x <= b)
            if not sub:
                continue
            intervals.append(Interval(sub[0], sub[-1], _interval_slope(obj, sub[0], sub[-1], sub), sub))
        return SegmentPlan(tuple(intervals), obj)

    if breakpoints is None:
        breakpoints = find_inflections(obj, lo, hi, mode)
    bounds = [lo, *sorted(b for b in breakpoints if lo < b < hi), hi]
    intervals = tuple(
        Interval(a, b, _interval_slope(obj, a, b, None), None) for a, b in zip(bounds, bounds[1:])
    )
    return SegmentPlan(intervals, obj)


# ---------------------------------------------------------------- inner rule

def _ratio_tol(iv: Interval) -> float:
    return rounding_tol((iv.lo, iv.hi)) * 64


def inner_extremal(
    interval: Interval,
    p_i: float,
    n_bar_i: float,
    obj: Objective,
    direction: Direction | str,
    valuation: Valuation | str = Valuation.GRID,
) -> tuple[float, WeightedDistribution]:
    """Best value and realizing fragment for one interval's share ``(p_i, n_bar_i)``."""
    direction = Direction.parse(direction)
    valuation = Valuation(valuation)
    tol = _ratio_tol(interval)
    if p_i <= 0.0:
        if abs(n_bar_i) > tol:
            raise RatioOutsideInterval(f"zero probability with nonzero moment {n_bar_i!r}")
        return 0.0, WeightedDistribution()
    r = n_bar_i / p_i
    if r < interval.lo - tol or r > interval.hi + tol:
        raise RatioOutsideInterval(f"ratio {r!r} outside [{interval.lo}, {interval.hi}]")
    n_bar_i = min(max(n_bar_i, interval.lo * p_i), interval.hi * p_i)
    r = min(max(r, interval.lo), interval.hi)

    if interval.rule(direction) == INTERIOR:
        if interval.points is None:
            return p_i * obj(r), WeightedDistribution.from_mapping({r: p_i})
        frag = interior_two_point(MomentProblem(interval.points, p_i, n_bar_i))
        if valuation is Valuation.CONTINUOUS:
            return p_i * obj(r), frag
        return frag.expectation(obj), frag

    if interval.points is not None:
        frag = endpoint_two_point(MomentProblem(interval.points, p_i, n_bar_i))
    elif interval.hi == interval.lo:
        frag = WeightedDistribution.from_mapping({interval.lo: p_i})
    else:
        frag = two_point(interval.lo, interval.hi, p_i, n_bar_i, rounding_tol((interval.lo, interval.hi)))
    return frag.expectation(obj), frag


# ---------------------------------------------------------------- outer problem

class _IntervalValue:
    """Vectorized contribution ``V_i(p, r)`` of one interval."""

    def __init__(self, iv: Interval, obj: Objective, direction: Direction, valuation: Valuation):
        self.iv = iv
        self.obj = obj
        self.rule = iv.rule(direction)
        self.continuous = valuation is Valuation.CONTINUOUS or iv.points is None
        if iv.points is not None:
            self.pts = np.asarray(iv.points, dtype=float)
            self.fpts = np.asarray(obj.many(self.pts), dtype=float)
        self.f_lo = float(obj(iv.lo))
        self.f_hi = float(obj(iv.hi))

    def __call__(self, p: np.ndarray, r: np.ndarray) -> np.ndarray:
        if self.rule == INTERIOR:
            if self.continuous:
                return p * self.obj.many(r)
            return p * np.interp(r, self.pts, self.fpts)
        lo, hi = self.iv.lo, self.iv.hi
        if hi == lo:
            return p * self.f_lo
        return p * ((hi - r) * self.f_lo + (r - lo) * self.f_hi) / (hi - lo)


class _Outer:
    """The allocation objective over the free coordinates.

    Every interval except ``elim`` contributes a probability coordinate and,
    unless pinned, a ratio coordinate. ``elim`` absorbs what is left of the
    totals and is feasible only if its implied ratio lands inside it.
    """

    def __init__(self, values, p_total, n_total, sign, elim=0, pins=None, trace=None):
        self.values = values
        self.ivs = [v.iv for v in values]
        self.p_total = p_total
        self.n_total = n_total
        self.sign = sign
        self.elim = elim
        self.pins = dict(pins or {})
        self.trace = trace
        self.layout = []  # (interval, "p" | "r")
        for i in range(len(values)):
            if i == elim:
                continue
            self.layout.append((i, "p"))
            if i not in self.pins:
                self.layout.append((i, "r"))
        self.lb = np.array([0.0 if c == "p" else self.ivs[i].lo for i, c in self.layout])
        self.ub = np.array([p_total if c == "p" else self.ivs[i].hi for i, c in self.layout])
        self.ptol = 1e-12 * max(1.0, p_total)
        self.ntol = rounding_tol((self.ivs[0].lo, self.ivs[-1].hi)) * 64

    @property
    def dim(self) -> int:
        return len(self.layout)

    def decode(self, z: np.ndarray):
        """Return (P, R) arrays of shape (M, s) and a feasibility mask."""
        z = np.atleast_2d(z)
        m, s = z.shape[0], len(self.ivs)
        P = np.zeros((m, s))
        R = np.zeros((m, s))
        for i, iv in enumerate(self.ivs):
            R[:, i] = self.pins.get(i, iv.lo)
        for col, (i, c) in enumerate(self.layout):
            (P if c == "p" else R)[:, i] = z[:, col]
        others = [i for i in range(s) if i != self.elim]
        pe = self.p_total - P[:, others].sum(axis=1)
        ne = self.n_total - (P[:, others] * R[:, others]).sum(axis=1)
        ive = self.ivs[self.elim]
        ok = pe >= -self.ptol
        empty = pe <= self.ptol
        with np.errstate(divide="ignore", invalid="ignore"):
            re = np.where(empty, ive.lo, ne / np.where(empty, 1.0, pe))
        ok &= np.where(empty, np.abs(ne) <= self.ntol, (re >= ive.lo - self.ntol) & (re <= ive.hi + self.ntol))
        P[:, self.elim] = np.where(empty, 0.0, pe)
        R[:, self.elim] = np.clip(re, ive.lo, ive.hi)
        return P, R, ok

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        """Signed objective (larger is better); infeasible points get -inf."""
        P, R, ok = self.decode(z)
        total = np.zeros(P.shape[0])
        for i, v in enumerate(self.values):
            Ri = np.where(ok, R[:, i], self.ivs[i].lo)
            total += v(P[:, i], Ri)
        if self.trace is not None:
            self.trace.evaluations += P.shape[0]
        return np.where(ok, self.sign * total, -np.inf)

    def allocation(self, z: np.ndarray) -> tuple[tuple[float, float], ...]:
        P, R, _ = self.decode(z)
        return tuple((float(p), float(p * r)) for p, r in zip(P[0], R[0]))


@dataclass
class _Best:
    value: float = -math.inf  # signed
    alloc: tuple[tuple[float, float], ...] | None = None
    tie_tol: float = 1e-12

    def offer(self, value: float, alloc) -> bool:
        if not math.isfinite(value):
            return False
        if self.alloc is None:
            self.value, self.alloc = value, alloc
            return True
        scale = max(1.0, abs(self.value))
        if value > self.value + self.tie_tol * scale:
            self.value, self.alloc = value, alloc
            return True
        if abs(value - self.value) <= self.tie_tol * scale:
            # near-ties: smaller probability in the last interval, then lexicographic
            if (alloc[-1][0], alloc) < (self.alloc[-1][0], self.alloc):
                self.value, self.alloc = max(value, self.value), alloc
                return True
        return False


def _sweep(outer: _Outer, resolution: int, max_points: int, rng) -> tuple[np.ndarray | None, float, int]:
    d = outer.dim
    if d == 0:
        z = np.zeros((1, 0))
        v = outer.evaluate(z)
        return (z[0], float(v[0]), 1) if np.isfinite(v[0]) else (None, -math.inf, 1)
    res = resolution if d <= 2 else max(3, int(max_points ** (1.0 / d)))
    if res**d <= max_points:
        axes = [np.linspace(outer.lb[k], outer.ub[k], res) for k in range(d)]
        Z = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    else:
        # too many axes for a lattice: sample ratios uniformly and probabilities
        # from a Dirichlet, so points mostly respect the budget
        count = max(1, max_points // 4)
        Z = outer.lb + (outer.ub - outer.lb) * rng.uniform(size=(count, d))
        p_cols = [col for col, (_, c) in enumerate(outer.layout) if c == "p"]
        shares = rng.dirichlet(np.ones(len(p_cols) + 1), size=count)[:, : len(p_cols)]
        Z[:, p_cols] = outer.p_total * shares
    best_z, best_v = None, -math.inf
    for chunk in range(0, Z.shape[0], 20_000):
        block = Z[chunk : chunk + 20_000]
        vals = outer.evaluate(block)
        k = int(np.argmax(vals))
        if vals[k] > best_v:
            best_v, best_z = float(vals[k]), block[k].copy()
    return best_z, best_v, Z.shape[0]


def _compass(outer: _Outer, z0: np.ndarray, step0: np.ndarray, step_tol: float, trace: OptimizerTrace,
             max_evals: int = 40_000):
    """Best-of-2d compass search; the step halves whenever no move improves."""
    z = z0.copy()
    fz = float(outer.evaluate(z)[0])
    step = step0.copy()
    d = outer.dim
    eye = np.eye(d)
    used = 0
    while step.max() >= step_tol:
        if used + 2 * d > max_evals:
            trace.note(f"compass refinement stopped at its {max_evals}-evaluation budget")
            break
        cand = np.clip(np.concatenate([z + eye * step, z - eye * step]), outer.lb, outer.ub)
        vals = outer.evaluate(cand)
        used += 2 * d
        k = int(np.argmax(vals))
        if vals[k] > fz:
            z, fz = cand[k], float(vals[k])
            trace.refinement_steps += 1
        else:
            step *= 0.5
    return z, fz


def _line_search(outer: _Outer, trace: OptimizerTrace, samples: int = 2001):
    """Global scan plus bounded Brent polish for a one-coordinate face."""
    xs = np.linspace(outer.lb[0], outer.ub[0], samples)
    vals = outer.evaluate(xs[:, None])
    k = int(np.argmax(vals))
    if not np.isfinite(vals[k]):
        return None, -math.inf
    lo_k = k - 1 if k > 0 and np.isfinite(vals[k - 1]) else k
    hi_k = k + 1 if k + 1 < samples and np.isfinite(vals[k + 1]) else k
    a, b = xs[lo_k], xs[hi_k]
    best_z, best_v = np.array([xs[k]]), float(vals[k])
    penalty = -best_v + 1e6 * (1.0 + abs(best_v))
    if b > a:
        def loss(t):
            v = float(outer.evaluate(np.array([[t]]))[0])
            return -v if math.isfinite(v) else penalty

        res = minimize_scalar(
            loss,
            bounds=(a, b),
            method="bounded",
            options={"xatol": 1e-13},
        )
        if np.isfinite(res.fun) and -res.fun > best_v:
            best_z, best_v = np.array([res.x]), float(-res.fun)
    trace.refinement_steps += 1
    return best_z, best_v


def _kink_candidates(values, p_total, n_total, sign, trace) -> list[tuple[float, tuple]]:
    """Every vertex of the piecewise-linear grid-valued problem.

    At most two intervals carry mass at an optimum, each at a grid ratio
    (or a single interval holds everything at ratio ``n_total / p_total``).
    """
    ivs = [v.iv for v in values]
    s = len(ivs)
    target = n_total / p_total
    out = []
    for i, iv in enumerate(ivs):
        if iv.lo - 1e-15 <= target <= iv.hi + 1e-15:
            t = min(max(target, iv.lo), iv.hi)
            val = float(values[i](np.array([p_total]), np.array([t]))[0])
            alloc = tuple((p_total, n_total) if j == i else (0.0, 0.0) for j in range(s))
            out.append((sign * val, alloc))
    for a in range(s):
        for b in range(a + 1, s):
            ra = np.asarray(ivs[a].points, dtype=float)[:, None]
            rb = np.asarray(ivs[b].points, dtype=float)[None, :]
            gap = rb - ra
            with np.errstate(divide="ignore", invalid="ignore"):
                pa = (rb * p_total - n_total) / gap
                pb = (n_total - ra * p_total) / gap
            ok = (gap > 0) & (pa >= 0) & (pb >= 0)
            ia, ib = np.nonzero(ok)
            trace.kink_candidates += int(ok.size)
            if ia.size == 0:
                continue
            pa_v, pb_v = pa[ia, ib], pb[ia, ib]
            ra_v, rb_v = ra[ia, 0], rb[0, ib]
            vals = values[a](pa_v, ra_v) + values[b](pb_v, rb_v)
            k = int(np.argmax(sign * vals))
            alloc = [(0.0, 0.0)] * s
            alloc[a] = (float(pa_v[k]), float(pa_v[k] * ra_v[k]))
            alloc[b] = (float(pb_v[k]), float(pb_v[k] * rb_v[k]))
            out.append((float(sign * vals[k]), tuple(alloc)))
    return out


def _signed_value(values, alloc, sign) -> float:
    total = 0.0
    for v, (p, n) in zip(values, alloc):
        if p > 0:
            r = min(max(n / p, v.iv.lo), v.iv.hi)
            total += float(v(np.array([p]), np.array([r]))[0])
    return sign * total


def allocate_optimize(
    plan: SegmentPlan,
    N_bar: float,
    direction: Direction | str,
    options: SegmentOptions | None = None,
) -> AllocationResult:
    options = options or SegmentOptions()
    direction = Direction.parse(direction)
    valuation = Valuation(options.valuation)
    obj = plan.objective
    if valuation is Valuation.CONTINUOUS and isinstance(obj, Tabulated):
        raise ValueError("continuous valuation needs an objective defined between grid points")
    p_total = float(options.p_bar)
    N_bar = float(N_bar)
    if not (plan.lo * p_total - 1e-12 <= N_bar <= plan.hi * p_total + 1e-12):
        raise NoFeasibleAllocation(f"N_bar={N_bar!r} outside [{plan.lo * p_total}, {plan.hi * p_total}]")
    N_bar = min(max(N_bar, plan.lo * p_total), plan.hi * p_total)

    sign = 1.0 if direction is Direction.MAX else -1.0
    trace = OptimizerTrace()
    s = len(plan.intervals)
    if s % 2 == 0 or plan.intervals[0].slope is not Slope.DECREASING:
        trace.note(
            f"{s} interval(s) starting with {plan.intervals[0].slope.value}: "
            "generalized per-interval dispatch"
        )
    values = [_IntervalValue(iv, obj, direction, valuation) for iv in plan.intervals]
    best = _Best(tie_tol=options.tie_tol)
    rng = np.random.default_rng(options.seed)

    # 1) coarse sweep and 2) compass refinement over the full parametrization
    outer = _Outer(values, p_total, N_bar, sign, elim=0, trace=trace)
    z, v, n = _sweep(outer, options.resolution, options.max_sweep_points, rng)
    trace.sweep_points += n
    if z is not None:
        best.offer(v, outer.allocation(z))
        if outer.dim:
            res = options.resolution if outer.dim <= 2 else max(3, int(options.max_sweep_points ** (1.0 / outer.dim)))
            step0 = (outer.ub - outer.lb) / max(res - 1, 1)
            z, v = _compass(outer, z, step0, options.step_tol, trace, options.max_refine_evals)
            best.offer(v, outer.allocation(z))

    # 3) faces where one interval's ratio sits on an end of its interval
    if s >= 2:
        # one shared budget for all 2s faces
        face_budget = max(250, options.max_sweep_points // (8 * s))
        for i, iv in enumerate(plan.intervals):
            for end in sorted({iv.lo, iv.hi}):
                face = _Outer(values, p_total, N_bar, sign, elim=1 if i == 0 else 0, pins={i: end}, trace=trace)
                trace.boundary_faces += 1
                if face.dim == 1:
                    fz, fv = _line_search(face, trace)
                else:
                    fz, fv, n = _sweep(face, max(3, options.resolution // 4), face_budget, rng)
                    trace.sweep_points += n
                    if fz is not None and face.dim:
                        step0 = (face.ub - face.lb) / max(options.resolution // 4 - 1, 1)
                        fz, fv = _compass(face, fz, step0, options.step_tol, trace, face_budget)
                if fz is not None:
                    best.offer(fv, face.allocation(fz))

    if plan.discrete and valuation is Valuation.GRID:
        for cv, alloc in _kink_candidates(values, p_total, N_bar, sign, trace):
            best.offer(cv, alloc)

    if best.alloc is None:
        raise NoFeasibleAllocation("no allocation satisfies the interval chain constraints")

    alloc = best.alloc
    fragments = []
    for iv, (p, n) in zip(plan.intervals, alloc):
        _, frag = inner_extremal(iv, p, n, obj, direction, valuation)
        fragments.append(frag)
    dist = WeightedDistribution()
    for frag in fragments:
        dist = dist.merge(frag)
    p_sum, n_sum = moments(dist)
    if abs(p_sum - p_total) > 1e-9 or abs(n_sum - N_bar) > 1e-9 * max(1.0, abs(N_bar)):
        raise ArithmeticError(f"assembled moments ({p_sum}, {n_sum}) miss ({p_total}, {N_bar})")

    done_plan = SegmentPlan(plan.intervals, obj, direction, alloc)
    return AllocationResult(
        allocations=alloc,
        distribution=dist,
        value=dist.expectation(obj),
        objective_value=sign * _signed_value(values, alloc, sign),
        direction=direction,
        valuation=valuation,
        plan=done_plan,
        trace=trace,
    )


def assemble(result: AllocationResult) -> WeightedDistribution:
    """Recombine the per-interval fragments of an optimized allocation."""
    plan = result.plan
    dist = WeightedDistribution()
    for iv, (p, n) in zip(plan.intervals, result.allocations):
        _, frag = inner_extremal(iv, p, n, plan.objective, result.direction, result.valuation)
        dist = dist.merge(frag)
    return dist


def segmented_extremal(problem: MomentProblem, obj: Objective, direction, options: SegmentOptions | None = None):
    """Segment ``problem``'s grid and optimize; convenience for grid problems."""
    options = options or SegmentOptions()
    if options.p_bar != problem.p_bar:
        options = SegmentOptions(**{**options.__dict__, "p_bar": problem.p_bar})
    if len(problem.grid) == 1:
        plan = SegmentPlan((Interval(problem.grid[0], problem.grid[0], Slope.INCREASING, problem.grid),), obj)
    else:
        plan = segment_domain(obj, problem.grid[0], problem.grid[-1], Discrete(problem.grid))
    return allocate_optimize(plan, problem.n_bar, direction, options)
