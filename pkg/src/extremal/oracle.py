"""Brute-force verification by vertex enumeration.

The feasible set {w >= 0, sum w = p_bar, sum x w = n_bar} is a polytope cut
by two equality constraints, so every vertex has at most two nonzero
weights. E[F] is linear in w, so its extremes are attained at vertices,
whatever the shape of F. Enumerating all singletons and pairs is therefore
exact, and shares no code with the theorem-based solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Direction, MomentProblem, WeightedDistribution, rounding_tol
from .objective import Objective

PAIR_GAP_MIN = 1e-12


@dataclass(frozen=True)
class OracleReport:
    best_value: float
    best_support: WeightedDistribution
    candidates_examined: int


def _singletons(problem: MomentProblem):
    tol = rounding_tol(problem.grid)
    return [i for i, x in enumerate(problem.grid) if abs(x * problem.p_bar - problem.n_bar) <= tol]


def enumerate_vertices(problem: MomentProblem):
    """Return ``(vertices, examined)``.

    Each vertex is ``(i, j, w_i, w_j)`` with ``j is None`` for singletons;
    ``examined`` counts all K(K-1)/2 pairs plus the matching singletons.
    """
    x = np.asarray(problem.grid, dtype=float)
    p, n = problem.p_bar, problem.n_bar
    tol = rounding_tol(problem.grid)
    out = [(i, None, p, 0.0) for i in _singletons(problem)]
    k = len(x)
    for i in range(k - 1):
        xj = x[i + 1 :]
        gap = xj - x[i]
        ok = gap >= PAIR_GAP_MIN
        wj = (n - x[i] * p) / gap
        wi = (xj * p - n) / gap
        ok &= (x[i] * p <= n + tol) & (xj * p >= n - tol)
        for off in np.nonzero(ok)[0]:
            out.append((i, i + 1 + int(off), max(float(wi[off]), 0.0), max(float(wj[off]), 0.0)))
    examined = k * (k - 1) // 2 + len(_singletons(problem))
    return out, examined


def _support(grid, i, j, wi, wj) -> tuple[float, ...]:
    if j is None or wj == 0.0:
        return (grid[i],)
    if wi == 0.0:
        return (grid[j],)
    return (grid[i], grid[j])


def lp_extremal(problem: MomentProblem, obj: Objective, direction: Direction | str) -> OracleReport:
    direction = Direction.parse(direction)
    grid = problem.grid
    x = np.asarray(grid, dtype=float)
    fx = np.asarray(obj.many(grid), dtype=float)
    p, n = problem.p_bar, problem.n_bar
    tol = rounding_tol(grid)
    sign = 1.0 if direction is Direction.MAX else -1.0

    best = None  # (value, support, (i, j, wi, wj))

    def offer(value, cand):
        nonlocal best
        support = _support(grid, *cand)
        # best by value; exact ties go to the lexicographically smallest support
        if best is None or sign * value > sign * best[0] or (value == best[0] and support < best[1]):
            best = (value, support, cand)

    singles = _singletons(problem)
    for i in singles:
        offer(p * fx[i], (i, None, p, 0.0))

    k = len(x)
    for i in range(k - 1):
        xj = x[i + 1 :]
        gap = xj - x[i]
        ok = (gap >= PAIR_GAP_MIN) & (x[i] * p <= n + tol) & (xj * p >= n - tol)
        if not ok.any():
            continue
        idx = np.nonzero(ok)[0]
        g = gap[idx]
        wj = np.maximum((n - x[i] * p) / g, 0.0)
        wi = np.maximum((xj[idx] * p - n) / g, 0.0)
        vals = wi * fx[i] + wj * fx[i + 1 + idx]
        r = int(np.argmax(sign * vals))  # first index wins ties within the row
        offer(float(vals[r]), (i, i + 1 + int(idx[r]), float(wi[r]), float(wj[r])))

    value, _, (i, j, wi, wj) = best
    pairs = [(grid[i], wi)] + ([(grid[j], wj)] if j is not None else [])
    examined = k * (k - 1) // 2 + len(singles)
    return OracleReport(float(value), WeightedDistribution.from_mapping(pairs), examined)


def vertex_distributions(problem: MomentProblem) -> list[WeightedDistribution]:
    vertices, _ = enumerate_vertices(problem)
    grid = problem.grid
    seen, out = set(), []
    for i, j, wi, wj in vertices:
        d = WeightedDistribution.from_mapping([(grid[i], wi)] + ([(grid[j], wj)] if j is not None else []))
        if d.pairs not in seen:
            seen.add(d.pairs)
            out.append(d)
    return out


def random_feasible(problem: MomentProblem, seed: int) -> WeightedDistribution:
    """A seeded random feasible distribution.

    Mixes between 3 and K distinct polytope vertices with uniform random
    weights; convex combinations keep both moment constraints.
    """
    rng = np.random.default_rng(seed)
    verts = vertex_distributions(problem)
    k = len(problem.grid)
    count = int(rng.integers(3, max(k, 3) + 1))
    count = min(count, len(verts))
    chosen = rng.choice(len(verts), size=count, replace=False)
    mix = rng.uniform(size=count)
    mix = mix / mix.sum()
    acc: dict[float, float] = {}
    for c, idx in zip(mix, sorted(int(v) for v in chosen)):
        for x, w in verts[idx].items():
            acc[x] = acc.get(x, 0.0) + float(c) * w
    return WeightedDistribution.from_mapping(acc)
