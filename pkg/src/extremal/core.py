"""Domain types and moment bookkeeping.

The first moment ``n_bar`` is always the *un-normalized* sum ``sum(x * w)``,
never the conditional mean ``n_bar / p_bar``.
"""

from __future__ import annotations

import enum
import math
import sys
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .errors import BudgetOutOfRange, EmptyDistribution, InfeasibleMean, NonMonotonicGrid


class Direction(enum.Enum):
    MAX = "max"
    MIN = "min"

    @classmethod
    def parse(cls, value: "Direction | str") -> "Direction":
        if isinstance(value, Direction):
            return value
        return cls(str(value).lower())


class Branch(enum.Enum):
    INTERIOR_TWO_POINT = "InteriorTwoPoint"
    ENDPOINT_TWO_POINT = "EndpointTwoPoint"
    SINGLETON = "Singleton"
    SEGMENTED = "Segmented"


def feasibility_tol(grid: Sequence[float]) -> float:
    """Absolute slack used when comparing a mean against ``x * p_bar`` products."""
    return 1e-12 * max(1.0, abs(grid[0]), abs(grid[-1]))


def rounding_tol(grid: Sequence[float]) -> float:
    """Rounding-level slack; products closer than this are treated as equal."""
    return 16 * sys.float_info.epsilon * max(1.0, abs(grid[0]), abs(grid[-1]))


@dataclass(frozen=True)
class MomentProblem:
    grid: tuple[float, ...]
    p_bar: float
    n_bar: float

    @property
    def size(self) -> int:
        return len(self.grid)

    @property
    def ratio(self) -> float:
        """Conditional mean ``n_bar / p_bar`` clamped onto ``[x_1, x_K]``."""
        r = self.n_bar / self.p_bar
        return min(max(r, self.grid[0]), self.grid[-1])


def validate_problem(grid: Iterable[float], p_bar: float, n_bar: float) -> MomentProblem:
    xs = tuple(float(x) for x in grid)
    if not xs:
        raise NonMonotonicGrid("grid must contain at least one point")
    if any(not math.isfinite(x) for x in xs):
        raise NonMonotonicGrid("grid points must be finite")
    for i in range(len(xs) - 1):
        if not xs[i] < xs[i + 1]:
            raise NonMonotonicGrid(
                f"grid must be strictly increasing: x[{i}]={xs[i]!r} >= x[{i + 1}]={xs[i + 1]!r}"
            )
    p_bar = float(p_bar)
    n_bar = float(n_bar)
    if not (0.0 < p_bar <= 1.0):
        raise BudgetOutOfRange(f"p_bar must lie in (0, 1], got {p_bar!r}")
    if not math.isfinite(n_bar):
        raise InfeasibleMean(f"n_bar must be finite, got {n_bar!r}")
    lo, hi = xs[0] * p_bar, xs[-1] * p_bar
    tol = feasibility_tol(xs)
    if n_bar < lo - tol or n_bar > hi + tol:
        raise InfeasibleMean(f"n_bar={n_bar!r} outside [{lo!r}, {hi!r}]")
    # boundary means force a point mass; snap rounding noise onto the bound
    n_bar = min(max(n_bar, lo), hi)
    return MomentProblem(xs, p_bar, n_bar)


@dataclass(frozen=True)
class WeightedDistribution:
    """Sparse, immutable map from support point to nonnegative weight.

    Points are kept sorted; exact-zero weights are dropped on construction.
    """

    pairs: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        for x, w in self.pairs:
            if not w >= 0.0:
                raise ValueError(f"negative or NaN weight {w!r} at {x!r}")

    @classmethod
    def from_mapping(cls, weights: Mapping[float, float] | Iterable[tuple[float, float]]) -> "WeightedDistribution":
        pairs = weights.items() if isinstance(weights, Mapping) else weights
        acc: dict[float, float] = {}
        for x, w in pairs:
            x, w = float(x), float(w)
            acc[x] = acc.get(x, 0.0) + w
        return cls(tuple(sorted((x, w) for x, w in acc.items() if w != 0.0)))

    @property
    def weights(self) -> dict[float, float]:
        return dict(self.pairs)

    @property
    def support(self) -> tuple[float, ...]:
        return tuple(x for x, _ in self.pairs)

    def items(self):
        return iter(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __bool__(self) -> bool:
        return bool(self.pairs)

    def __getitem__(self, x: float) -> float:
        return self.weights.get(float(x), 0.0)

    def scaled(self, c: float) -> "WeightedDistribution":
        return WeightedDistribution.from_mapping((x, c * w) for x, w in self.pairs)

    def merge(self, other: "WeightedDistribution") -> "WeightedDistribution":
        return WeightedDistribution.from_mapping(list(self.pairs) + list(other.pairs))

    def expectation(self, fn: Callable[[float], float]) -> float:
        return math.fsum(w * fn(x) for x, w in self.pairs)

    def close_to(self, other: "WeightedDistribution", tol: float = 1e-12) -> bool:
        a, b = self.weights, other.weights
        return all(abs(a.get(x, 0.0) - b.get(x, 0.0)) <= tol for x in set(a) | set(b))

    def __repr__(self) -> str:
        body = ", ".join(f"{x:g}: {w:.6g}" for x, w in self.pairs)
        return f"WeightedDistribution({{{body}}})"


def moments(dist: WeightedDistribution) -> tuple[float, float]:
    """Return ``(sum of weights, sum of x * weight)``."""
    if not dist:
        raise EmptyDistribution("distribution has no support")
    return math.fsum(w for _, w in dist.items()), math.fsum(x * w for x, w in dist.items())


@dataclass(frozen=True)
class ExtremalResult:
    distribution: WeightedDistribution
    value: float
    branch: Branch
    direction: Direction
