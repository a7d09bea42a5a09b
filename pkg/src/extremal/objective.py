"""Objective functions and their average-slope structure.

"Increasing average slope" is discrete convexity: every consecutive slope
difference on the grid is ``>= -SLOPE_TOL``. Decreasing is the mirror image.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from . import exprlang
from .errors import ExpressionDomainError, OutOfDomain

SLOPE_TOL = 1e-10


class Objective:
    """Base for objective kinds. Subclasses implement ``__call__``."""

    kind = "abstract"

    def __call__(self, x: float) -> float:  # pragma: no cover - abstract
        raise NotImplementedError

    def many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        return np.array([self(float(x)) for x in xs.ravel()], dtype=float).reshape(xs.shape)

    def describe(self) -> dict:  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class Tabulated(Objective):
    table: Mapping[float, float] = field(hash=False)
    kind = "table"

    @classmethod
    def from_values(cls, grid: Sequence[float], values: Sequence[float]) -> "Tabulated":
        if len(grid) != len(values):
            raise ValueError("grid and values differ in length")
        return cls({float(x): float(v) for x, v in zip(grid, values)})

    def __call__(self, x: float) -> float:
        try:
            return self.table[float(x)]
        except KeyError:
            raise OutOfDomain(f"tabulated objective has no value at {x!r}") from None

    def covers(self, grid: Sequence[float]) -> bool:
        return all(float(x) in self.table for x in grid)

    def describe(self) -> dict:
        return {"table": {repr(k): v for k, v in sorted(self.table.items())}}


@dataclass(frozen=True)
class Power(Objective):
    exponent: float
    kind = "builtin"

    def __call__(self, x: float) -> float:
        return exprlang._pow(float(x), float(self.exponent))

    def many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if float(self.exponent).is_integer() or np.all(xs >= 0):
            with np.errstate(over="ignore", divide="ignore"):
                return np.power(xs, float(self.exponent))
        return super().many(xs)

    def describe(self) -> dict:
        return {"builtin": {"name": "power", "exponent": self.exponent}}


@dataclass(frozen=True)
class MziF(Objective):
    """Interferometer QFI kernel ``n^2 / (1 + p0)``."""

    p0: float
    kind = "builtin"

    def __call__(self, x: float) -> float:
        return float(x) ** 2 / (1.0 + self.p0)

    def many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        return xs**2 / (1.0 + self.p0)

    def describe(self) -> dict:
        return {"builtin": {"name": "mzi", "p0": self.p0}}


@dataclass(frozen=True)
class LzjcF(Objective):
    """Per-Fock-level QFI of the Landau-Zener-Jaynes-Cummings sweep for the splitting Δ.

    ``f(n) = 16 π² δ² e^{-2πδ} / (Δ² (1 - e^{-2πδ}))`` with ``δ = Δ²(n+1)/(4v)``.
    Defined for real ``n > -1``.
    """

    v: float
    delta: float
    kind = "builtin"

    def __post_init__(self):
        if not self.v > 0:
            raise ValueError(f"sweep speed v must be positive, got {self.v!r}")
        if self.delta == 0:
            raise ValueError("level splitting delta must be nonzero")

    def _f(self, n):
        d = self.delta**2 * (n + 1.0) / (4.0 * self.v)
        a = 2.0 * np.pi * d
        return 16.0 * np.pi**2 * d**2 * np.exp(-a) / (self.delta**2 * -np.expm1(-a))

    def __call__(self, x: float) -> float:
        if not x > -1:
            raise OutOfDomain(f"LZ-JC objective needs n > -1, got {x!r}")
        return float(self._f(float(x)))

    def many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if np.any(xs <= -1):
            raise OutOfDomain("LZ-JC objective needs n > -1")
        return self._f(xs)

    def describe(self) -> dict:
        return {"builtin": {"name": "lzjc", "v": self.v, "delta": self.delta}}


@dataclass(frozen=True)
class Expression(Objective):
    text: str
    ast: exprlang.ExprAst = field(compare=False, repr=False, default=None)
    kind = "expression"

    def __post_init__(self):
        if self.ast is None:
            object.__setattr__(self, "ast", exprlang.parse(self.text))

    def __call__(self, x: float) -> float:
        return exprlang.eval_expr(self.ast, float(x))

    def many(self, xs) -> np.ndarray:
        out = exprlang.eval_many(self.ast, xs)
        if np.all(np.isfinite(out)):
            return out
        # let the scalar path raise the precise domain error (or return inf on overflow)
        return super().many(xs)

    def describe(self) -> dict:
        return {"expression": self.text}


ObjectiveSpec = Union[Tabulated, Power, MziF, LzjcF, Expression]

BUILTINS = {"power": Power, "mzi": MziF, "lzjc": LzjcF}


def builtin(name: str, **params) -> Objective:
    try:
        cls = BUILTINS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown builtin objective {name!r}; choose from {sorted(BUILTINS)}") from None
    return cls(**params)


def evaluate(obj: Objective, x: float) -> float:
    return obj(x)


# ---------------------------------------------------------------- slope shape

class Slope(enum.Enum):
    INCREASING = "IncreasingSlope"
    DECREASING = "DecreasingSlope"
    MIXED = "Mixed"


@dataclass(frozen=True)
class SlopeClass:
    """Classification result.

    For ``MIXED``, ``breakpoints`` are grid points splitting the domain into
    runs and ``runs`` holds the pure class of each run, lowest x first.
    """

    kind: Slope
    breakpoints: tuple[float, ...] = ()
    runs: tuple[Slope, ...] = ()

    @property
    def is_mixed(self) -> bool:
        return self.kind is Slope.MIXED


INCREASING = SlopeClass(Slope.INCREASING, (), (Slope.INCREASING,))
DECREASING = SlopeClass(Slope.DECREASING, (), (Slope.DECREASING,))


def slope_differences(values: Sequence[float], grid: Sequence[float]) -> np.ndarray:
    """Differences of consecutive chord slopes; entry i is centred on ``grid[i+1]``."""
    x = np.asarray(grid, dtype=float)
    f = np.asarray(values, dtype=float)
    slopes = np.diff(f) / np.diff(x)
    return np.diff(slopes)


def _signs(diffs: np.ndarray, tol: float) -> list[int]:
    raw = [1 if d > tol else (-1 if d < -tol else 0) for d in diffs]
    if not any(raw):
        return [1] * len(raw)
    # flat stretches take the class of the neighbour toward lower x;
    # a leading flat stretch has none and takes the first class to its right
    first = next(s for s in raw if s)
    out, prev = [], first
    for s in raw:
        prev = s or prev
        out.append(prev)
    return out


def classify_values(values: Sequence[float], grid: Sequence[float], tol: float = SLOPE_TOL) -> SlopeClass:
    if len(grid) <= 2:
        return INCREASING
    signs = _signs(slope_differences(values, grid), tol)
    runs = [signs[0]]
    breakpoints = []
    for i in range(len(signs) - 1):
        if signs[i] != signs[i + 1]:
            # triples i and i+1 are centred on grid[i+1] and grid[i+2]; keep the left one
            breakpoints.append(float(grid[i + 1]))
            runs.append(signs[i + 1])
    kinds = tuple(Slope.INCREASING if s > 0 else Slope.DECREASING for s in runs)
    if not breakpoints:
        return INCREASING if kinds[0] is Slope.INCREASING else DECREASING
    return SlopeClass(Slope.MIXED, tuple(breakpoints), kinds)


def classify_slope(obj: Objective, grid: Sequence[float], tol: float = SLOPE_TOL) -> SlopeClass:
    grid = [float(x) for x in grid]
    if len(grid) <= 2:
        return INCREASING
    return classify_values(obj.many(grid), grid, tol)


# ---------------------------------------------------------------- inflections

@dataclass(frozen=True)
class Discrete:
    grid: tuple[float, ...]

    def __init__(self, grid: Sequence[float]):
        object.__setattr__(self, "grid", tuple(float(x) for x in grid))


@dataclass(frozen=True)
class Continuous:
    samples: int = 2000


def second_derivative(obj: Objective, x: float, h: float) -> float:
    return (obj(x + h) - 2.0 * obj(x) + obj(x - h)) / (h * h)


def find_inflections(obj: Objective, lo: float, hi: float, mode: Discrete | Continuous) -> list[float]:
    """Inflection breakpoints of ``obj`` strictly inside ``(lo, hi)``.

    Discrete: grid points where the slope-difference sign flips (left point
    of the flipping pair). Continuous: roots of a central-difference second
    derivative, bracketed on a uniform scan and bisected to 1e-8.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    if isinstance(mode, Discrete):
        pts = [x for x in mode.grid if lo <= x <= hi]
        cls = classify_slope(obj, pts)
        return [b for b in cls.breakpoints if lo < b < hi]

    h = (hi - lo) * 1e-4
    xs = np.linspace(lo + h, hi - h, mode.samples)
    f = obj.many(np.concatenate([xs - h, xs, xs + h])).reshape(3, -1)
    g = (f[0] - 2.0 * f[1] + f[2]) / (h * h)
    noise = 64 * np.finfo(float).eps * float(np.max(np.abs(f))) / (h * h)
    s = np.where(g > noise, 1, np.where(g < -noise, -1, 0))

    roots = []
    last_idx, last_sign = None, 0
    for i, si in enumerate(s):
        if si == 0:
            continue
        if last_sign and si != last_sign:
            a, b = xs[last_idx], xs[i]
            ga = last_sign
            while b - a > 1e-8:
                mid = 0.5 * (a + b)
                gm = second_derivative(obj, mid, h)
                if abs(gm) <= noise:
                    a = b = mid
                    break
                if (gm > 0) == (ga > 0):
                    a = mid
                else:
                    b = mid
            roots.append(0.5 * (a + b))
        last_idx, last_sign = i, si
    return roots


def safe_eval(obj: Objective, x: float) -> float | None:
    try:
        v = obj(x)
    except (ExpressionDomainError, OutOfDomain):
        return None
    return v if math.isfinite(v) else None
