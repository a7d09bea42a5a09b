"""Metrology applications: interferometer QFI, LZ-JC cavity state, battery state.

States are described only by Fock weights ``p(n) = |<n|phi>|^2``; no
formula used here depends on amplitude phases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .core import Direction, MomentProblem, WeightedDistribution
from .errors import CapBelowMean, CapBelowSupport
from .objective import Discrete, LzjcF, Continuous, find_inflections
from .oracle import lp_extremal
from .segment import AllocationResult, SegmentOptions, Valuation, allocate_optimize, segment_domain
from .solver import adjacent_fock_distribution

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class PathSymmetricState:
    """Two-mode state C(|phi>|0> + |0>|phi>) given by the Fock weights of |phi>."""

    fock_weights: tuple[tuple[int, float], ...]

    def __init__(self, fock_weights: Mapping[int, float] | Iterable[tuple[int, float]]):
        items = fock_weights.items() if isinstance(fock_weights, Mapping) else fock_weights
        acc: dict[int, float] = {}
        for n, w in items:
            if float(n) != int(n) or int(n) < 0:
                raise ValueError(f"Fock level must be a non-negative integer, got {n!r}")
            if not w >= 0:
                raise ValueError(f"weight at level {n} is negative: {w!r}")
            acc[int(n)] = acc.get(int(n), 0.0) + float(w)
        total = math.fsum(acc.values())
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(f"Fock weights sum to {total!r}, not 1")
        object.__setattr__(self, "fock_weights", tuple(sorted((n, w) for n, w in acc.items() if w)))

    @property
    def p0(self) -> float:
        return dict(self.fock_weights).get(0, 0.0)

    @property
    def n_bar_total(self) -> float:
        return math.fsum(w * n for n, w in self.fock_weights) / (1.0 + self.p0)

    @property
    def max_level(self) -> int:
        return self.fock_weights[-1][0]

    @classmethod
    def noon(cls, n: int) -> "PathSymmetricState":
        return cls({n: 1.0})


@dataclass(frozen=True)
class LzjcModel:
    v: float
    delta: float
    truncation: int = 100

    def __post_init__(self):
        if not self.v > 0:
            raise ValueError(f"sweep speed v must be positive, got {self.v!r}")
        if self.truncation < 1:
            raise ValueError(f"truncation must be >= 1, got {self.truncation!r}")

    def delta_n(self, n: float) -> float:
        return self.delta**2 * (n + 1) / (4.0 * self.v)

    @property
    def objective(self) -> LzjcF:
        return LzjcF(self.v, self.delta)

    @property
    def grid(self) -> tuple[float, ...]:
        return tuple(float(n) for n in range(self.truncation + 1))


@dataclass(frozen=True)
class QfiReport:
    fisher_information: float
    crb: float
    n_bar: float

    @property
    def beats_sql(self) -> bool:
        return self.fisher_information > self.n_bar

    @property
    def beats_heisenberg(self) -> bool:
        return self.fisher_information > self.n_bar**2

    @classmethod
    def of(cls, fisher: float, n_bar: float) -> "QfiReport":
        return cls(fisher, 1.0 / fisher if fisher > 0 else math.inf, n_bar)


# ---------------------------------------------------------------- interferometer

def mzi_qfi(state: PathSymmetricState) -> QfiReport:
    fisher = math.fsum(w * n * n for n, w in state.fock_weights) / (1.0 + state.p0)
    return QfiReport.of(fisher, state.n_bar_total)


def mzi_optimal_state(n_bar: float, cap: int) -> tuple[PathSymmetricState, QfiReport]:
    """Vacuum plus level ``cap`` with weights (cap-n)/(cap+n) and 2n/(cap+n)."""
    if not n_bar > 0:
        raise ValueError(f"n_bar must be positive, got {n_bar!r}")
    if cap < n_bar:
        raise CapBelowMean(f"cap {cap} is below the mean photon number {n_bar}")
    p_cap = 2.0 * n_bar / (cap + n_bar)
    state = PathSymmetricState({0: (cap - n_bar) / (cap + n_bar), cap: p_cap})
    # closed form; mzi_qfi(state) agrees to rounding
    return state, QfiReport.of(cap * n_bar, float(n_bar))


def mzi_noon_gap(state: PathSymmetricState) -> float:
    """``n^2 - F`` at the state's own total photon number; never positive."""
    return state.n_bar_total**2 - mzi_qfi(state).fisher_information


def mzi_gap_to_optimal(state: PathSymmetricState, cap: int) -> float:
    """``F_O - F`` computed termwise as sum p(n) n/(1+p0) (cap - n); never negative."""
    if cap < state.max_level:
        raise CapBelowSupport(f"cap {cap} is below the highest occupied level {state.max_level}")
    if cap < state.n_bar_total:
        raise CapBelowMean(f"cap {cap} is below the mean photon number {state.n_bar_total}")
    return math.fsum(w * n / (1.0 + state.p0) * (cap - n) for n, w in state.fock_weights)


def mzi_sweep(n_bars: Sequence[float], cap: int) -> list[dict]:
    rows = []
    for n in n_bars:
        _, oi = mzi_optimal_state(n, cap)
        rows.append({"n_bar_total": float(n), "crb_noon": 1.0 / (n * n), "crb_oi": oi.crb})
    return rows


# ---------------------------------------------------------------- LZ-JC

def lzjc_f(n: float, model: LzjcModel) -> float:
    if n > model.truncation:
        raise ValueError(f"level {n} above the truncation {model.truncation}")
    return model.objective(n)


def lzjc_breakpoints(model: LzjcModel, breakpoint: str = "discrete") -> list[float] | None:
    """``None`` lets segmentation find the grid breakpoint; ``continuous`` uses the real inflection."""
    if breakpoint == "discrete":
        return None
    if breakpoint == "continuous":
        return find_inflections(model.objective, 0.0, float(model.truncation), Continuous())
    raise ValueError(f"breakpoint must be 'discrete' or 'continuous', got {breakpoint!r}")


def lzjc_optimal(
    model: LzjcModel,
    N_bar: float,
    valuation: Valuation | str = Valuation.CONTINUOUS,
    breakpoint: str = "discrete",
    options: SegmentOptions | None = None,
) -> tuple[WeightedDistribution, QfiReport, AllocationResult]:
    """Cavity Fock weights maximizing the QFI at mean photon number ``N_bar``.

    The reported Fisher information is the expectation of f over the returned
    grid distribution. Under ``continuous`` valuation the allocation itself is
    chosen with f evaluated between levels, so ``result.objective_value`` sits
    slightly above it.
    """
    if not 0 <= N_bar <= model.truncation:
        raise ValueError(f"N_bar must lie in [0, {model.truncation}], got {N_bar!r}")
    obj = model.objective
    grid = model.grid
    plan = segment_domain(obj, grid[0], grid[-1], Discrete(grid), lzjc_breakpoints(model, breakpoint))
    base = options or SegmentOptions()
    opts = SegmentOptions(**{**base.__dict__, "valuation": Valuation(valuation), "p_bar": 1.0})
    result = allocate_optimize(plan, N_bar, Direction.MAX, opts)
    return result.distribution, QfiReport.of(result.value, float(N_bar)), result


def lzjc_oracle_value(model: LzjcModel, N_bar: float) -> float:
    return lp_extremal(MomentProblem(model.grid, 1.0, float(N_bar)), model.objective, Direction.MAX).best_value


def lzjc_sweep(model: LzjcModel, N_bars: Sequence[float], **kwargs) -> list[dict]:
    rows = []
    for n in N_bars:
        _, report, _ = lzjc_optimal(model, n, **kwargs)
        rows.append(
            {
                "n_bar": float(n),
                "f_max": report.fisher_information,
                "beats_sql": report.beats_sql,
                "beats_heisenberg": report.beats_heisenberg,
            }
        )
    return rows


# ---------------------------------------------------------------- battery

def battery_optimal_state(n_bar: float) -> WeightedDistribution:
    """Squared amplitudes of the optimal cavity state: adjacent Fock levels around ``n_bar``."""
    return adjacent_fock_distribution(n_bar)
