"""Extremal expectations under a fixed budget and first moment."""

from .core import Branch, Direction, ExtremalResult, MomentProblem, WeightedDistribution, moments, validate_problem
from .objective import Expression, LzjcF, MziF, Power, Slope, Tabulated, builtin, classify_slope
from .oracle import lp_extremal
from .segment import SegmentOptions, Valuation, allocate_optimize, assemble, segment_domain, segmented_extremal
from .solver import adjacent_fock_distribution, extremal_expectation, split_distribution

__version__ = "0.1.0"

__all__ = [
    "Branch", "Direction", "ExtremalResult", "MomentProblem", "WeightedDistribution", "moments",
    "validate_problem", "Expression", "LzjcF", "MziF", "Power", "Slope", "Tabulated", "builtin",
    "classify_slope", "lp_extremal", "SegmentOptions", "Valuation", "allocate_optimize", "assemble",
    "segment_domain", "segmented_extremal", "adjacent_fock_distribution", "extremal_expectation",
    "split_distribution", "__version__",
]
