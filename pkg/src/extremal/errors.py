"""Exception hierarchy shared by every module."""


class ExtremalError(Exception):
    """Base class for all errors raised by this package."""


# input validation

class ProblemError(ExtremalError, ValueError):
    pass


class NonMonotonicGrid(ProblemError):
    pass


class BudgetOutOfRange(ProblemError):
    pass


class InfeasibleMean(ProblemError):
    pass


class EmptyDistribution(ExtremalError, ValueError):
    pass


# objectives

class OutOfDomain(ExtremalError, ValueError):
    pass


class ExpressionDomainError(ExtremalError, ArithmeticError):
    pass


class ParseError(ExtremalError, ValueError):
    """Raised for malformed expression text.

    ``offset`` is the byte offset of the first offending token and
    ``expected`` describes what the parser wanted there.
    """

    def __init__(self, offset: int, expected: str, message: str | None = None):
        self.offset = offset
        self.expected = expected
        super().__init__(message or f"at offset {offset}: expected {expected}")


class UnknownIdentifier(ParseError):
    def __init__(self, offset: int, name: str):
        self.name = name
        super().__init__(
            offset, "x, pi, e or a known function", f"at offset {offset}: unknown identifier {name!r}"
        )


# solver / segmentation

class MixedSlopeRequiresSegmentation(ExtremalError):
    """The objective is neither convex nor concave on the grid; use ``extremal.segment``."""

    def __init__(self, breakpoints):
        self.breakpoints = tuple(breakpoints)
        super().__init__(
            f"objective has mixed average slope (breakpoints {list(self.breakpoints)}); "
            "use the segmented solver"
        )


class NegativeMean(ExtremalError, ValueError):
    pass


class DegenerateSplit(ExtremalError):
    pass


class RatioOutsideInterval(ExtremalError, ValueError):
    pass


class NoFeasibleAllocation(ExtremalError):
    pass


# quantum

class CapBelowMean(ExtremalError, ValueError):
    pass


class CapBelowSupport(ExtremalError, ValueError):
    pass
