"""Exception hierarchy for the afcs package."""


class AfcsError(Exception):
    """Base class for all errors raised by afcs."""


class SetTooLarge(AfcsError):
    pass


class DegreeTooLarge(AfcsError, ValueError):
    pass


class DimensionMismatch(AfcsError, ValueError):
    pass


class ZeroSignal(AfcsError, ValueError):
    pass


class NoisyInput(AfcsError, ValueError):
    pass


class AmbiguousMatch(AfcsError):
    """Two distinct neighbor subsets reproduce one residual within tolerance."""

    def __init__(self, row, subsets):
        self.row = row
        self.subsets = subsets
        super().__init__(f"row {row}: residual matches {len(subsets)} subsets {subsets}")


class DegreeTooLargeForExactEnumeration(AfcsError, ValueError):
    pass


class NumericalRange(AfcsError, ArithmeticError):
    pass


class NotAchieved(AfcsError):
    pass


class NotPerfectSquare(AfcsError, ValueError):
    pass


class ConfigError(AfcsError, ValueError):
    """Invalid experiment configuration; ``violations`` lists every problem found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ParseError(ConfigError):
    pass


class RangeError(ConfigError):
    pass
