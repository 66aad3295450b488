"""
Exception hierarchy shared by the numerical apps.
"""


class WolffcapError(Exception):
    """Base class for every error raised by the toolkit."""


class InvalidFunctionError(WolffcapError):
    """A function evaluated to a non-finite value."""

    def __init__(self, t, value=None):
        self.t = t
        self.value = value
        super().__init__(f"invalid function: non-finite value {value!r} at t={t!r}")


class GrowthConditionError(WolffcapError):
    """The growth condition int_0^r t**(d-1)/phi(t) dt <= Lambda r**d / phi(r) fails."""

    def __init__(self, message="integral growth condition fails", r=None, ratio=None):
        self.r = r
        self.ratio = ratio
        super().__init__(message)


class RangeError(WolffcapError, ValueError):
    """A separation lies outside a tabulated range."""


class HypothesisError(WolffcapError, ValueError):
    """An operation was called outside the hypotheses it relies on."""


class ConvergenceError(WolffcapError):
    """An iterative method did not converge."""

    def __init__(self, message, residual=None, iterations=None):
        self.residual = residual
        self.iterations = iterations
        super().__init__(message)


class UnboundedLPError(WolffcapError):
    """The linear program has no finite optimum."""


class LPStallError(WolffcapError):
    """The simplex method exceeded its pivot budget."""

    def __init__(self, message, basis=None):
        self.basis = basis
        super().__init__(message)


class ConfigError(WolffcapError):
    """An experiment configuration file could not be read or validated."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")
