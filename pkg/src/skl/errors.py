"""Exception hierarchy shared by all modules."""


class SklError(Exception):
    """Base class for errors raised by this package."""


class DomainError(SklError, ValueError):
    """An argument lies outside the set where the quantity is defined."""


class ContractError(SklError, ValueError):
    """A request the underlying estimate does not cover, or a violated precondition."""


class NumericError(SklError, ArithmeticError):
    """A quadrature or fit failed to reach its tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class GeometryError(SklError):
    """A geometric witness (fat point, cone, ...) failed verification."""


class ConfigError(SklError, ValueError):
    """An experiment configuration failed validation; carries every violation."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
