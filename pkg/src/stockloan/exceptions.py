"""Exception hierarchy shared by every module of the package."""


class StockLoanError(Exception):
    """Base class; ``kind`` is the machine-readable tag used by the CLI."""

    @property
    def kind(self) -> str:
        return type(self).__name__


class ParameterError(StockLoanError, ValueError):
    pass


class ConfigError(ParameterError):
    """Malformed config file or simulation configuration."""


class ArbitrageViolation(StockLoanError, ValueError):
    pass


class RegimeViolation(StockLoanError, ValueError):
    pass


class DomainError(StockLoanError, ValueError):
    pass


class GridError(StockLoanError, ValueError):
    pass


class NoBracket(StockLoanError, ValueError):
    pass


class NonConvergence(StockLoanError, RuntimeError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
