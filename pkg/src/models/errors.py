"""
Exception hierarchy for the CPR game toolkit.

Every failure raised by the library derives from CPRError so callers
(the CLI, the sweep runner) can separate domain failures from bugs.
"""

from typing import List, Optional, Sequence


class CPRError(Exception):
    """Base class for all toolkit errors."""


class StructuralError(CPRError, ValueError):
    """Dimension, index or strategy-box violation."""


class DerivativeUndefinedError(CPRError, ValueError):
    """Derivative requested on the p = 1 plateau (x <= 0)."""


class NoInteriorMaximizerError(CPRError):
    """The incentive slope has no sign change on (0, mu_T^S)."""


class ConvergenceError(CPRError):
    """Best response dynamics did not settle within max_iters."""

    def __init__(self, message: str, history: Optional[List[float]] = None,
                 last_profile: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.history = list(history or [])
        self.last_profile = list(last_profile) if last_profile is not None else None


class HomogeneityError(CPRError, ValueError):
    """Homogeneous closed form requested for a game that does not qualify."""


class DomainError(CPRError, ValueError):
    """Argument outside the operation's domain."""


class DegenerateMetricError(CPRError):
    """An inefficiency ratio would divide by zero."""


class SamplingError(CPRError):
    """Team rejection sampler ran out of budget."""


class OracleRefusalError(CPRError):
    """Brute-force oracle asked for too many players."""


class ConfigError(CPRError):
    """Run configuration could not be parsed or validated."""

    def __init__(self, message: str, field: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[int] = None):
        location = []
        if field:
            location.append(f"field '{field}'")
        if line is not None:
            location.append(f"line {line}" + (f", column {column}" if column is not None else ""))
        full = f"{message} ({'; '.join(location)})" if location else message
        super().__init__(full)
        self.field = field
        self.line = line
        self.column = column
