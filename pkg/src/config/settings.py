"""
Solver settings.

Layering: dataclass defaults, then environment variables (a local .env file
is honoured through python-dotenv), then the run config's `solver` section,
then command-line flags.
"""

import logging
import os
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, Optional

from dotenv import load_dotenv

from src.models.errors import ConfigError

logger = logging.getLogger(__name__)

SCHEDULES = ('sequential', 'simultaneous')


@dataclass(frozen=True)
class SolverSettings:
    """Tolerances and limits shared by every solve."""

    tol_brd: float = 1e-9
    tol_stat: float = 1e-11
    tol_verify: float = 1e-7
    max_iters: int = 10000
    schedule: str = 'sequential'
    relaxation: Optional[float] = None
    threads: int = 1
    validation_grid: int = 512

    def __post_init__(self):
        for name in ('tol_brd', 'tol_stat', 'tol_verify'):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)!r}", field=f'solver.{name}')
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be at least 1, got {self.max_iters}", field='solver.max_iters')
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"schedule must be one of {SCHEDULES}, got '{self.schedule}'",
                              field='solver.schedule')
        if self.relaxation is not None and not 0 < self.relaxation <= 1:
            raise ConfigError(f"relaxation must lie in (0, 1], got {self.relaxation}", field='solver.relaxation')
        if self.threads < 1:
            raise ConfigError(f"threads must be at least 1, got {self.threads}", field='solver.threads')
        if self.validation_grid < 10:
            raise ConfigError(f"validation_grid must be at least 10, got {self.validation_grid}",
                              field='solver.validation_grid')

    @classmethod
    def from_env(cls) -> 'SolverSettings':
        """Create settings from CPR_* environment variables"""
        load_dotenv()
        relaxation = os.getenv('CPR_RELAXATION')
        try:
            return cls(
                tol_brd=float(os.getenv('CPR_TOL_BRD', 1e-9)),
                tol_stat=float(os.getenv('CPR_TOL_STAT', 1e-11)),
                tol_verify=float(os.getenv('CPR_TOL_VERIFY', 1e-7)),
                max_iters=int(os.getenv('CPR_MAX_ITERS', 10000)),
                schedule=os.getenv('CPR_SCHEDULE', 'sequential').lower(),
                relaxation=float(relaxation) if relaxation else None,
                threads=int(os.getenv('CPR_THREADS', 1)),
                validation_grid=int(os.getenv('CPR_VALIDATION_GRID', 512)),
            )
        except ValueError as e:
            raise ConfigError(f"Invalid CPR_* environment variable: {e}")

    def merged(self, overrides: Dict[str, Any]) -> 'SolverSettings':
        """Copy with every non-None override applied."""
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ConfigError(f"Unknown solver setting(s): {sorted(unknown)}", field='solver')
        changes = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **changes) if changes else self

    def brd_kwargs(self) -> Dict[str, Any]:
        return {
            'schedule': self.schedule,
            'tol_brd': self.tol_brd,
            'max_iters': self.max_iters,
            'tol_stat': self.tol_stat,
            'relaxation': self.relaxation,
            'tol_verify': self.tol_verify,
        }

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
