"""
Random heterogeneous teams for the Monte Carlo sweeps.

Each player's capacities are drawn as mu_i^S ~ Normal(mean_mu_s, rho) and
mu_i^R ~ Normal(mean_mu_r, rho). A team is accepted only if every value is
positive and mu_i^S <= mu_i^R for every player; otherwise the whole team is
redrawn.

Streams are counter based: a Philox generator keyed on (seed, rho, trial)
so a trial's team does not depend on which other trials ran, in what
order, or in which process.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from src.models.errors import ConfigError, DomainError, SamplingError
from src.models.game_core import DEFAULT_R_S, GameConfig
from src.models.return_models import MODEL_FAMILIES, ReturnModel, build_return_model

logger = logging.getLogger(__name__)

DEFAULT_RHO_GRID = tuple(round(0.05 * k, 10) for k in range(11))
DEFAULT_MAX_REDRAWS = 10 ** 6


@dataclass(frozen=True)
class SweepSpec:
    """
    Sampling protocol and solver inputs for one heterogeneity sweep.

    The default means (1 and 2) keep mu^S <= mu^R likely at every rho in the grid.
    """

    n_players: int = 6
    mean_mu_s: float = 1.0
    mean_mu_r: float = 2.0
    rho_grid: Tuple[float, ...] = DEFAULT_RHO_GRID
    trials_per_rho: int = 200
    seed: int = 2019
    model_family: str = 'exponential'
    model_params: Dict[str, float] = field(default_factory=lambda: {'A': 5.0, 'B': 0.5})
    r_s: float = DEFAULT_R_S
    max_redraws: int = DEFAULT_MAX_REDRAWS

    def __post_init__(self):
        if self.n_players < 1:
            raise ConfigError(f"n_players must be at least 1, got {self.n_players}", field='sweep.n_players')
        if not (self.mean_mu_s > 0 and self.mean_mu_r > 0):
            raise ConfigError("distribution means must be positive", field='sweep.mean_mu_s')
        if self.mean_mu_s > self.mean_mu_r:
            raise ConfigError(f"mean_mu_s = {self.mean_mu_s} exceeds mean_mu_r = {self.mean_mu_r}",
                              field='sweep.mean_mu_s')
        if self.trials_per_rho < 1:
            raise ConfigError(f"trials_per_rho must be at least 1, got {self.trials_per_rho}",
                              field='sweep.trials_per_rho')
        grid = list(self.rho_grid)
        if not grid:
            raise ConfigError("rho_grid is empty", field='sweep.rho_grid')
        if any(r < 0 for r in grid):
            raise ConfigError("rho values must be non-negative", field='sweep.rho_grid')
        if any(grid[k] >= grid[k + 1] for k in range(len(grid) - 1)):
            raise ConfigError("rho_grid must be strictly ascending", field='sweep.rho_grid')
        if self.model_family not in MODEL_FAMILIES:
            raise ConfigError(f"Unknown return model family '{self.model_family}'", field='sweep.model.family')
        if not self.r_s > 0:
            raise ConfigError(f"r_s must be positive, got {self.r_s}", field='sweep.r_s')
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}", field='sweep.seed')

    def return_model(self) -> ReturnModel:
        return build_return_model(self.model_family, **self.model_params)

    def to_dict(self) -> Dict:
        return {
            'n_players': self.n_players,
            'mean_mu_s': self.mean_mu_s,
            'mean_mu_r': self.mean_mu_r,
            'rho_grid': list(self.rho_grid),
            'trials_per_rho': self.trials_per_rho,
            'seed': self.seed,
            'model': {'family': self.model_family, **self.model_params},
            'r_s': self.r_s,
        }


def default_sweep_spec() -> SweepSpec:
    return SweepSpec()


def stream_for(seed: int, rho: float, trial_index: int) -> np.random.Generator:
    """Philox stream addressed by the seed, the bit pattern of rho and the trial index."""
    rho_bits = int(np.array(float(rho), dtype=np.float64).view(np.uint64))
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(rho_bits, int(trial_index)))
    return np.random.Generator(np.random.Philox(sequence))


def sample_team(spec: SweepSpec, rho: float, trial_index: int) -> GameConfig:
    """Draw the accepted team for (rho, trial_index)."""
    team, _ = draw_team(spec, rho, trial_index)
    return team


def draw_team(spec: SweepSpec, rho: float, trial_index: int) -> Tuple[GameConfig, int]:
    """
    Accepted team plus the number of draws it took. Attempt k uses the k-th
    2 x N block of standard normals from the trial's stream (row 0 service,
    row 1 review).
    """
    if not rho >= 0:
        raise DomainError(f"rho must be non-negative, got {rho!r}")
    if trial_index < 0:
        raise DomainError(f"trial_index must be non-negative, got {trial_index}")

    rng = stream_for(spec.seed, rho, trial_index)
    n = spec.n_players
    for attempt in range(spec.max_redraws):
        z = rng.standard_normal((2, n))
        mu_s = spec.mean_mu_s + rho * z[0]
        mu_r = spec.mean_mu_r + rho * z[1]
        if np.all(mu_s > 0.0) and np.all(mu_r > 0.0) and np.all(mu_s <= mu_r):
            if attempt:
                logger.debug(f"rho={rho} trial={trial_index}: accepted after {attempt + 1} draws")
            players = [(float(s), float(r)) for s, r in zip(mu_s, mu_r)]
            return GameConfig.create(players, r_s=spec.r_s, return_model=spec.return_model()), attempt + 1

    raise SamplingError(f"no acceptable team for rho={rho} trial={trial_index} "
                        f"after {spec.max_redraws} draws")
