"""
Core types and evaluation kernels for the heterogeneous-team CPR game.

Players choose a review admission rate lambda_i in [0, mu_i^R] and service
at the remaining capacity mu_i^S - h_i * lambda_i. Everything downstream
(incentives, utilities, welfare) depends on the joint profile only through
the slackness x = mu_T^S - sum_i a_i * lambda_i.

Players are always stored in ascending order of h_i = mu_i^S / mu_i^R;
GameConfig.order maps that canonical order back to the caller's order.
"""

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.models.errors import (DerivativeUndefinedError, DomainError,
                               NoInteriorMaximizerError, StructuralError)
from src.models.return_models import ExponentialModel, ReturnModel
from src.solvers.scalar_search import bracketed_root

logger = logging.getLogger(__name__)

DEFAULT_R_S = 1.0
DEFAULT_VALIDATION_GRID = 512
XBAR_TOL = 1e-14


@dataclass(frozen=True)
class PlayerParams:
    """Maximum service and review admission rates of one player."""

    mu_s: float
    mu_r: float

    def __post_init__(self):
        for name in ('mu_s', 'mu_r'):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise StructuralError(f"{name} must be a positive finite number, got {value!r}")

    @property
    def h(self) -> float:
        return self.mu_s / self.mu_r

    @property
    def a(self) -> float:
        return 1.0 + self.h


@dataclass(frozen=True)
class GameConfig:
    """
    A full game instance. Build it with GameConfig.create(), which sorts the
    players by h_i (stable, so ties keep input order) and attaches mu_T^S to
    the return model.
    """

    players: Tuple[PlayerParams, ...]
    r_s: float
    return_model: ReturnModel
    order: Tuple[int, ...]

    def __post_init__(self):
        if len(self.players) < 1:
            raise StructuralError("A game needs at least one player")
        if not (math.isfinite(self.r_s) and self.r_s > 0):
            raise StructuralError(f"r_s must be positive, got {self.r_s!r}")
        if sorted(self.order) != list(range(len(self.players))):
            raise StructuralError(f"order {self.order} is not a permutation of the players")
        hs = [p.h for p in self.players]
        if any(hs[k] > hs[k + 1] for k in range(len(hs) - 1)):
            raise StructuralError("players must be sorted by ascending h_i; use GameConfig.create()")
        if self.return_model.mu_t_s is None or not math.isclose(self.return_model.mu_t_s, self.mu_t_s,
                                                               rel_tol=1e-12, abs_tol=0.0):
            raise StructuralError("return model endpoint does not match the team's total service capacity")

    @classmethod
    def create(cls, players: Sequence[Union[PlayerParams, Tuple[float, float], Dict[str, float]]],
               r_s: float = DEFAULT_R_S,
               return_model: Optional[ReturnModel] = None) -> 'GameConfig':
        parsed = []
        for player in players:
            if isinstance(player, PlayerParams):
                parsed.append(player)
            elif isinstance(player, dict):
                parsed.append(PlayerParams(mu_s=player['mu_s'], mu_r=player['mu_r']))
            else:
                mu_s, mu_r = player
                parsed.append(PlayerParams(mu_s=mu_s, mu_r=mu_r))
        if not parsed:
            raise StructuralError("A game needs at least one player")

        order = tuple(sorted(range(len(parsed)), key=lambda k: parsed[k].h))
        ordered = tuple(parsed[k] for k in order)
        mu_t_s = math.fsum(p.mu_s for p in ordered)
        model = (return_model or ExponentialModel()).with_endpoint(mu_t_s)
        return cls(players=ordered, r_s=float(r_s), return_model=model, order=order)

    @classmethod
    def homogeneous(cls, n: int, mu_s: float, mu_r: float, r_s: float = DEFAULT_R_S,
                    return_model: Optional[ReturnModel] = None) -> 'GameConfig':
        return cls.create([(mu_s, mu_r)] * n, r_s=r_s, return_model=return_model)

    # derived quantities (h-order)

    @property
    def n(self) -> int:
        return len(self.players)

    @cached_property
    def h(self) -> Tuple[float, ...]:
        return tuple(p.h for p in self.players)

    @cached_property
    def a(self) -> Tuple[float, ...]:
        return tuple(p.a for p in self.players)

    @cached_property
    def mu_s(self) -> Tuple[float, ...]:
        return tuple(p.mu_s for p in self.players)

    @cached_property
    def mu_r(self) -> Tuple[float, ...]:
        return tuple(p.mu_r for p in self.players)

    @cached_property
    def mu_t_s(self) -> float:
        return math.fsum(p.mu_s for p in self.players)

    @cached_property
    def mu_t_r(self) -> float:
        return math.fsum(p.mu_r for p in self.players)

    @cached_property
    def max_load(self) -> float:
        """sum_i a_i * mu_i^R, the largest reachable value of sum_i a_i * lambda_i."""
        return math.fsum(a * m for a, m in zip(self.a, self.mu_r))

    def to_input_order(self, values: Sequence[float]) -> List[float]:
        """Map an h-ordered vector back to the order the players were given in."""
        out = [0.0] * self.n
        for k, original in enumerate(self.order):
            out[original] = values[k]
        return out

    def from_input_order(self, values: Sequence[float]) -> List[float]:
        return [values[original] for original in self.order]

    def to_dict(self) -> Dict:
        """Serialized form, players in the caller's input order."""
        players = [None] * self.n
        for k, original in enumerate(self.order):
            players[original] = {'mu_s': self.players[k].mu_s, 'mu_r': self.players[k].mu_r}
        return {'players': players, 'r_s': self.r_s, 'model': self.return_model.to_dict()}

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(payload.encode('utf-8')).hexdigest()[:16]


@dataclass(frozen=True)
class StrategyProfile:
    """Review admission rates lambda_i^R in h-order."""

    lambda_r: Tuple[float, ...]

    @classmethod
    def of(cls, values: Sequence[float]) -> 'StrategyProfile':
        return cls(lambda_r=tuple(float(v) for v in values))

    @classmethod
    def zeros(cls, n: int) -> 'StrategyProfile':
        return cls(lambda_r=(0.0,) * n)

    def __len__(self) -> int:
        return len(self.lambda_r)

    def __getitem__(self, i: int) -> float:
        return self.lambda_r[i]

    def replaced(self, i: int, value: float) -> 'StrategyProfile':
        values = list(self.lambda_r)
        values[i] = float(value)
        return StrategyProfile(lambda_r=tuple(values))

    def lambda_s(self, config: GameConfig) -> Tuple[float, ...]:
        """Service rates at full capacity: mu_i^S - h_i * lambda_i^R."""
        check_dimension(config, self)
        return tuple(m - h * lam for m, h, lam in zip(config.mu_s, config.h, self.lambda_r))

    def total(self) -> float:
        return math.fsum(self.lambda_r)

    def sup_distance(self, other: 'StrategyProfile') -> float:
        return max(abs(u - v) for u, v in zip(self.lambda_r, other.lambda_r))


@dataclass
class AssumptionFinding:
    assumption: str
    detail: str
    x: Optional[float] = None
    player: Optional[int] = None

    def to_dict(self) -> Dict:
        return {'assumption': self.assumption, 'detail': self.detail, 'x': self.x, 'player': self.player}


@dataclass
class ValidationReport:
    """Outcome of validate_assumptions; violations never raise."""

    grid_size: int
    violations: List[AssumptionFinding] = field(default_factory=list)
    notes: List[AssumptionFinding] = field(default_factory=list)
    a3_slack: List[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def violated(self, assumption: str) -> bool:
        return any(v.assumption == assumption for v in self.violations)

    @property
    def a3_ok(self) -> bool:
        return not self.violated('A3')

    def to_dict(self) -> Dict:
        return {
            'passed': self.passed,
            'grid_size': self.grid_size,
            'violations': [v.to_dict() for v in self.violations],
            'notes': [n.to_dict() for n in self.notes],
            'a3_slack': list(self.a3_slack),
        }


def check_dimension(config: GameConfig, profile: StrategyProfile) -> None:
    if len(profile) != config.n:
        raise StructuralError(f"profile has {len(profile)} entries, game has {config.n} players")


def check_index(config: GameConfig, i: int) -> None:
    if not 0 <= i < config.n:
        raise StructuralError(f"player index {i} out of range for {config.n} players")


def check_in_box(config: GameConfig, profile: StrategyProfile, tol: float = 1e-12) -> None:
    """Raise StructuralError unless 0 <= lambda_i <= mu_i^R for every player."""
    check_dimension(config, profile)
    for i, (lam, cap) in enumerate(zip(profile.lambda_r, config.mu_r)):
        if not math.isfinite(lam) or lam < -tol or lam > cap * (1 + tol) + tol:
            raise StructuralError(f"lambda_{i} = {lam!r} outside [0, {cap}]")


def slackness(config: GameConfig, profile: StrategyProfile) -> float:
    """x = mu_T^S - sum_i a_i * lambda_i; negative means the review pool is over-committed."""
    check_dimension(config, profile)
    return config.mu_t_s - math.fsum(a * lam for a, lam in zip(config.a, profile.lambda_r))


def _as_x(config: GameConfig, profile_or_x: Union[StrategyProfile, float]) -> float:
    if isinstance(profile_or_x, StrategyProfile):
        return slackness(config, profile_or_x)
    return float(profile_or_x)


def incentive_at(config: GameConfig, x: float, i: int) -> float:
    """f_i(x) = r(x) * (1 - p(x)) - h_i * r_s."""
    model = config.return_model
    penalty = config.h[i] * config.r_s
    if x <= 0.0:
        return -penalty
    return model.r(x) * (1.0 - model.p(x)) - penalty


def incentive(config: GameConfig, profile: StrategyProfile, i: int) -> float:
    check_index(config, i)
    return incentive_at(config, slackness(config, profile), i)


def incentive_slope(config: GameConfig, x: float) -> float:
    """df/dx; identical for every player because the h_i term is constant in x."""
    if x <= 0.0:
        raise DerivativeUndefinedError(f"df/dx is undefined on the p = 1 plateau (x = {x!r})")
    model = config.return_model
    return model.dr(x) * (1.0 - model.p(x)) - model.r(x) * model.dp(x)


def incentive_curvature(config: GameConfig, x: float) -> float:
    if x <= 0.0:
        raise DerivativeUndefinedError(f"d2f/dx2 is undefined on the p = 1 plateau (x = {x!r})")
    model = config.return_model
    return (model.d2r(x) * (1.0 - model.p(x)) - 2.0 * model.dr(x) * model.dp(x)
            - model.r(x) * model.d2p(x))


def incentive_dx(config: GameConfig, profile_or_x: Union[StrategyProfile, float], i: int) -> Tuple[float, float]:
    """
    (df_i/dx, d2f_i/dx2) at the profile's slackness (or at a raw x).

    The derivative with respect to player i's own rate is -a_i * df/dx.
    """
    check_index(config, i)
    x = _as_x(config, profile_or_x)
    return incentive_slope(config, x), incentive_curvature(config, x)


def utility_at(config: GameConfig, x: float, lam_i: float, i: int) -> float:
    return config.mu_s[i] * config.r_s + lam_i * incentive_at(config, x, i)


def expected_utility(config: GameConfig, profile: StrategyProfile, i: int) -> float:
    """u~_i = mu_i^S * r_s + lambda_i * f_i(x)."""
    check_index(config, i)
    return utility_at(config, slackness(config, profile), profile[i], i)


def interaction_term(config: GameConfig, profile: StrategyProfile, i: int) -> float:
    """sigma_i = sum_{j != i} a_j * lambda_j, the only way others affect player i."""
    return math.fsum(a * lam for j, (a, lam) in enumerate(zip(config.a, profile.lambda_r)) if j != i)


def upper_admissible_rate(config: GameConfig, profile: StrategyProfile, i: int) -> float:
    """Largest own rate keeping x >= 0 given the others, clipped to [0, mu_i^R]."""
    check_index(config, i)
    check_dimension(config, profile)
    bound = (config.mu_t_s - interaction_term(config, profile, i)) / config.a[i]
    return min(config.mu_r[i], max(bound, 0.0))


def a3_holds(config: GameConfig) -> bool:
    """Every player has a positive incentive when reviewing alone at full rate."""
    return all(incentive_at(config, config.mu_t_s - config.a[i] * config.mu_r[i], i) > 0.0
               for i in range(config.n))


@lru_cache(maxsize=4096)
def xbar(config: GameConfig) -> float:
    """
    Unique maximiser of the incentive over (0, mu_T^S): the root of the
    strictly decreasing map x -> df/dx.
    """
    mu = config.mu_t_s
    eps = 1e-9 * mu
    lo, hi = eps, mu - eps
    slope_lo = incentive_slope(config, lo)
    slope_hi = incentive_slope(config, hi)
    if not (slope_lo > 0.0 and slope_hi < 0.0):
        raise NoInteriorMaximizerError(
            f"df/dx has no sign change on ({lo:.3g}, {hi:.3g}): slopes {slope_lo:.6g}, {slope_hi:.6g}")
    return bracketed_root(lambda x: incentive_slope(config, x), lo, hi, xtol=XBAR_TOL)


def validate_assumptions(config: GameConfig, grid_size: int = DEFAULT_VALIDATION_GRID) -> ValidationReport:
    """
    Check (A1)-(A3) on a uniform grid over [0, mu_T^S].

    A1: r(mu_T^S) = 0, r' < 0 and negative second differences.
    A2: p non-increasing and convex on (0, mu_T^S], p -> 1 at 0+, p = 1 for x <= 0.
    A3: f_i(mu_T^S - a_i * mu_i^R) > 0 for every player.
    """
    if grid_size < 10:
        raise DomainError(f"grid_size must be at least 10, got {grid_size}")

    model = config.return_model
    mu = config.mu_t_s
    report = ValidationReport(grid_size=grid_size)
    grid = np.linspace(0.0, mu, grid_size)

    # A1
    r_end = model.r(mu)
    if abs(r_end) > 1e-12 * max(1.0, abs(model.r(0.0))):
        report.violations.append(AssumptionFinding('A1', f"r(mu_T^S) = {r_end!r}, expected 0", x=mu))
    r_vals = model.r_array(grid)
    slopes = np.array([model.dr(float(x)) for x in grid])
    bad = np.flatnonzero(~(slopes < 0.0))
    if bad.size:
        k = int(bad[0])
        report.violations.append(AssumptionFinding(
            'A1', f"r is not strictly decreasing: r'(x) = {slopes[k]:.6g}", x=float(grid[k])))
    second = r_vals[:-2] - 2.0 * r_vals[1:-1] + r_vals[2:]
    bad = np.flatnonzero(~(second < 0.0))
    if bad.size:
        k = int(bad[0]) + 1
        report.violations.append(AssumptionFinding(
            'A1', f"r is not strictly concave: second difference {second[k - 1]:.3g}", x=float(grid[k])))

    # A2 on the open-left grid (0, mu]
    inner = grid[1:]
    p_vals = model.p_array(inner)
    scale = 1e-12
    rises = np.flatnonzero(np.diff(p_vals) > scale)
    if rises.size:
        k = int(rises[0])
        report.violations.append(AssumptionFinding(
            'A2', f"p increases between x = {inner[k]:.6g} and {inner[k + 1]:.6g}", x=float(inner[k + 1])))
    p_second = p_vals[:-2] - 2.0 * p_vals[1:-1] + p_vals[2:]
    bends = np.flatnonzero(p_second < -scale)
    if bends.size:
        k = int(bends[0]) + 1
        report.violations.append(AssumptionFinding(
            'A2', f"p is not convex: second difference {p_second[k - 1]:.3g}", x=float(inner[k])))
    near_zero = 1e-9 * mu
    if abs(model.p(near_zero) - 1.0) > 1e-6:
        report.violations.append(AssumptionFinding(
            'A2', f"p(0+) = {model.p(near_zero)!r} does not approach 1", x=near_zero))
    for x_plateau in (0.0, -mu):
        if model.p(x_plateau) != 1.0:
            report.violations.append(AssumptionFinding(
                'A2', f"p({x_plateau:.6g}) = {model.p(x_plateau)!r}, expected 1 on x <= 0", x=x_plateau))

    # A3 plus the two design conditions that make it easy to satisfy
    for i in range(config.n):
        x_alone = mu - config.a[i] * config.mu_r[i]
        report.a3_slack.append(x_alone)
        f_alone = incentive_at(config, x_alone, i)
        if not f_alone > 0.0:
            report.violations.append(AssumptionFinding(
                'A3', f"f_{i}(mu_T^S - a_i mu_i^R) = {f_alone:.6g} <= 0", x=x_alone, player=i))
        if x_alone > 0.0 and not model.r(x_alone) > config.r_s:
            report.notes.append(AssumptionFinding(
                'A3-design', f"r at the solo-review slack does not exceed r_s ({model.r(x_alone):.6g})",
                x=x_alone, player=i))
        if config.mu_s[i] > config.mu_r[i]:
            report.notes.append(AssumptionFinding(
                'A3-design', f"mu_s = {config.mu_s[i]:.6g} exceeds mu_r = {config.mu_r[i]:.6g}", player=i))

    if report.violations:
        logger.debug(f"Assumption check found {len(report.violations)} violation(s)")
    return report
