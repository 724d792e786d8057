"""
Social welfare: evaluation, water-filling at a fixed load, and the global
optimum found by a golden-section search over the load c = sum_i a_i lambda_i.

For a fixed c the slackness x = mu_T^S - c is fixed, and welfare increases
with the total review rate, so the best allocation of c fills the cheapest
players (smallest a_i, i.e. smallest h_i) first.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from src.models.errors import DomainError, OracleRefusalError
from src.models.game_core import GameConfig, StrategyProfile, check_dimension, slackness
from src.solvers.equilibrium import symmetric_load_root
from src.solvers.scalar_search import golden_section_max

logger = logging.getLogger(__name__)

DEFAULT_TOL_C = 1e-10
BRUTE_FORCE_MAX_PLAYERS = 3
BRUTE_FORCE_MAX_GRID = 1000
BRUTE_FORCE_MAX_POINTS = 10 ** 8


@dataclass
class WelfareSolution:
    """
    Welfare-maximising profile. k_index is the 0-based h-order index of the
    partially filled player, or N when every player is saturated.
    """

    profile: StrategyProfile
    c_star: float
    psi_star: float
    k_index: int

    def to_dict(self, config: GameConfig) -> Dict:
        lam = list(self.profile.lambda_r)
        return {
            'c_star': self.c_star,
            'psi_star': self.psi_star,
            'k_index': self.k_index,
            'x': config.mu_t_s - self.c_star,
            'profile_h_order': lam,
            'profile_input_order': config.to_input_order(lam),
        }


def welfare_at(config: GameConfig, lambda_total: float, x: float) -> float:
    """Psi = (lambda_T + x) r_s + lambda_T r(x) (1 - p(x))."""
    model = config.return_model
    psi = (lambda_total + x) * config.r_s
    if x > 0.0:
        psi += lambda_total * model.r(x) * (1.0 - model.p(x))
    return psi


def welfare_value(config: GameConfig, profile: StrategyProfile) -> float:
    check_dimension(config, profile)
    return welfare_at(config, profile.total(), slackness(config, profile))


def _fill(config: GameConfig, c: float) -> Tuple[List[float], int]:
    remaining = c
    rates = [0.0] * config.n
    pivot = config.n
    for i, (a, cap) in enumerate(zip(config.a, config.mu_r)):
        full = a * cap
        if remaining >= full - 1e-15 * max(1.0, c):
            rates[i] = cap
            remaining = max(remaining - full, 0.0)
            continue
        rates[i] = remaining / a
        pivot = i
        break
    return rates, pivot


def waterfill(config: GameConfig, c: float) -> StrategyProfile:
    """Fill players in h-order up to mu_i^R until the load reaches c."""
    limit = config.max_load
    if not (math.isfinite(c) and -1e-12 * limit <= c <= limit * (1 + 1e-12)):
        raise DomainError(f"load c = {c!r} outside [0, {limit}]")
    rates, _ = _fill(config, min(max(c, 0.0), limit))
    return StrategyProfile.of(rates)


def optimize_welfare(config: GameConfig, tol_c: float = DEFAULT_TOL_C) -> WelfareSolution:
    """
    Maximise c -> Psi(waterfill(c)) over [0, min(sum a_i mu_i^R, mu_T^S + mu_T^R)].

    Golden-section rather than bisection: the map is unimodal but has kinks
    where a player saturates.
    """
    if not tol_c > 0.0:
        raise DomainError(f"tol_c must be positive, got {tol_c!r}")
    mu = config.mu_t_s
    c_max = min(config.max_load, mu + config.mu_t_r)

    def psi_of_load(c: float) -> float:
        rates, _ = _fill(config, c)
        return welfare_at(config, math.fsum(rates), mu - c)

    c_star, _ = golden_section_max(psi_of_load, 0.0, c_max, rel_tol=tol_c)
    rates, pivot = _fill(config, c_star)
    profile = StrategyProfile.of(rates)
    solution = WelfareSolution(profile=profile, c_star=c_star,
                               psi_star=welfare_value(config, profile), k_index=pivot)
    logger.debug(f"Welfare optimum c* = {c_star:.10g}, Psi* = {solution.psi_star:.10g}, pivot {pivot}")
    return solution


def _grid_welfare(config: GameConfig, axes: List[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    mesh = np.meshgrid(*axes, indexing='ij')
    total = np.zeros_like(mesh[0])
    load = np.zeros_like(mesh[0])
    for a, lam in zip(config.a, mesh):
        total += lam
        load += a * lam
    x = config.mu_t_s - load
    model = config.return_model
    psi = (total + x) * config.r_s + total * np.where(x > 0.0, model.r_array(x) * (1.0 - model.p_array(x)), 0.0)
    return mesh, psi


def brute_force_welfare(config: GameConfig, grid_per_dim: int,
                        refinements: int = 2) -> Tuple[StrategyProfile, float]:
    """
    Exhaustive grid maximisation of Psi over the strategy box (N <= 3).

    grid_per_dim ** N may not exceed BRUTE_FORCE_MAX_POINTS (10^8 points, about
    0.8 GB per float64 array), so three-player grids stop at 464 per dimension
    even though grid_per_dim itself may go up to 1000.

    Each refinement re-grids a box of one cell either side of the incumbent.
    Ties go to the lowest flat grid index.
    """
    n = config.n
    if n > BRUTE_FORCE_MAX_PLAYERS:
        raise OracleRefusalError(f"brute force welfare handles at most {BRUTE_FORCE_MAX_PLAYERS} players, got {n}")
    if not 2 <= grid_per_dim <= BRUTE_FORCE_MAX_GRID:
        raise DomainError(f"grid_per_dim must lie in [2, {BRUTE_FORCE_MAX_GRID}], got {grid_per_dim}")
    if grid_per_dim ** n > BRUTE_FORCE_MAX_POINTS:
        raise DomainError(f"{grid_per_dim}^{n} grid points is too many for the welfare oracle")

    lows = np.zeros(n)
    highs = np.asarray(config.mu_r, dtype=float)
    best_point = None
    best_value = -math.inf
    for _ in range(refinements + 1):
        axes = [np.linspace(lo, hi, grid_per_dim) for lo, hi in zip(lows, highs)]
        mesh, psi = _grid_welfare(config, axes)
        flat = int(np.argmax(psi))
        if psi.flat[flat] > best_value:
            best_value = float(psi.flat[flat])
            best_point = np.array([m.flat[flat] for m in mesh])
        steps = (highs - lows) / (grid_per_dim - 1)
        lows = np.maximum(best_point - steps, 0.0)
        highs = np.minimum(best_point + steps, np.asarray(config.mu_r, dtype=float))

    profile = StrategyProfile.of(best_point)
    return profile, welfare_value(config, profile)


def homogeneous_optimum(config: GameConfig, tol: float = 1e-11) -> Tuple[float, float]:
    """
    Welfare optimum of a team with a common h, where Psi depends on the
    profile only through lambda_T: the stationary point
    lambda_T = f(x) / ((1 + h) df/dx), capped at mu_T^R. Returns (lambda_T, x).
    """
    total, x = symmetric_load_root(config, copies=1.0, tol=tol)
    if total > config.mu_t_r:
        total = config.mu_t_r
        x = config.mu_t_s - (1.0 + config.h[0]) * total
    return total, x
