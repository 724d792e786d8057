"""
Inefficiency of the equilibrium relative to the welfare optimum.

PoA      Psi(SW) / Psi(PNE)
eta_TRI  lambda_T(SW) / lambda_T(PNE)   (total review rate)
eta_LI   load(PNE) / load(SW)           (latency, load = sum_i a_i lambda_i)

The analytic upper bounds all hinge on x-bar, the maximiser of the incentive.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple

from src.models.errors import DegenerateMetricError
from src.models.game_core import (GameConfig, StrategyProfile, check_in_box, incentive_at,
                                  slackness, xbar)
from src.solvers.equilibrium import EquilibriumResult, run_brd
from src.solvers.welfare import WelfareSolution, optimize_welfare, welfare_value

logger = logging.getLogger(__name__)


@dataclass
class InefficiencyReport:
    poa: float
    tri: float
    li: float
    poa_bound: float
    tri_bound: float
    li_bound: float
    xbar: float
    precondition: bool
    x_pne: float
    x_sw: float
    psi_pne: float
    psi_sw: float
    welfare_floor: float

    @property
    def within_bounds(self) -> bool:
        return self.poa < self.poa_bound and self.tri < self.tri_bound and self.li < self.li_bound

    @property
    def floor_ok(self) -> bool:
        return self.psi_sw >= self.welfare_floor - 1e-9

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['within_bounds'] = self.within_bounds
        data['floor_ok'] = self.floor_ok
        return data


def bounds_precondition(config: GameConfig) -> bool:
    """min_i mu_i^S > mu_T^S h_N / (N (1 + h_N)): the bounds below are only guaranteed under it."""
    h_n = config.h[-1]
    return min(config.mu_s) > config.mu_t_s * h_n / (config.n * (1.0 + h_n))


def bounds(config: GameConfig) -> Dict[str, float]:
    """x-bar and the three analytic upper bounds; raises NoInteriorMaximizerError without an interior x-bar."""
    mu = config.mu_t_s
    peak = xbar(config)
    li_bound = mu / (mu - peak)
    return {
        'xbar': peak,
        'poa_bound': li_bound * config.a[-1],
        'tri_bound': li_bound * config.a[-1] / config.a[0],
        'li_bound': li_bound,
        'precondition': bounds_precondition(config),
    }


def welfare_floor(config: GameConfig) -> float:
    """
    mu_T^S r_s + ((mu_T^S - x-bar) / a_N) f_N(x-bar): the welfare of loading the
    pool to x-bar with every reviewer paying the largest penalty h_N. A lower
    bound on the optimal welfare whenever that load is reachable.
    """
    mu = config.mu_t_s
    peak = xbar(config)
    last = config.n - 1
    return mu * config.r_s + (mu - peak) / config.a[last] * incentive_at(config, peak, last)


def measure(config: GameConfig, pne: StrategyProfile, sw: StrategyProfile) -> InefficiencyReport:
    check_in_box(config, pne, tol=1e-9)
    check_in_box(config, sw, tol=1e-9)
    mu = config.mu_t_s
    x_pne = slackness(config, pne)
    x_sw = slackness(config, sw)
    load_pne = mu - x_pne
    load_sw = mu - x_sw
    total_pne = pne.total()
    if total_pne <= 0.0:
        raise DegenerateMetricError("total review rate at the equilibrium is zero; eta_TRI is undefined")
    if load_sw <= 0.0:
        raise DegenerateMetricError("welfare optimum has zero load; eta_LI is undefined")

    psi_pne = welfare_value(config, pne)
    psi_sw = welfare_value(config, sw)
    if psi_sw < psi_pne * (1 - 1e-9):
        logger.warning(f"welfare optimum {psi_sw:.12g} is below the equilibrium welfare {psi_pne:.12g}")

    limits = bounds(config)
    report = InefficiencyReport(
        poa=psi_sw / psi_pne,
        tri=sw.total() / total_pne,
        li=load_pne / load_sw,
        poa_bound=limits['poa_bound'],
        tri_bound=limits['tri_bound'],
        li_bound=limits['li_bound'],
        xbar=limits['xbar'],
        precondition=limits['precondition'],
        x_pne=x_pne,
        x_sw=x_sw,
        psi_pne=psi_pne,
        psi_sw=psi_sw,
        welfare_floor=welfare_floor(config),
    )
    if report.precondition and not report.within_bounds:
        logger.warning(f"metrics exceed their guaranteed bounds: {report.to_dict()}")
    return report


def analyze(config: GameConfig, initial: Optional[StrategyProfile] = None,
            tol_c: float = 1e-10, **brd_kwargs) -> Tuple[EquilibriumResult, WelfareSolution, InefficiencyReport]:
    """Solve the equilibrium and the welfare optimum, then compare them."""
    equilibrium = run_brd(config, initial, **brd_kwargs)
    optimum = optimize_welfare(config, tol_c=tol_c)
    report = measure(config, equilibrium.profile, optimum.profile)
    logger.debug(f"PoA {report.poa:.8f} (bound {report.poa_bound:.4f}), "
                 f"TRI {report.tri:.8f}, LI {report.li:.8f}")
    return equilibrium, optimum, report


def profile_gap(pne: StrategyProfile, sw: StrategyProfile) -> float:
    """Sup-norm distance between the equilibrium and the welfare-optimal profile."""
    return pne.sup_distance(sw)
