"""
Pure Nash equilibrium solver.

Each player's best response depends on the others only through the
aggregate sigma_i = sum_{j != i} a_j * lambda_j, so the solver works in
terms of sigma_i and the slackness x. Best response dynamics iterate those
maps to the unique PNE, which verify_pne then checks against its
first-order characterization and the h-ordered structure.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.models.errors import (ConvergenceError, DomainError, HomogeneityError,
                               StructuralError)
from src.models.game_core import (GameConfig, StrategyProfile, a3_holds, check_dimension,
                                  check_in_box, check_index, incentive_at, incentive_slope,
                                  slackness, utility_at, xbar)
from src.solvers.scalar_search import bracketed_root

logger = logging.getLogger(__name__)

DEFAULT_TOL_BRD = 1e-9
DEFAULT_TOL_STAT = 1e-11
DEFAULT_TOL_VERIFY = 1e-7
DEFAULT_MAX_ITERS = 10000
ROOT_XTOL = 1e-13


class Schedule(str, Enum):
    SEQUENTIAL = 'sequential'
    SIMULTANEOUS = 'simultaneous'

    @classmethod
    def parse(cls, value: Union[str, 'Schedule']) -> 'Schedule':
        if isinstance(value, Schedule):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"Unknown schedule '{value}' (expected 'sequential' or 'simultaneous')")


class BestResponseTag(str, Enum):
    DROP_OUT = 'DropOut'
    INTERIOR = 'Interior'
    SATURATED = 'Saturated'


@dataclass(frozen=True)
class BestResponseCase:
    """
    One player's best response. stationarity_residual is g(value) with
    g(lambda) = f_i + lambda * df_i/dlambda; it is ~0 for Interior, >= 0 for
    Saturated and equals f_i(x) <= 0 for DropOut.
    """

    tag: BestResponseTag
    value: float
    stationarity_residual: float

    def to_dict(self) -> Dict:
        return {'tag': self.tag.value, 'value': self.value, 'stationarity_residual': self.stationarity_residual}


@dataclass
class PneReport:
    """Per-check outcome of verify_pne. Findings never raise."""

    x: float
    slope: Optional[float]
    tol: float
    checks: Dict[str, bool] = field(default_factory=dict)
    findings: List[str] = field(default_factory=list)
    deviation_gains: List[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @property
    def max_deviation_gain(self) -> float:
        return max(self.deviation_gains) if self.deviation_gains else 0.0

    def to_dict(self) -> Dict:
        return {
            'passed': self.passed,
            'x': self.x,
            'slope': self.slope,
            'tol': self.tol,
            'checks': dict(self.checks),
            'findings': list(self.findings),
            'deviation_gains': list(self.deviation_gains),
            'max_deviation_gain': self.max_deviation_gain,
        }


@dataclass
class EquilibriumResult:
    profile: StrategyProfile
    iterations: int
    sup_norm_history: List[float]
    schedule: Schedule
    verification: PneReport
    cases: Tuple[BestResponseCase, ...] = ()

    @property
    def x(self) -> float:
        return self.verification.x

    def to_dict(self, config: GameConfig) -> Dict:
        lam = list(self.profile.lambda_r)
        return {
            'profile_h_order': lam,
            'profile_input_order': config.to_input_order(lam),
            'x': self.x,
            'incentives_h_order': [incentive_at(config, self.x, i) for i in range(config.n)],
            'iterations': self.iterations,
            'schedule': self.schedule.value,
            'sup_norm_history': list(self.sup_norm_history),
            'cases': [c.to_dict() for c in self.cases],
            'verification': self.verification.to_dict(),
        }


@dataclass
class MultiStartResult:
    results: List[EquilibriumResult]
    seed: int

    @property
    def max_pairwise_gap(self) -> float:
        gaps = [u.profile.sup_distance(v.profile) for u, v in itertools.combinations(self.results, 2)]
        return max(gaps) if gaps else 0.0

    @property
    def best(self) -> EquilibriumResult:
        return self.results[0]


@lru_cache(maxsize=4096)
def incentive_roots(config: GameConfig, i: int) -> Optional[Tuple[float, float]]:
    """
    (gamma_1, gamma_2): the zeros of f_i on either side of x-bar, or None
    when f_i(x-bar) <= 0 and player i never has a reason to review.
    """
    check_index(config, i)
    peak = xbar(config)
    if incentive_at(config, peak, i) <= 0.0:
        return None
    mu = config.mu_t_s
    f = lambda x: incentive_at(config, x, i)  # noqa: E731
    # f(0) = f(mu) = -h_i * r_s < 0
    gamma_1 = bracketed_root(f, 0.0, peak, xtol=ROOT_XTOL)
    gamma_2 = bracketed_root(f, peak, mu, xtol=ROOT_XTOL)
    return gamma_1, gamma_2


def _sigma_from(config: GameConfig, lambda_minus_i: Union[StrategyProfile, Sequence[float]], i: int) -> float:
    """Accepts either a full profile (own entry ignored) or the N-1 others in h-order."""
    values = list(lambda_minus_i.lambda_r if isinstance(lambda_minus_i, StrategyProfile) else lambda_minus_i)
    if len(values) == config.n - 1:
        values.insert(i, 0.0)
    elif len(values) != config.n:
        raise StructuralError(f"expected {config.n - 1} or {config.n} rates, got {len(values)}")
    for j, (lam, cap) in enumerate(zip(values, config.mu_r)):
        if j == i:
            continue
        if not math.isfinite(lam) or lam < 0.0 or lam > cap * (1 + 1e-12):
            raise StructuralError(f"lambda_{j} = {lam!r} outside [0, {cap}]")
    return math.fsum(a * lam for j, (a, lam) in enumerate(zip(config.a, values)) if j != i)


def best_response_to_sigma(config: GameConfig, sigma: float, i: int,
                           tol_stat: float = DEFAULT_TOL_STAT) -> BestResponseCase:
    """Best response of player i when the others load the pool by sigma."""
    a_i = config.a[i]
    cap = config.mu_r[i]
    x_top = config.mu_t_s - sigma  # slackness with lambda_i = 0
    upper = min(cap, max(x_top / a_i, 0.0))

    def stationarity(lam: float) -> float:
        x = x_top - a_i * lam
        if x <= 0.0:
            return incentive_at(config, x, i)
        return incentive_at(config, x, i) - lam * a_i * incentive_slope(config, x)

    drop_out = BestResponseCase(BestResponseTag.DROP_OUT, 0.0, incentive_at(config, x_top, i))
    if upper <= 0.0:
        return drop_out
    roots = incentive_roots(config, i)
    if roots is None:
        return drop_out
    gamma_1, gamma_2 = roots
    x_bottom = x_top - a_i * upper
    if x_top <= gamma_1 or x_bottom >= gamma_2:
        return drop_out

    # f_i > 0 exactly for lambda in (lam_enter, lam_exit)
    lam_enter = (x_top - min(x_top, gamma_2)) / a_i
    lam_exit = min(upper, (x_top - max(x_bottom, gamma_1)) / a_i)

    g_exit = stationarity(lam_exit)
    if g_exit >= 0.0:
        if lam_exit >= cap * (1 - 1e-15):
            return BestResponseCase(BestResponseTag.SATURATED, cap, g_exit)
        if lam_exit <= 0.0:
            return drop_out
        return BestResponseCase(BestResponseTag.INTERIOR, lam_exit, g_exit)

    # utility is strictly concave where x < x-bar and f_i > 0
    lam_low = max(lam_enter, max(0.0, (x_top - xbar(config)) / a_i))
    lam_low = min(lam_low, lam_exit)
    value = bracketed_root(stationarity, lam_low, lam_exit, xtol=max(tol_stat * 1e-3, 1e-15))
    value = min(max(value, 0.0), cap)
    if value <= 0.0:
        return drop_out
    return BestResponseCase(BestResponseTag.INTERIOR, value, stationarity(value))


def best_response(config: GameConfig, lambda_minus_i: Union[StrategyProfile, Sequence[float]], i: int,
                  tol_stat: float = DEFAULT_TOL_STAT) -> BestResponseCase:
    """
    Unique maximiser of player i's expected utility given the others' rates.

    lambda_minus_i is either a full StrategyProfile (player i's own entry is
    ignored) or the N-1 other rates in h-order.
    """
    check_index(config, i)
    sigma = _sigma_from(config, lambda_minus_i, i)
    return best_response_to_sigma(config, sigma, i, tol_stat)


def best_response_curve(config: GameConfig, i: int, sigma_grid: Sequence[float],
                        tol_stat: float = DEFAULT_TOL_STAT) -> np.ndarray:
    """b_i as a function of the aggregate sigma_i; non-increasing in sigma."""
    check_index(config, i)
    return np.array([best_response_to_sigma(config, float(s), i, tol_stat).value for s in sigma_grid])


def deviation_gains(config: GameConfig, profile: StrategyProfile,
                    tol_stat: float = DEFAULT_TOL_STAT) -> List[float]:
    """u_i(b_i, lambda_-i) - u_i(lambda) for every player."""
    check_in_box(config, profile)
    gains = []
    for i in range(config.n):
        sigma = _sigma_from(config, profile, i)
        x_top = config.mu_t_s - sigma
        current = utility_at(config, x_top - config.a[i] * profile[i], profile[i], i)
        response = best_response_to_sigma(config, sigma, i, tol_stat).value
        best = utility_at(config, x_top - config.a[i] * response, response, i)
        gains.append(best - current)
    return gains


def grid_deviation_gains(config: GameConfig, profile: StrategyProfile, grid_points: int) -> List[float]:
    """
    Largest utility gain available to each player over a uniform grid of its
    strategy box, others held fixed. Independent of the best-response solver.
    """
    if grid_points < 2:
        raise DomainError(f"grid_points must be at least 2, got {grid_points}")
    check_in_box(config, profile)
    model = config.return_model
    gains = []
    for i in range(config.n):
        x_top = config.mu_t_s - _sigma_from(config, profile, i)
        grid = np.linspace(0.0, config.mu_r[i], grid_points)
        x = x_top - config.a[i] * grid
        reward = np.where(x > 0.0, model.r_array(x) * (1.0 - model.p_array(x)), 0.0)
        utility = config.mu_s[i] * config.r_s + grid * (reward - config.h[i] * config.r_s)
        current = utility_at(config, x_top - config.a[i] * profile[i], profile[i], i)
        gains.append(float(np.max(utility)) - current)
    return gains


def verify_pne(config: GameConfig, profile: StrategyProfile, tol: float = DEFAULT_TOL_VERIFY) -> PneReport:
    """
    Check a profile against the equilibrium characterization:

    slope_positive   df/dx(x*) > 0
    dropout          lambda_i = 0 exactly when f_i(x*) <= tol
    stationarity     lambda_i = f_i / (a_i df/dx) for reviewers, unless saturated
    structure        a_i lambda_i and lambda_i non-increasing after any unsaturated player
    zero_suffix      players with lambda_i = 0 form a suffix of the h-ordering
    deviation        no player gains more than tol by deviating unilaterally
    """
    check_dimension(config, profile)
    lam = profile.lambda_r
    n = config.n
    x = slackness(config, profile)
    slope = incentive_slope(config, x) if x > 0.0 else None
    report = PneReport(x=x, slope=slope, tol=tol)

    report.checks['slope_positive'] = slope is not None and slope > 0.0
    if not report.checks['slope_positive']:
        report.findings.append(f"df/dx at x* = {x:.6g} is {slope!r}, expected > 0")

    incentives = [incentive_at(config, x, i) for i in range(n)]
    zero = [lam[i] <= tol for i in range(n)]

    ok = True
    for i in range(n):
        if zero[i] != (incentives[i] <= tol):
            ok = False
            report.findings.append(f"player {i}: lambda = {lam[i]:.6g} but f = {incentives[i]:.6g}")
    report.checks['dropout'] = ok

    ok = True
    for i in range(n):
        if zero[i]:
            continue
        saturated = abs(lam[i] - config.mu_r[i]) <= tol
        if saturated:
            continue
        if slope is None or slope <= 0.0:
            ok = False
            continue
        target = incentives[i] / (config.a[i] * slope)
        if abs(lam[i] - target) > tol:
            ok = False
            report.findings.append(f"player {i}: lambda = {lam[i]:.10g}, stationary value {target:.10g}")
    report.checks['stationarity'] = ok

    ok = True
    for k1 in range(n):
        if lam[k1] >= config.mu_r[k1] - tol:
            continue
        for k2 in range(k1 + 1, n):
            if (config.a[k1] * lam[k1] < config.a[k2] * lam[k2] - tol
                    or lam[k1] < lam[k2] - tol):
                ok = False
                report.findings.append(f"players {k1} < {k2} break the h-ordered structure")
    report.checks['structure'] = ok

    first_zero = next((i for i in range(n) if zero[i]), n)
    report.checks['zero_suffix'] = all(zero[first_zero:])
    if not report.checks['zero_suffix']:
        report.findings.append(f"zero rates do not form a suffix: {list(lam)}")

    try:
        check_in_box(config, profile, tol=tol)
        report.deviation_gains = deviation_gains(config, profile)
        scale = max(1.0, max(abs(utility_at(config, x, lam[i], i)) for i in range(n)))
        report.checks['deviation'] = report.max_deviation_gain <= tol * scale
        if not report.checks['deviation']:
            report.findings.append(f"unilateral deviation gains up to {report.max_deviation_gain:.6g}")
    except StructuralError as e:
        report.checks['deviation'] = False
        report.findings.append(str(e))

    return report


class BestResponseDynamics:
    """
    Iterated best responses until the profile stops moving.

    Sequential updates players in h-order against the latest profile.
    Simultaneous updates everyone against the previous profile and moves a
    fraction `relaxation` of the way (default 1/N); the undamped joint
    update cycles for three or more players because best responses are
    strategic substitutes.
    """

    def __init__(self, config: GameConfig, schedule: Union[str, Schedule] = Schedule.SEQUENTIAL,
                 tol_brd: float = DEFAULT_TOL_BRD, max_iters: int = DEFAULT_MAX_ITERS,
                 tol_stat: float = DEFAULT_TOL_STAT, relaxation: Optional[float] = None):
        if not tol_brd > 0.0:
            raise DomainError(f"tol_brd must be positive, got {tol_brd!r}")
        if max_iters < 1:
            raise DomainError(f"max_iters must be at least 1, got {max_iters!r}")
        if relaxation is not None and not 0.0 < relaxation <= 1.0:
            raise DomainError(f"relaxation must lie in (0, 1], got {relaxation!r}")
        self.config = config
        self.schedule = Schedule.parse(schedule)
        self.tol_brd = tol_brd
        self.max_iters = max_iters
        self.tol_stat = tol_stat
        self.relaxation = relaxation if relaxation is not None else 1.0 / config.n

    def _respond(self, lam: Sequence[float], i: int) -> BestResponseCase:
        config = self.config
        sigma = math.fsum(config.a[j] * lam[j] for j in range(config.n) if j != i)
        return best_response_to_sigma(config, sigma, i, self.tol_stat)

    def _sequential_pass(self, lam: List[float]) -> Tuple[float, List[BestResponseCase]]:
        change = 0.0
        cases = []
        for i in range(self.config.n):
            case = self._respond(lam, i)
            change = max(change, abs(case.value - lam[i]))
            lam[i] = case.value
            cases.append(case)
        return change, cases

    def _simultaneous_pass(self, lam: List[float]) -> Tuple[float, List[BestResponseCase]]:
        cases = [self._respond(lam, i) for i in range(self.config.n)]
        residual = max(abs(case.value - old) for case, old in zip(cases, lam))
        omega = self.relaxation
        for i, case in enumerate(cases):
            lam[i] = case.value if omega == 1.0 else (1.0 - omega) * lam[i] + omega * case.value
        return residual, cases

    def run(self, initial: Optional[StrategyProfile] = None,
            tol_verify: float = DEFAULT_TOL_VERIFY) -> EquilibriumResult:
        config = self.config
        if initial is None:
            initial = StrategyProfile.of([m / 2.0 for m in config.mu_r])
        check_in_box(config, initial)
        if not a3_holds(config):
            logger.warning("Assumption A3 fails for this team; solving anyway without a uniqueness guarantee")

        lam = [min(max(v, 0.0), cap) for v, cap in zip(initial.lambda_r, config.mu_r)]
        step = self._sequential_pass if self.schedule is Schedule.SEQUENTIAL else self._simultaneous_pass
        history: List[float] = []
        cases: List[BestResponseCase] = []

        for iteration in range(1, self.max_iters + 1):
            before = list(lam)
            residual, cases = step(lam)
            change = max(abs(u - v) for u, v in zip(lam, before))
            history.append(change)
            logger.debug(f"BRD {self.schedule.value} sweep {iteration}: change {change:.3e}")
            if residual < self.tol_brd:
                profile = StrategyProfile.of(lam)
                logger.info(f"BRD ({self.schedule.value}) converged after {iteration} sweeps, "
                            f"x* = {slackness(config, profile):.10g}")
                return EquilibriumResult(
                    profile=profile,
                    iterations=iteration,
                    sup_norm_history=history,
                    schedule=self.schedule,
                    verification=verify_pne(config, profile, tol_verify),
                    cases=tuple(cases),
                )

        raise ConvergenceError(
            f"best response dynamics ({self.schedule.value}) did not converge in {self.max_iters} sweeps; "
            f"last change {history[-1]:.3e}",
            history=history,
            last_profile=lam,
        )


def run_brd(config: GameConfig, initial: Optional[StrategyProfile] = None,
            schedule: Union[str, Schedule] = Schedule.SEQUENTIAL,
            tol_brd: float = DEFAULT_TOL_BRD, max_iters: int = DEFAULT_MAX_ITERS,
            tol_stat: float = DEFAULT_TOL_STAT, relaxation: Optional[float] = None,
            tol_verify: float = DEFAULT_TOL_VERIFY) -> EquilibriumResult:
    """Best response dynamics from `initial` (default mu_i^R / 2) to the PNE."""
    dynamics = BestResponseDynamics(config, schedule=schedule, tol_brd=tol_brd, max_iters=max_iters,
                                    tol_stat=tol_stat, relaxation=relaxation)
    return dynamics.run(initial, tol_verify=tol_verify)


def multi_start(config: GameConfig, starts: int, seed: int = 0,
                schedule: Union[str, Schedule] = Schedule.SEQUENTIAL, **solver_kwargs) -> MultiStartResult:
    """
    Run BRD from the canonical start plus starts - 1 uniform random starts.

    A ConvergenceError from any start propagates.
    """
    if starts < 1:
        raise DomainError(f"starts must be at least 1, got {starts}")
    rng = np.random.default_rng(seed)
    results = [run_brd(config, None, schedule=schedule, **solver_kwargs)]
    caps = np.asarray(config.mu_r)
    for _ in range(starts - 1):
        initial = StrategyProfile.of(rng.uniform(0.0, caps))
        results.append(run_brd(config, initial, schedule=schedule, **solver_kwargs))
    outcome = MultiStartResult(results=results, seed=seed)
    logger.info(f"{starts} BRD start(s): max pairwise gap {outcome.max_pairwise_gap:.3e}")
    return outcome


def is_homogeneous(config: GameConfig, rel_tol: float = 1e-12) -> bool:
    h = config.h
    return max(h) - min(h) <= rel_tol * max(1.0, max(h))


def symmetric_load_root(config: GameConfig, copies: float, tol: float = DEFAULT_TOL_STAT) -> Tuple[float, float]:
    """
    Root of lambda_T = copies * f(x) / ((1 + h) df/dx) with x = mu_T^S - (1 + h) lambda_T
    for a team where every h_i = h. Returns (lambda_T, x).

    copies = N is the symmetric equilibrium (each player's own stationarity
    condition); copies = 1 is the stationary point of the team welfare. The
    residual runs from -inf at x = x-bar to a positive value at x = 0+.
    """
    if not is_homogeneous(config):
        raise HomogeneityError(f"players differ in h: {config.h}")
    a = 1.0 + config.h[0]
    mu = config.mu_t_s
    peak = xbar(config)
    if incentive_at(config, peak, 0) <= 0.0:
        return 0.0, mu

    def residual(total: float) -> float:
        x = mu - a * total
        slope = incentive_slope(config, x)
        if slope <= 0.0:
            return -math.inf
        return total - copies * incentive_at(config, x, 0) / (a * slope)

    lo = (mu - peak) / a
    hi = (mu - 1e-9 * mu) / a
    total = bracketed_root(residual, lo, hi, xtol=tol)
    return total, mu - a * total


def homogeneous_pne(config: GameConfig, tol: float = DEFAULT_TOL_STAT) -> Tuple[float, float]:
    """
    Closed-form route to the PNE of a game where every h_i = h: all players
    share lambda = f(x) / ((1 + h) df/dx). Returns (per-player rate, x).

    Requires min mu_i^R >= mu_T^S / (N (1 + h)), which keeps every player
    below its cap.
    """
    if not is_homogeneous(config):
        raise HomogeneityError(f"players differ in h: {config.h}")
    n = config.n
    a = 1.0 + config.h[0]
    mu = config.mu_t_s
    if min(config.mu_r) < mu / (n * a) * (1 - 1e-12):
        raise HomogeneityError(
            f"min mu_r = {min(config.mu_r):.6g} is below mu_T^S / (N (1 + h)) = {mu / (n * a):.6g}")
    total, x = symmetric_load_root(config, copies=n, tol=tol)
    return total / n, x
