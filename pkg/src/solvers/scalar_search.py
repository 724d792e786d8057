"""
Scalar search kernels shared by the solvers.

Roots are bracketed and handed to scipy's bisection; maximisation of
unimodal maps uses a golden-section search written in the same shape as
the classic gss helper (interval shrinking by 1/phi with a precomputed
step count).
"""

import math
from typing import Callable, Tuple

from scipy import optimize

INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / phi
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2  # 1 / phi^2


def bracketed_root(func: Callable[[float], float], lo: float, hi: float, xtol: float) -> float:
    """
    Root of func on [lo, hi] by bisection.

    Endpoints that are already roots are returned as is; otherwise the
    caller guarantees a sign change. scipy raises ValueError when it
    does not hold.
    """
    f_lo = func(lo)
    if f_lo == 0.0:
        return lo
    f_hi = func(hi)
    if f_hi == 0.0:
        return hi
    return optimize.bisect(func, lo, hi, xtol=xtol, maxiter=400)


def golden_section_max(func: Callable[[float], float], a: float, b: float,
                       rel_tol: float = 1e-10) -> Tuple[float, float]:
    """
    Golden-section search for the maximiser of a unimodal func on [a, b].

    The bracket is shrunk until its width is at most rel_tol * max(1, |b|).
    Returns (argmax, max). Both endpoints are compared with the interior
    estimate, so a maximum sitting on the boundary is not lost.
    """
    a, b = min(a, b), max(a, b)
    tol = rel_tol * max(1.0, abs(b))
    h = b - a
    candidates = [(func(a), a), (func(b), b)]
    if h <= tol:
        best_value, best_x = max(candidates)
        return best_x, best_value

    n = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))

    c = a + INV_PHI_SQUARE * h
    d = a + INV_PHI * h
    yc = func(c)
    yd = func(d)

    for _ in range(n - 1):
        if yc > yd:
            b = d
            d = c
            yd = yc
            h = INV_PHI * h
            c = a + INV_PHI_SQUARE * h
            yc = func(c)
        else:
            a = c
            c = d
            yc = yd
            h = INV_PHI * h
            d = a + INV_PHI * h
            yd = func(d)

    if yc > yd:
        mid = (a + d) / 2
    else:
        mid = (c + b) / 2
    candidates.append((func(mid), mid))
    best_value, best_x = max(candidates, key=lambda item: item[0])
    return best_x, best_value
