"""Norm-bounded confidence sets {mu : ||mu|| <= c ||X||} from one draw X ~ N_p(mu, Sigma).

The miss probability 1 - P{||mu|| <= c||X||} is exact for spherical Sigma:
with delta = ||nu||^2 / 2 for the standardised mean nu, ||X||^2 is a
noncentral chi-square with p degrees of freedom and noncentrality 2*delta,
so the miss probability is its CDF at 2*delta/c^2.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .special import noncentral_chisq_cdf

SIMPLE_FACTOR = 3.85
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class MvBoundReport:
    p: int
    alpha: float
    c_simple: float
    c_refined: float
    a: float
    worst_miss: float
    worst_delta: float

    def as_dict(self) -> dict:
        return asdict(self)


def _check_dim(p) -> int:
    if int(p) != p or p < 1:
        raise ValueError(f"dimension p must be an integer >= 1, got {p}")
    return int(p)


def inflation_factor(p: int) -> float:
    """a(p) = 1 / (1 - exp(1 - 2*pi*e^(p/4))); at most 1.00086 for p >= 1."""
    p = _check_dim(p)
    return 1.0 / -math.expm1(1.0 - 2.0 * math.pi * math.exp(p / 4.0))


def bound_constant(p: int, alpha: float) -> tuple[float, float, float]:
    """(c_simple, c_refined, a) for dimension p and miss level alpha."""
    p = _check_dim(p)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    a = inflation_factor(p)
    scale = alpha ** (-1.0 / p)
    c_refined = math.sqrt(2.0 * math.e ** 2 * a) * scale
    return SIMPLE_FACTOR * scale, c_refined, a


def miss_prob_series_bound(p: int, delta: float, c: float) -> float:
    """Closed-form upper bound on the miss probability, uniform in delta.

    (1/2pi) * (2 e^1.5 / c^2)^(p/2) * (1 - log(1 - 2e^2/c^2)); needs
    c^2 > 2e^2.  ``delta`` is accepted for interface symmetry with
    :func:`exact_miss_prob_spherical` and does not enter the bound.
    The value may exceed 1 for small c.
    """
    p = _check_dim(p)
    if not delta >= 0:
        raise ValueError("delta must be >= 0")
    u = 2.0 * math.e ** 2 / (c * c)
    if not u < 1.0:
        raise ArithmeticError(f"series diverges: need c^2 > 2e^2 = {2 * math.e ** 2:.6f}, got c = {c}")
    return (2.0 * math.e ** 1.5 / (c * c)) ** (p / 2.0) * (1.0 - math.log1p(-u)) / (2.0 * math.pi)


def exact_miss_prob_spherical(p: int, delta: float, c: float) -> float:
    """P{||mu|| > c||X||} for Sigma proportional to the identity."""
    p = _check_dim(p)
    if not delta >= 0:
        raise ValueError("delta must be >= 0")
    if not c > 0:
        raise ValueError("c must be > 0")
    if delta == 0.0:
        return 0.0
    return float(noncentral_chisq_cdf(2.0 * delta / (c * c), p, 2.0 * delta))


def default_delta_grid() -> np.ndarray:
    return np.geomspace(1e-4, 1e3, 200)


def worst_case_search(p: int, c: float, delta_grid=None) -> tuple[float, float]:
    """(worst_delta, worst_miss): grid argmax of the spherical miss probability, golden-polished."""
    p = _check_dim(p)
    grid = np.unique(np.asarray(default_delta_grid() if delta_grid is None else delta_grid, dtype=float))
    if grid.size == 0:
        raise ValueError("delta grid must be nonempty")
    if (grid < 0).any():
        raise ValueError("delta grid values must be >= 0")

    def f(d):
        return exact_miss_prob_spherical(p, d, c)

    vals = np.array([f(d) for d in grid])
    i = int(np.argmax(vals))  # first maximum, i.e. smallest delta
    best_d, best_v = float(grid[i]), float(vals[i])
    if grid.size < 3:
        return best_d, best_v
    lo = float(grid[max(i - 1, 0)])
    hi = float(grid[min(i + 1, grid.size - 1)])
    x1, x2 = hi - _GOLDEN * (hi - lo), lo + _GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > 1e-10 * (1.0 + hi):
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = f(x2)
    for d, v in sorted(((x1, f1), (x2, f2))):
        if v > best_v:
            best_d, best_v = d, v
    return best_d, best_v


def mv_bound_report(p: int, alpha: float, delta_grid=None) -> MvBoundReport:
    c_simple, c_refined, a = bound_constant(p, alpha)
    worst_delta, worst_miss = worst_case_search(p, c_simple, delta_grid)
    return MvBoundReport(p=int(p), alpha=float(alpha), c_simple=c_simple, c_refined=c_refined,
                         a=a, worst_miss=worst_miss, worst_delta=worst_delta)
