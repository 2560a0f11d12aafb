"""Scale-sign invariant interval rules, their mixtures and exact coverage.

A rule [c1, c2] reports the interval c1*X <= mu <= c2*X when X > 0 and
c2*X <= mu <= c1*X when X < 0.  With lam = mu/sigma, its coverage is

    Phi(|lam| (1 - 1/c2)) - Phi(|lam| (1 - 1/c1)) + 1{c1 <= 0 <= c2}

for lam != 0, where an endpoint at zero is read as a one-sided limit
(1/c1 -> -inf as c1 -> 0-, 1/c2 -> +inf as c2 -> 0+).  At lam = 0 the
coverage is the indicator alone.

Every mixture therefore has, for lam > 0, the "Phi-form"

    b0 + sum_k s_k * Phi(lam * e_k)

with finite slopes e_k.  The batch routines below work on that form so a
whole grid of candidate mixtures can be minimised over lam at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .special import _ndtr, _npdf, std_normal_cdf

AT_INFINITY = math.inf
LAMBDA_EPS = 1e-8
LAMBDA_SCAN_START = 2
LAMBDA_SCAN_CAP = 1000
MAX_COMPONENTS = 8

_SCAN_POINTS = 64
_GOLDEN_ITERS = 50
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_CHUNK = 2048
_SCAN_BLOCK = 16


class InvalidRuleError(ValueError):
    """An interval rule or mixture violates its invariants."""


@dataclass(frozen=True)
class IntervalRule:
    """One invariant rule [c1, c2], or the empty rule when both are None.

    The rule [0, 0] is normalised to the empty rule.
    """

    c1: float | None = None
    c2: float | None = None

    def __post_init__(self):
        if self.c1 is None and self.c2 is None:
            return
        if self.c1 is None or self.c2 is None:
            raise InvalidRuleError("a proper rule needs both endpoints")
        c1, c2 = float(self.c1), float(self.c2)
        if c1 == 0.0 and c2 == 0.0:
            object.__setattr__(self, "c1", None)
            object.__setattr__(self, "c2", None)
            return
        if not (math.isfinite(c1) and math.isfinite(c2)):
            raise InvalidRuleError(f"endpoints must be finite, got [{c1}, {c2}]")
        if not c1 < c2:
            raise InvalidRuleError(f"need c1 < c2, got [{c1}, {c2}]")
        object.__setattr__(self, "c1", c1)
        object.__setattr__(self, "c2", c2)

    @property
    def is_empty(self) -> bool:
        return self.c1 is None

    @property
    def length(self) -> float:
        return 0.0 if self.is_empty else self.c2 - self.c1

    def __str__(self) -> str:
        return "phi" if self.is_empty else f"[{self.c1:g}, {self.c2:g}]"


EMPTY = IntervalRule()


@dataclass(frozen=True)
class MixtureRule:
    """Finite mixture of interval rules: a tuple of (rule, weight) pairs."""

    components: tuple[tuple[IntervalRule, float], ...]

    def __post_init__(self):
        comps = tuple((r, float(w)) for r, w in self.components)
        if not comps:
            raise InvalidRuleError("a mixture needs at least one component")
        if len(comps) > MAX_COMPONENTS:
            raise InvalidRuleError(f"at most {MAX_COMPONENTS} components, got {len(comps)}")
        for rule, w in comps:
            if not isinstance(rule, IntervalRule):
                raise InvalidRuleError(f"component {rule!r} is not an IntervalRule")
            if not w > 0.0:
                raise InvalidRuleError(f"weights must be strictly positive, got {w}")
        total = math.fsum(w for _, w in comps)
        if abs(total - 1.0) > 1e-12:
            raise InvalidRuleError(f"weights sum to {total!r}, not 1")
        object.__setattr__(self, "components", comps)

    @classmethod
    def of(cls, *pairs: tuple[IntervalRule | Sequence[float] | None, float]) -> "MixtureRule":
        """Build from (rule, weight) pairs; a rule may be a (c1, c2) pair or None for phi."""
        return cls(tuple((as_rule(r), w) for r, w in pairs))

    @classmethod
    def single(cls, rule) -> "MixtureRule":
        return cls(((as_rule(rule), 1.0),))

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components)


@dataclass(frozen=True)
class LambdaMin:
    lambda_star: float
    min_coverage: float
    derivative_bound_lambda: float


def as_rule(rule) -> IntervalRule:
    if isinstance(rule, IntervalRule):
        return rule
    if rule is None:
        return EMPTY
    c1, c2 = rule
    return IntervalRule(c1, c2)


def _as_mixture(mix) -> MixtureRule:
    if isinstance(mix, MixtureRule):
        return mix
    return MixtureRule.single(mix)


def _slope(c: float, *, upper: bool) -> float:
    """1 - 1/c with the one-sided convention at c = 0."""
    if c == 0.0:
        return -math.inf if upper else math.inf
    return 1.0 - 1.0 / c


def coverage(lam, rule):
    """Exact coverage probability of one rule at lam (scalar or array)."""
    rule = as_rule(rule)
    lam_arr = np.asarray(lam, dtype=float)
    if np.isnan(lam_arr).any() or np.isinf(lam_arr).any():
        raise ValueError("coverage: lambda must be finite")
    if rule.is_empty:
        out = np.zeros_like(lam_arr)
    else:
        inside = 1.0 if rule.c1 <= 0.0 <= rule.c2 else 0.0
        a = np.abs(lam_arr)
        d2 = _slope(rule.c2, upper=True)
        d1 = _slope(rule.c1, upper=False)
        # lam = 0 with a zero endpoint gives 0 * inf; that branch is replaced below
        pos = np.where(a == 0.0, 1.0, a)
        # tail forms avoid cancellation, e.g. Phi(-16) - 1 + 1 collapsing to 0
        if inside:
            val = std_normal_cdf(pos * d2) + std_normal_cdf(-pos * d1)
        elif d2 > 0.0 and d1 > 0.0:
            val = std_normal_cdf(-pos * d1) - std_normal_cdf(-pos * d2)
        else:
            val = std_normal_cdf(pos * d2) - std_normal_cdf(pos * d1)
        out = np.where(a == 0.0, inside, np.clip(val, 0.0, 1.0))
    return float(out) if lam_arr.ndim == 0 else out


def coverage_mixture(lam, mix):
    mix = _as_mixture(mix)
    total = sum(w * coverage(lam, r) for r, w in mix)
    return float(total) if np.ndim(total) == 0 else np.clip(total, 0.0, 1.0)


def coverage_dlambda(lam, mix):
    """d/dlam of the mixture coverage for lam > 0."""
    mix = _as_mixture(mix)
    lam_arr = np.asarray(lam, dtype=float)
    if not (lam_arr > 0).all():
        raise ValueError("coverage_dlambda: lambda must be > 0 (derivative jumps at 0)")
    total = np.zeros_like(lam_arr)
    for rule, w in mix:
        if rule.is_empty:
            continue
        for c, upper, sign in ((rule.c2, True, 1.0), (rule.c1, False, -1.0)):
            d = _slope(c, upper=upper)
            if math.isfinite(d):
                total = total + sign * w * d * _npdf(lam_arr * d)
    return float(total) if lam_arr.ndim == 0 else total


def inflection_points(lam: float) -> tuple[float, float]:
    """Roots (a1, a2) in c of lam^2/c^2 - lam^2/c - 2; a1 < 0 < a2 < 1."""
    if not lam > 0:
        raise ValueError("inflection_points: lambda must be > 0")
    root = math.sqrt(1.0 + 8.0 / (lam * lam))
    return 1.0 / ((1.0 - root) / 2.0), 1.0 / ((1.0 + root) / 2.0)


def expected_length(mix) -> float:
    mix = _as_mixture(mix)
    return math.fsum(w * r.length for r, w in mix)


# --- Phi-form -----------------------------------------------------------------

def phi_terms(c1, c2, w):
    """Phi-form (b0, s, e) of a batch of mixtures.

    c1, c2, w have shape (N, M): N mixtures of M components each.  The empty
    rule is encoded as c1 = c2 = 0, which the endpoint conventions already
    give coverage 0.  Returns b0 (N,), s and e (N, 2M).
    """
    c1 = np.atleast_2d(np.asarray(c1, dtype=float))
    c2 = np.atleast_2d(np.asarray(c2, dtype=float))
    w = np.atleast_2d(np.asarray(w, dtype=float))
    inside = (c1 <= 0.0) & (c2 >= 0.0)
    b0 = np.sum(w * inside, axis=1) - np.sum(w * (c1 == 0.0), axis=1)
    with np.errstate(divide="ignore"):
        e2 = np.where(c2 == 0.0, 0.0, 1.0 - 1.0 / np.where(c2 == 0.0, 1.0, c2))
        e1 = np.where(c1 == 0.0, 0.0, 1.0 - 1.0 / np.where(c1 == 0.0, 1.0, c1))
    s2 = np.where(c2 == 0.0, 0.0, w)
    s1 = np.where(c1 == 0.0, 0.0, -w)
    return b0, np.concatenate([s2, s1], axis=1), np.concatenate([e2, e1], axis=1)


def mixture_phi_terms(mix):
    mix = _as_mixture(mix)
    c1 = [0.0 if r.is_empty else r.c1 for r, _ in mix]
    c2 = [0.0 if r.is_empty else r.c2 for r, _ in mix]
    w = [wt for _, wt in mix]
    return phi_terms([c1], [c2], [w])


def _eval_terms(lam, b0, s, e):
    # lam (n, G); b0 (n,); s, e (n, K) -> (n, G)
    vals = _ndtr(lam[:, :, None] * e[:, None, :])
    return b0[:, None] + np.sum(s[:, None, :] * vals, axis=2)


def _eval_dterms(lam, s, e):
    se = s * e
    return np.sum(se[:, None, :] * _npdf(lam[:, :, None] * e[:, None, :]), axis=2)


def limit_terms(b0, s, e, at: str):
    if at == "zero_plus":
        return b0 + 0.5 * np.sum(s, axis=1)
    if at == "infinity":
        step = np.where(e > 0.0, 1.0, np.where(e < 0.0, 0.0, 0.5))
        return b0 + np.sum(s * step, axis=1)
    raise ValueError(f"unknown limit {at!r}; use 'zero_plus' or 'infinity'")


def coverage_limit(mix, at: str) -> float:
    """Closed-form limit of the mixture coverage as lam -> 0+ or lam -> inf."""
    b0, s, e = mixture_phi_terms(mix)
    return float(np.clip(limit_terms(b0, s, e, at)[0], 0.0, 1.0))


def _lambda_upper(s, e) -> tuple[np.ndarray, np.ndarray]:
    n = s.shape[0]
    lam_up = np.full(n, float(LAMBDA_SCAN_CAP))
    found = np.zeros(n, dtype=bool)
    start = LAMBDA_SCAN_START
    while start <= LAMBDA_SCAN_CAP:
        idx = np.nonzero(~found)[0]
        if idx.size == 0:
            break
        lams = np.arange(start, min(start + _SCAN_BLOCK, LAMBDA_SCAN_CAP + 1), dtype=float)
        d = _eval_dterms(np.broadcast_to(lams, (idx.size, lams.size)), s[idx], e[idx])
        pos = d > 0.0
        hit = pos.any(axis=1)
        first = np.argmax(pos, axis=1)
        lam_up[idx[hit]] = lams[first[hit]]
        found[idx[hit]] = True
        start += _SCAN_BLOCK
    return lam_up, found


def _batch_min_chunk(b0, s, e, tol):
    n = b0.shape[0]
    lam_up, found = _lambda_upper(s, e)
    t = np.linspace(0.0, 1.0, _SCAN_POINTS)
    grid = LAMBDA_EPS + (lam_up - LAMBDA_EPS)[:, None] * t[None, :]
    fg = _eval_terms(grid, b0, s, e)
    i = np.argmin(fg, axis=1)
    rows = np.arange(n)
    lo = grid[rows, np.maximum(i - 1, 0)]
    hi = grid[rows, np.minimum(i + 1, _SCAN_POINTS - 1)]

    def f(x):
        return _eval_terms(x[:, None], b0, s, e)[:, 0]

    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(_GOLDEN_ITERS):
        left = f1 <= f2
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        new_x = np.where(left, hi - _GOLDEN * (hi - lo), lo + _GOLDEN * (hi - lo))
        f_new = f(new_x)
        x2, f2, x1, f1 = (
            np.where(left, x1, new_x), np.where(left, f1, f_new),
            np.where(left, new_x, x2), np.where(left, f_new, f2),
        )
    # best of the grid point and both golden probes
    cand_x = np.stack([grid[rows, i], x1, x2], axis=1)
    cand_f = np.stack([fg[rows, i], f1, f2], axis=1)
    j = np.argmin(cand_f, axis=1)
    interior = cand_f[rows, j]
    lam_star = cand_x[rows, j]

    flat = (fg.max(axis=1) - fg.min(axis=1)) <= tol
    zero_lim = limit_terms(b0, s, e, "zero_plus")
    inf_lim = limit_terms(b0, s, e, "infinity")
    value = np.minimum(np.minimum(zero_lim, interior), inf_lim)

    at_inf = (inf_lim < interior - tol) | (~found & (inf_lim <= interior + tol))
    at_zero = zero_lim < interior - tol
    lam_star = np.where(at_zero, 0.0, lam_star)
    lam_star = np.where(at_inf, AT_INFINITY, lam_star)
    lam_star = np.where(flat & (np.abs(zero_lim - value) <= tol), LAMBDA_EPS, lam_star)
    return np.clip(value, 0.0, 1.0), lam_star, lam_up


def batch_min_coverage(b0, s, e, tol: float = 1e-9):
    """Infimum over lam > 0 of each Phi-form mixture in a batch.

    Returns (min_coverage, lambda_star, lambda_upper), each of shape (N,).
    Rows are processed independently, so results do not depend on batch
    composition or chunking.
    """
    b0 = np.asarray(b0, dtype=float)
    s = np.asarray(s, dtype=float)
    e = np.asarray(e, dtype=float)
    n = b0.shape[0]
    out = [np.empty(n), np.empty(n), np.empty(n)]
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        for a in range(0, n, _CHUNK):
            sl = slice(a, a + _CHUNK)
            for dst, src in zip(out, _batch_min_chunk(b0[sl], s[sl], e[sl], tol)):
                dst[sl] = src
    return tuple(out)


def min_coverage(mix, tol: float = 1e-9) -> LambdaMin:
    """Infimum over lam in (0, inf) of the mixture coverage."""
    if not (0.0 < tol < 1e-3):
        raise ValueError("min_coverage: tol must lie in (0, 1e-3)")
    b0, s, e = mixture_phi_terms(mix)
    value, lam_star, lam_up = batch_min_coverage(b0, s, e, tol)
    return LambdaMin(float(lam_star[0]), float(value[0]), float(lam_up[0]))

