"""Independent oracles and sample grids shared by unit and acceptance tests.

Nothing here calls into the package's own normal CDF: oracles use
scipy.special.ndtr so that agreement is a genuine cross-check.
"""

import math

import numpy as np
from scipy.special import ndtr

from minimax_ci.intervals import MixtureRule

LAMBDAS_5 = (0.25, 0.5, 1.0, 2.0, 4.0)


def oracle_coverage(lam, c1, c2):
    """Coverage from the CI event by direct case analysis (scipy ndtr)."""
    lam = np.abs(np.asarray(lam, dtype=float))
    inside = 1.0 if c1 <= 0 <= c2 else 0.0
    up = -np.inf if c2 == 0 else 1 - 1 / c2
    lo = np.inf if c1 == 0 else 1 - 1 / c1
    with np.errstate(invalid="ignore"):
        val = ndtr(lam * up) - ndtr(lam * lo) + inside
    return np.where(lam == 0, inside, val)


def literal_display_coverage(lam, c1, c2):
    """The alternative sign reading with 1 + 1/c1 in the lower term."""
    lam = abs(lam)
    inside = 1.0 if c1 <= 0 <= c2 else 0.0
    up = -np.inf if c2 == 0 else 1 - 1 / c2
    lo = -np.inf if c1 == 0 else 1 + 1 / c1
    return float(ndtr(lam * up) - ndtr(lam * lo) + inside)


def oracle_mixture(lam, mix):
    return sum(w * (0.0 * np.asarray(lam) if r.is_empty else oracle_coverage(lam, r.c1, r.c2))
               for r, w in mix)


def dense_min(mix, top=50.0, step=1e-3):
    """Minimum over a dense lam grid on (0, top] plus both limits, by brute force."""
    lams = np.arange(step, top + step / 2, step)
    vals = oracle_mixture(lams, mix)
    tails = oracle_mixture(np.array([1e-12, 1e9]), mix)
    return float(min(vals.min(), tails.min()))


def random_mixtures(count, seed, min_slope=0.2):
    """Random mixtures of 1-3 rules with every |1 - 1/c| >= min_slope."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        k = int(rng.integers(1, 4))
        rules = []
        while len(rules) < k:
            if rng.random() < 0.1:
                rules.append(None)
                continue
            c1 = float(rng.uniform(-5, 1.5))
            c2 = float(c1 + rng.uniform(0.3, 6))
            if any(c != 0 and abs(1 - 1 / c) < min_slope for c in (c1, c2)):
                continue
            rules.append((c1, c2))
        w = rng.dirichlet(np.ones(k))
        w[-1] = 1.0 - math.fsum(w[:-1])
        if (w <= 0).any():
            continue
        out.append(MixtureRule.of(*zip(rules, w)))
    return out


def improvement_cases():
    """(label, lam, better, worse, strict) over a 10 x 10 x 5 endpoint/lam grid."""
    neg = -np.linspace(0.2, 5.0, 10)
    big = np.linspace(1.2, 8.0, 10)
    cases = []
    for lam in LAMBDAS_5:
        for i in range(10):
            for j in range(10):
                # (a) both endpoints negative: shift to [-(c2 - c1), 0]
                c1, c2 = min(neg[i], neg[j]), max(neg[i], neg[j])
                if c1 < c2:
                    cases.append(("a", lam, (-(c2 - c1), 0.0), (c1, c2), True))
                # (b) [0, -c1] beats [c1, 0]; j varies the mirrored length too
                c1 = neg[i] * (1 + j / 10)
                cases.append(("b", lam, (0.0, -c1), (c1, 0.0), True))
                # (c) c1 > 1: slide down to start at 1
                c1, c2 = big[i], big[i] + 0.3 + 0.5 * j
                cases.append(("c", lam, (1.0, c2 - c1 + 1.0), (c1, c2), True))
                # (d) c2 > -c1 > 0: the rule beats its reflection
                c1 = neg[i]
                c2 = -c1 * (1.05 + 0.3 * j)
                cases.append(("d", lam, (c1, c2), (-c2, -c1), False))
    return cases


def second_derivative_factor(lam, c):
    return lam * lam / (c * c) - lam * lam / c - 2.0


def convexity_samples(count, seed):
    """(lam, c, upper) with |factor| > 0.1 and the Phi argument kept moderate."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        lam = float(rng.uniform(0.2, 6.0))
        upper = bool(rng.random() < 0.5)
        c = float(rng.uniform(0.05, 10.0)) * (1 if upper else -1)
        if abs(second_derivative_factor(lam, c)) <= 0.1:
            continue
        if abs(lam * (1 - 1 / c)) > 6:  # keep the curvature above round-off
            continue
        out.append((lam, c, upper))
    return out


def second_difference(cov, lam, c, upper):
    """Central second difference in the moving endpoint; the other end is fixed."""
    h = 1e-3 * max(1.0, abs(c))
    h = min(h, abs(c) / 4)
    if upper:
        f = lambda x: cov(lam, (-1.0, x))
    else:
        f = lambda x: cov(lam, (x, 2.0))
    return f(c + h) - 2 * f(c) + f(c - h)
