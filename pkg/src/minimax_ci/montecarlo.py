"""Seeded Monte Carlo ground truth for the analytic coverage results.

Stream contract
---------------
Replications are split over ``streams`` substreams: stream ``s`` gets
``n // streams`` replications, plus one if ``s < n % streams``.  Stream
``s`` is a Philox-4x64 counter-based generator keyed by
``numpy.random.SeedSequence(seed, spawn_key=(s,))``.  Each 64-bit output
word ``r`` becomes the uniform ``((r >> 11) + 0.5) * 2**-53`` in (0, 1),
and normals are ``ndtri(u)``.  Words are consumed in blocks of
``BLOCK`` replications, each replication taking its words consecutively.

Results therefore depend only on (seed, n, streams).  Hit counts are
integers summed in stream order, so thread scheduling cannot change them.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .intervals import MixtureRule, as_rule

BLOCK = 1 << 16
_SCALE = 2.0 ** -53


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    n: int = 1_000_000
    streams: int = 8

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.streams < 1:
            raise ValueError("streams must be >= 1")

    def stream_sizes(self) -> list[int]:
        q, r = divmod(self.n, self.streams)
        return [q + (1 if s < r else 0) for s in range(self.streams)]

    def generator(self, stream: int) -> np.random.Philox:
        return np.random.Philox(np.random.SeedSequence(int(self.seed), spawn_key=(stream,)))


@dataclass(frozen=True)
class SimEstimate:
    estimate: float
    std_error: float
    n: int

    @classmethod
    def from_hits(cls, hits: int, n: int) -> "SimEstimate":
        est = hits / n
        return cls(est, math.sqrt(est * (1.0 - est) / n), n)


def _uniforms(bitgen: np.random.Philox, count: int) -> np.ndarray:
    raw = bitgen.random_raw(count)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _SCALE


def _blocks(bitgen, size: int, width: int):
    """Yield (m, width) uniform arrays covering ``size`` replications."""
    done = 0
    while done < size:
        m = min(BLOCK, size - done)
        yield _uniforms(bitgen, m * width).reshape(m, width)
        done += m


def _run_streams(cfg: SimConfig, work, threads: int):
    sizes = cfg.stream_sizes()
    tasks = [(s, sizes[s]) for s in range(cfg.streams)]

    def one(task):
        s, size = task
        return work(cfg.generator(s), size)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, tasks))
    return [one(t) for t in tasks]


def simulate_univariate(mix, lam: float, cfg: SimConfig, threads: int = 1) -> SimEstimate:
    """Fraction of draws X ~ N(lam, 1) whose randomly chosen rule covers mu = lam."""
    if not isinstance(mix, MixtureRule):
        mix = MixtureRule.single(as_rule(mix))
    lam = float(lam)
    weights = np.array([w for _, w in mix])
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    empty = np.array([r.is_empty for r, _ in mix])
    lo = np.array([0.0 if r.is_empty else r.c1 for r, _ in mix])
    hi = np.array([0.0 if r.is_empty else r.c2 for r, _ in mix])

    def work(bitgen, size):
        hits = 0
        for u in _blocks(bitgen, size, 2):
            x = lam + ndtri(u[:, 0])
            k = np.searchsorted(cum, u[:, 1], side="right")
            k = np.minimum(k, len(cum) - 1)
            a, b = lo[k] * x, hi[k] * x
            low = np.minimum(a, b)
            up = np.maximum(a, b)
            hit = (low <= lam) & (lam <= up) & ~empty[k]
            hits += int(np.count_nonzero(hit))
        return hits

    return SimEstimate.from_hits(sum(_run_streams(cfg, work, threads)), cfg.n)


def simulate_multivariate(mu, sigma_eigs, c: float, cfg: SimConfig, threads: int = 1) -> SimEstimate:
    """Fraction of draws with ||mu|| <= c ||X||, X having independent N(mu_i, sigma_eigs_i) coordinates.

    ``sigma_eigs`` are variances (the eigenvalues of the covariance matrix).
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    eig = np.atleast_1d(np.asarray(sigma_eigs, dtype=float))
    if mu.shape != eig.shape:
        raise ValueError("mu and sigma_eigs must have the same length")
    if (eig <= 0).any():
        raise ValueError("covariance eigenvalues must be positive")
    if not c > 0:
        raise ValueError("c must be > 0")
    sd = np.sqrt(eig)
    radius = float(np.linalg.norm(mu))
    dim = mu.size

    def work(bitgen, size):
        hits = 0
        for u in _blocks(bitgen, size, dim):
            x = mu + sd * ndtri(u)
            hits += int(np.count_nonzero(radius <= c * np.sqrt(np.sum(x * x, axis=1))))
        return hits

    return SimEstimate.from_hits(sum(_run_streams(cfg, work, threads)), cfg.n)


class EmpiricalCDF:
    """Empirical distribution of a sample; ``values`` keeps replication order."""

    def __init__(self, values: np.ndarray):
        self.values = np.asarray(values, dtype=float)
        self.sorted = np.sort(self.values)
        self.n = self.values.size

    def __call__(self, x):
        return np.searchsorted(self.sorted, x, side="right") / self.n

    def mean(self) -> float:
        return float(self.values.mean())

    def std_error_of_mean(self) -> float:
        return float(self.values.std(ddof=1) / math.sqrt(self.n))

    def ks_distance(self, cdf) -> float:
        """sup |F_n - F| for a vectorised reference CDF."""
        f = np.asarray(cdf(self.sorted), dtype=float)
        i = np.arange(1, self.n + 1)
        return float(max(np.max(i / self.n - f), np.max(f - (i - 1) / self.n)))


def sample_weighted_chisq(lambdas, nus, cfg: SimConfig, threads: int = 1) -> EmpiricalCDF:
    """Sample sum_i lambdas_i * Y_i^2 with Y_i ~ N(nus_i, 1)."""
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
    nu = np.atleast_1d(np.asarray(nus, dtype=float))
    if lam.shape != nu.shape:
        raise ValueError("lambdas and nus must have the same length")
    if (lam < 1.0).any():
        raise ValueError("every weight must be >= 1")
    dim = lam.size

    def work(bitgen, size):
        parts = []
        for u in _blocks(bitgen, size, dim):
            y = nu + ndtri(u)
            parts.append(np.sum(lam * y * y, axis=1))
        return np.concatenate(parts) if parts else np.empty(0)

    return EmpiricalCDF(np.concatenate(_run_streams(cfg, work, threads)))
