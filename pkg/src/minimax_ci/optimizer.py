"""Max-min search over two-point mixtures of invariant interval rules.

For a fixed expected length h, each case below is a two-parameter or
three-parameter family (lower endpoints and a mixing weight); the upper
endpoint c2 is solved from the length constraint.  The minimal coverage
over lam is maximised by an exhaustive grid followed by a derivative-free
pattern search on the best grid cell.

Case families (p is the weight on the first component):

    CASE1   p*[a1, 1]  + (1-p)*[c1, c2]     -c2 < c1 < 0, -1 <= a1 < 0
    CASE2   p*[c1, c2] + (1-p)*[a1, c2]     -c2 < c1 < a1 < 0
    CASE3   p*[a1, 1]  + (1-p)*[0, c2]      -c2 < a1 < 0
    CASE7   p*phi      + (1-p)*[c1, c2]     -c2 < c1 < 0
    SMALL_H h*[0, 1]   + (1-h)*phi          h <= 1

All cases also require c2 > 1.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .intervals import (
    EMPTY,
    IntervalRule,
    MixtureRule,
    batch_min_coverage,
    min_coverage,
    phi_terms,
)

log = logging.getLogger(__name__)

GRID_POINTS = 201
GRID_OFFSET = 1e-5
P_GRID_TOP = 0.99999
ENDPOINT_CAP = -1e-6
P_CAP = 0.999999
START_STEP = 0.05
MIN_STEP = 1e-7
MAX_EVALUATIONS = 100_000
MIN_TOL = 1e-10
MERGE_GAP = 1e-6
MERGE_SLACK = 1e-12


class CaseId(str, Enum):
    CASE1 = "CASE1"
    CASE2 = "CASE2"
    CASE3 = "CASE3"
    CASE7 = "CASE7"
    SMALL_H = "SMALL_H"


CASE_ORDER = (CaseId.CASE2, CaseId.CASE1, CaseId.CASE3, CaseId.CASE7)

# free coordinates of each case, in (c1, a1, p) order
_COORDS = {
    CaseId.CASE1: ("c1", "a1", "p"),
    CaseId.CASE2: ("c1", "a1", "p"),
    CaseId.CASE3: ("a1", "p"),
    CaseId.CASE7: ("c1", "p"),
}


class InfeasibleError(ValueError):
    """Parameters admit no mixture of the requested expected length."""


@dataclass(frozen=True)
class CandidateParams:
    c1: float | None = None
    a1: float | None = None
    p: float = 0.0

    def coords(self, case: CaseId) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in _COORDS[case])

    @classmethod
    def from_coords(cls, case: CaseId, x) -> "CandidateParams":
        return cls(**{name: float(v) for name, v in zip(_COORDS[case], x)})


@dataclass
class OptimResult:
    h: float
    case: CaseId
    params: CandidateParams
    c2: float
    min_coverage: float
    lambda_star: float
    converged: bool
    evaluations: int
    grid_value: float = math.nan
    case_values: dict = field(default_factory=dict)

    def mixture(self) -> MixtureRule:
        return build_mixture(self.case, self.params, self.h)


@dataclass(frozen=True)
class SweepError:
    h: float
    error: str


# --- vectorised case algebra ------------------------------------------------

def _close_length_arr(case, c1, a1, p, h):
    with np.errstate(divide="ignore", invalid="ignore"):
        if case is CaseId.CASE2:
            return h + p * c1 + (1.0 - p) * a1
        if case is CaseId.CASE7:
            return c1 + h / (1.0 - p)
        if case is CaseId.CASE1:
            return c1 + (h - p * (1.0 - a1)) / (1.0 - p)
        if case is CaseId.CASE3:
            return (h - p * (1.0 - a1)) / (1.0 - p)
    raise ValueError(f"no length closure for {case}")


def _feasible_arr(case, c1, a1, p, c2):
    ok = np.isfinite(c2) & (c2 > 1.0) & (p >= 0.0) & (p <= 1.0)
    if case is CaseId.CASE2:
        # at p = 1 the second component carries no weight and a1 is unused
        return ok & (-c2 < c1) & (c1 < 0.0) & (((c1 < a1) & (a1 < 0.0)) | (p == 1.0))
    if case is CaseId.CASE1:
        return ok & (-c2 < c1) & (c1 < 0.0) & (-1.0 <= a1) & (a1 < 0.0)
    if case is CaseId.CASE3:
        return ok & (-c2 < a1) & (a1 < 0.0)
    if case is CaseId.CASE7:
        return ok & (-c2 < c1) & (c1 < 0.0)
    raise ValueError(f"no feasibility rule for {case}")


def _components_arr(case, c1, a1, p, c2):
    """Endpoint and weight arrays of shape (N, 2); phi is encoded as [0, 0]."""
    one = np.ones_like(c2)
    zero = np.zeros_like(c2)
    if case is CaseId.CASE1:
        lo, up = (a1, c1), (one, c2)
    elif case is CaseId.CASE2:
        lo, up = (c1, a1), (c2, c2)
    elif case is CaseId.CASE3:
        lo, up = (a1, zero), (one, c2)
    elif case is CaseId.CASE7:
        lo, up = (zero, c1), (zero, c2)
    else:
        raise ValueError(case)
    return (np.column_stack(lo), np.column_stack(up),
            np.column_stack([p, 1.0 - p]))


def _broadcast_params(case, c1, a1, p):
    p = np.asarray(p, dtype=float)
    c1 = np.zeros_like(p) if c1 is None else np.asarray(c1, dtype=float)
    a1 = np.zeros_like(p) if a1 is None else np.asarray(a1, dtype=float)
    return np.broadcast_arrays(c1, a1, p)


def _objective_arr(case, h, c1, a1, p):
    """Minimal coverage for arrays of parameters; -inf where infeasible."""
    c1, a1, p = _broadcast_params(case, c1, a1, p)
    c2 = _close_length_arr(case, c1, a1, p, h)
    ok = _feasible_arr(case, c1, a1, p, c2)
    value = np.full(p.shape, -np.inf)
    lam = np.full(p.shape, np.nan)
    if ok.any():
        lo, up, w = _components_arr(case, c1[ok], a1[ok], p[ok], c2[ok])
        b0, s, e = phi_terms(lo, up, w)
        v, ls, _ = batch_min_coverage(b0, s, e, MIN_TOL)
        value[ok] = v
        lam[ok] = ls
    return value, lam, c2, ok


# --- public operations --------------------------------------------------------

def close_length(case: CaseId, params: CandidateParams, h: float) -> float:
    """Upper endpoint c2 that gives the case's mixture expected length h."""
    case = CaseId(case)
    if not h > 0:
        raise ValueError("h must be > 0")
    if case is CaseId.SMALL_H:
        return 1.0
    if case is not CaseId.CASE2 and params.p >= 1.0:
        raise InfeasibleError(f"{case.value}: p = 1 leaves no length for the second component")
    c1, a1, p = _broadcast_params(case, params.c1, params.a1, params.p)
    return float(_close_length_arr(case, c1, a1, p, h))


def feasible(case: CaseId, params: CandidateParams, c2: float) -> bool:
    case = CaseId(case)
    if case is CaseId.SMALL_H:
        return 0.0 < params.p <= 1.0
    for name in _COORDS[case]:
        v = getattr(params, name)
        if v is None and case is CaseId.CASE2 and name == "a1" and params.p == 1.0:
            continue
        if v is None or not math.isfinite(v):
            return False
    c1, a1, p = _broadcast_params(case, params.c1, params.a1, params.p)
    return bool(_feasible_arr(case, c1, a1, p, np.asarray(c2, dtype=float)))


def build_mixture(case: CaseId, params: CandidateParams, h: float) -> MixtureRule:
    """Two-point mixture of the case; zero-weight components are dropped."""
    case = CaseId(case)
    if case is CaseId.SMALL_H:
        if not 0.0 < h <= 1.0:
            raise InfeasibleError("SMALL_H needs 0 < h <= 1")
        pairs = [(IntervalRule(0.0, 1.0), h), (EMPTY, 1.0 - h)]
    else:
        c2 = close_length(case, params, h)
        if not feasible(case, params, c2):
            raise InfeasibleError(f"{case.value}: infeasible parameters {params} (c2={c2})")
        lo, up, w = _components_arr(case, *_broadcast_params(case, params.c1, params.a1, params.p),
                                    np.asarray(c2, dtype=float))
        pairs = [(IntervalRule(float(l), float(u)), float(wt))
                 for l, u, wt in zip(np.ravel(lo), np.ravel(up), np.ravel(w))]
    return MixtureRule(tuple((r, wt) for r, wt in pairs if wt > 0.0))


def lower_grid(mesh: float) -> np.ndarray:
    return -GRID_OFFSET - mesh * np.arange(GRID_POINTS)


def p_grid(mesh: float) -> np.ndarray:
    n = int(math.floor(1.0 / mesh + 1e-9))
    ps = [k * mesh for k in range(n) if k * mesh < 1.0 - 1e-12]
    return np.array(ps + [P_GRID_TOP])


def _grid_arrays(case: CaseId, mesh: float):
    lows = lower_grid(mesh)
    ps = p_grid(mesh)
    if case in (CaseId.CASE1, CaseId.CASE2):
        c1, a1, p = np.meshgrid(lows, lows, ps, indexing="ij")
        return c1.ravel(), a1.ravel(), p.ravel()
    if case is CaseId.CASE3:
        a1, p = np.meshgrid(lows, ps, indexing="ij")
        return None, a1.ravel(), p.ravel()
    if case is CaseId.CASE7:
        c1, p = np.meshgrid(lows, ps, indexing="ij")
        return c1.ravel(), None, p.ravel()
    raise ValueError(f"no grid for {case}")


def _grid_search(case: CaseId, h: float, mesh: float):
    c1, a1, p = _grid_arrays(case, mesh)
    c1b, a1b, pb = _broadcast_params(case, c1, a1, p)
    c2 = _close_length_arr(case, c1b, a1b, pb, h)
    ok = _feasible_arr(case, c1b, a1b, pb, c2)
    if not ok.any():
        raise InfeasibleError(f"{case.value}: no feasible grid point at h={h}, mesh={mesh}")
    c1b, a1b, pb = c1b[ok], a1b[ok], pb[ok]
    value, _, _, _ = _objective_arr(case, h, c1b, a1b, pb)
    # highest value, then lexicographically smallest (c1, a1, p)
    best = np.lexsort((pb, a1b, c1b, -value))[0]
    params = CandidateParams(
        c1=None if c1 is None else float(c1b[best]),
        a1=None if a1 is None else float(a1b[best]),
        p=float(pb[best]),
    )
    return params, float(value[best]), int(ok.sum())


def grid_search(case: CaseId, h: float, mesh: float = 0.1) -> tuple[CandidateParams, float]:
    """Best feasible point of the case's (lower endpoint, weight) grid."""
    case = CaseId(case)
    if not h > 1:
        raise ValueError("grid_search needs h > 1")
    if not mesh > 0:
        raise ValueError("mesh must be > 0")
    params, value, _ = _grid_search(case, h, mesh)
    return params, value


def _refine_box(case: CaseId, start: CandidateParams, c2: float, radius: float):
    low, up = [], []
    for name in _COORDS[case]:
        v = getattr(start, name)
        if name == "p":
            low.append(max(v - radius, 0.0))
            up.append(min(v + radius, P_CAP))
            continue
        if name == "c1" or case is CaseId.CASE3:
            floor = -c2
        elif case is CaseId.CASE2:
            floor = start.c1
        else:  # CASE1 a1
            floor = -1.0
        low.append(max(v - radius, floor))
        up.append(min(v + radius, ENDPOINT_CAP))
    return np.array(low), np.array(up)


def pattern_search(fun, x0, low, up, *, step=START_STEP, min_step=MIN_STEP,
                   max_evals=MAX_EVALUATIONS, f0=None):
    """Maximise ``fun`` over the box [low, up] by a compass-and-diagonal poll.

    ``fun`` maps an (m, d) array of points to m values (-inf marks
    infeasible).  Every poll visits the 3^d - 1 neighbours x + step*v with v
    in {-1, 0, 1}^d, clipped to the box; the best strict improvement is
    taken, otherwise the step is halved.  Returns (x, f, evaluations,
    converged).
    """
    x = np.clip(np.asarray(x0, dtype=float), low, up)
    d = x.size
    dirs = np.array([v for v in itertools.product((-1.0, 0.0, 1.0), repeat=d) if any(v)])
    evals = 0
    if f0 is None:
        f0 = float(fun(x[None, :])[0])
        evals += 1
    f = f0
    while step >= min_step:
        if evals + len(dirs) > max_evals:
            return x, f, evals, False
        cand = np.clip(x + step * dirs, low, up)
        vals = np.asarray(fun(cand), dtype=float)
        evals += len(dirs)
        j = int(np.argmax(vals))
        if vals[j] > f:
            x, f = cand[j], float(vals[j])
        else:
            step /= 2.0
    return x, f, evals, True


def refine(case: CaseId, h: float, start: CandidateParams, radius: float = 0.1) -> OptimResult:
    """Local max-min refinement inside the start point's grid cell."""
    case = CaseId(case)
    if not radius > 0:
        raise ValueError("radius must be > 0")
    fallback = None
    if case is CaseId.CASE2 and start.a1 is None and start.c1 is not None:
        # single-interval start: reopen a second endpoint midway to 0, but keep
        # the interval itself as the answer if the search cannot beat it
        fallback = start
        start = CandidateParams(c1=start.c1, a1=start.c1 / 2.0, p=P_CAP)
    c2_start = close_length(case, start, h)
    if not feasible(case, start, c2_start):
        raise InfeasibleError(f"{case.value}: start point {start} is infeasible")
    low, up = _refine_box(case, start, c2_start, radius)
    names = _COORDS[case]

    def fun(points):
        cols = {n: points[:, i] for i, n in enumerate(names)}
        v, _, _, _ = _objective_arr(case, h, cols.get("c1"), cols.get("a1"), cols["p"])
        return v

    x0 = np.array(start.coords(case), dtype=float)
    f_start = float(fun(x0[None, :])[0])
    x, f, evals, converged = pattern_search(fun, x0, low, up, f0=f_start)
    if not converged:
        log.warning("%s h=%g: possible non-convergence after %d evaluations", case.value, h, evals)
    params = CandidateParams.from_coords(case, x)
    merged = _canonical(case, params)
    if merged != params:
        v = float(fun(np.array([[merged.c1, 0.0, 1.0]]))[0])
        evals += 1
        # accept round-off level losses; never drop below the grid seed
        if v >= f - MERGE_SLACK and v >= f_start:
            params, f = merged, v
    if fallback is not None:
        v = float(fun(np.array([[fallback.c1, 0.0, 1.0]]))[0])
        evals += 1
        if v > f:
            params, f = fallback, v
        f_start = max(f_start, v)
    mix = build_mixture(case, params, h)
    check = min_coverage(mix, MIN_TOL)
    if abs(check.min_coverage - f) > 1e-6:
        log.warning("%s h=%g: lambda-min mismatch (%r vs %r)", case.value, h, f, check.min_coverage)
    return OptimResult(
        h=h, case=case, params=params, c2=close_length(case, params, h),
        min_coverage=f, lambda_star=check.lambda_star, converged=converged,
        evaluations=evals + 1, grid_value=f_start,
    )


def _canonical(case: CaseId, params: CandidateParams) -> CandidateParams:
    """Report a CASE2 point that is really one interval as p = 1 with a1 unused."""
    if case is not CaseId.CASE2:
        return params
    if params.p == 0.0:
        return CandidateParams(c1=params.a1, a1=None, p=1.0)
    if params.a1 - params.c1 <= MERGE_GAP:
        return CandidateParams(c1=params.p * params.c1 + (1.0 - params.p) * params.a1, a1=None, p=1.0)
    return params


def _small_h(h: float) -> OptimResult:
    params = CandidateParams(c1=0.0, a1=None, p=h)
    lm = min_coverage(build_mixture(CaseId.SMALL_H, params, h), MIN_TOL)
    return OptimResult(h=h, case=CaseId.SMALL_H, params=params, c2=1.0,
                       min_coverage=lm.min_coverage, lambda_star=lm.lambda_star,
                       converged=True, evaluations=1, grid_value=lm.min_coverage,
                       case_values={CaseId.SMALL_H.value: lm.min_coverage})


def solve_case(case: CaseId, h: float, mesh: float = 0.1) -> OptimResult:
    case = CaseId(case)
    params, _, n_grid = _grid_search(case, h, mesh)
    res = refine(case, h, params, radius=mesh)
    res.evaluations += n_grid
    return res


def solve(h: float, mesh: float = 0.1, cases=None, threads: int = 1) -> OptimResult:
    """Minimax two-point mixture of expected length h."""
    if not (h > 0 and math.isfinite(h)):
        raise ValueError(f"h must be a positive number, got {h}")
    if not mesh > 0:
        raise ValueError("mesh must be > 0")
    if h <= 1.0:
        return _small_h(h)
    order = CASE_ORDER if cases is None else tuple(c for c in CASE_ORDER if c in {CaseId(x) for x in cases})
    if not order:
        raise ValueError("no optimisable case selected")

    def run(case):
        try:
            return solve_case(case, h, mesh)
        except InfeasibleError as exc:
            log.info("%s", exc)
            return None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, order))
    else:
        results = [run(c) for c in order]
    found = [r for r in results if r is not None]
    if not found:
        raise InfeasibleError(f"every case is infeasible at h={h}")
    best = found[0]
    for r in found[1:]:
        if r.min_coverage > best.min_coverage:
            best = r
    best.case_values = {r.case.value: r.min_coverage for r in found}
    return best


def sweep(h_values, mesh: float = 0.1, cases=None, threads: int = 1) -> list:
    """solve() for each h, in input order; failures become SweepError rows."""
    h_values = list(h_values)
    if not h_values:
        raise ValueError("h_values must be nonempty")

    def run(h):
        try:
            return solve(h, mesh, cases)
        except (ValueError, ArithmeticError) as exc:
            return SweepError(h=h, error=str(exc))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, h_values))
    return [run(h) for h in h_values]
