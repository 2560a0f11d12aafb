"""Command-line front end.

Exit codes: 0 on success, 2 on usage errors, 3 when a run completes but
reports a numerical failure (failed Monte Carlo check, infeasible or failed
optimisation rows).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from datetime import datetime, timezone

from . import __version__
from .intervals import EMPTY, IntervalRule, InvalidRuleError, MixtureRule, coverage_mixture
from .montecarlo import SimConfig, simulate_multivariate, simulate_univariate
from .multivariate import bound_constant, miss_prob_series_bound, mv_bound_report
from .optimizer import CaseId, InfeasibleError, SweepError, solve, sweep

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

OPTIM_COLUMNS = ["h", "case", "c1", "a1", "c2", "p", "lambda_star", "min_coverage",
                 "converged", "evaluations"]

# sign patterns of (c1, c2) used by verify-mc; coverage stays above 1e-5 at every lambda
VERIFY_LAMBDAS = (0.25, 0.5, 1.0, 2.0, 4.0)
VERIFY_RULES = (
    (-100.0, -1.0), (-50.0, -2.0), (-100.0, 0.0), (-30.0, 0.0), (-2.0, 2.0), (-1.0, 3.0),
    (-0.5, 1.0), (-4.0, 0.5), (0.0, 1.0), (0.0, 3.0), (0.5, 2.0), (1.0, 6.0),
)


class UsageError(Exception):
    pass


def fmt(value) -> str:
    """Stable text form: 10 significant digits, 'inf' for the infinite sentinel."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".10g")
    return str(value)


def _json_value(value):
    if isinstance(value, (bool, int)) or value is None:
        return value
    if isinstance(value, float):
        return fmt(value)
    return str(value)


def parse_range(text: str) -> list[float]:
    """'x' or 'start:stop:step' (inclusive) into a list of floats."""
    parts = text.split(":")
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"malformed number or range {text!r}") from None
    if any(not math.isfinite(v) for v in nums):
        raise UsageError(f"non-finite value in {text!r}")
    if len(nums) == 1:
        return nums
    if len(nums) != 3:
        raise UsageError(f"range must be start:stop:step, got {text!r}")
    start, stop, step = nums
    if step <= 0 or stop < start:
        raise UsageError(f"range needs step > 0 and stop >= start, got {text!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 12) for k in range(count)]


def parse_vector(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"malformed vector {text!r}") from None


def render(rows: list[dict], columns: list[str], fmt_name: str, extra: dict | None = None) -> str:
    if fmt_name == "json":
        body = [{k: _json_value(r.get(k)) for k in columns} for r in rows]
        doc = body if extra is None else {**{k: _json_value(v) for k, v in extra.items()}, "rows": body}
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([fmt(r.get(k)) for k in columns])
    return buf.getvalue()


def _optim_row(res) -> dict:
    if isinstance(res, SweepError):
        return {"h": res.h, "case": "ERROR"}
    return {
        "h": res.h, "case": res.case.value, "c1": res.params.c1, "a1": res.params.a1,
        "c2": res.c2, "p": res.params.p, "lambda_star": res.lambda_star,
        "min_coverage": res.min_coverage, "converged": res.converged,
        "evaluations": res.evaluations,
    }


def _rule_from_args(args) -> IntervalRule:
    if args.empty:
        return EMPTY
    if args.c1 is None or args.c2 is None:
        raise UsageError("give --c1 and --c2, or --empty")
    try:
        return IntervalRule(args.c1, args.c2)
    except InvalidRuleError as exc:
        raise UsageError(str(exc)) from None


def _sim_config(args) -> SimConfig:
    try:
        return SimConfig(seed=args.seed, n=args.n, streams=args.streams)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_coverage(args):
    rule = _rule_from_args(args)
    lams = parse_range(args.lam)
    rows = []
    status = EXIT_OK
    columns = ["lambda", "coverage"]
    if args.mc_check:
        columns += ["mc_estimate", "mc_se"]
    cfg = _sim_config(args) if args.mc_check else None
    for lam in lams:
        row = {"lambda": lam, "coverage": coverage_mixture(lam, MixtureRule.single(rule))}
        if cfg is not None:
            est = simulate_univariate(MixtureRule.single(rule), lam, cfg, args.threads)
            row.update(mc_estimate=est.estimate, mc_se=est.std_error)
            if abs(row["coverage"] - est.estimate) > 4.0 * est.std_error:
                status = EXIT_NUMERIC
        rows.append(row)
    return rows, columns, None, status


def _check_h(h: float) -> None:
    if not h > 0:
        raise UsageError(f"h must be > 0, got {h}")


def _cases(args):
    if not args.case:
        return None
    try:
        return [CaseId(c.strip().upper()) for c in args.case.split(",")]
    except ValueError:
        raise UsageError(f"unknown case in {args.case!r}") from None


def cmd_optimize(args):
    _check_h(args.h)
    if not args.mesh > 0:
        raise UsageError("mesh must be > 0")
    try:
        res = solve(args.h, args.mesh, _cases(args), threads=args.threads)
    except InfeasibleError as exc:
        logging.getLogger(__name__).error("%s", exc)
        return [_optim_row(SweepError(args.h, str(exc)))], OPTIM_COLUMNS, None, EXIT_NUMERIC
    return [_optim_row(res)], OPTIM_COLUMNS, None, EXIT_OK


def cmd_sweep(args):
    hs = parse_range(args.h_grid)
    for h in hs:
        _check_h(h)
    if not args.mesh > 0:
        raise UsageError("mesh must be > 0")
    results = sweep(hs, args.mesh, _cases(args), threads=args.threads)
    status = EXIT_OK
    for r in results:
        if isinstance(r, SweepError):
            logging.getLogger(__name__).error("h=%s: %s", fmt(r.h), r.error)
            status = EXIT_NUMERIC
    return [_optim_row(r) for r in results], OPTIM_COLUMNS, None, status


def cmd_verify_mc(args):
    cfg = _sim_config(args)
    lams = parse_range(args.lam) if args.lam else list(VERIFY_LAMBDAS)
    if args.c1 is not None or args.c2 is not None or args.empty:
        rules = [_rule_from_args(args)]
    else:
        rules = [IntervalRule(a, b) for a, b in VERIFY_RULES]
    rows = []
    status = EXIT_OK
    for rule in rules:
        mix = MixtureRule.single(rule)
        for lam in lams:
            exact = coverage_mixture(lam, mix)
            est = simulate_univariate(mix, lam, cfg, args.threads)
            dev = abs(exact - est.estimate)
            ok = dev <= 4.0 * est.std_error
            if not ok:
                status = EXIT_NUMERIC
            rows.append({"lambda": lam, "c1": rule.c1, "c2": rule.c2, "coverage": exact,
                         "mc_estimate": est.estimate, "mc_se": est.std_error,
                         "z": dev / est.std_error if est.std_error > 0 else (0.0 if dev == 0 else math.inf),
                         "pass": ok})
    columns = ["lambda", "c1", "c2", "coverage", "mc_estimate", "mc_se", "z", "pass"]
    return rows, columns, None, status


def _check_mv(args):
    if int(args.p) != args.p or args.p < 1:
        raise UsageError(f"p must be an integer >= 1, got {args.p}")
    if not 0.0 < args.alpha < 1.0:
        raise UsageError(f"alpha must lie in (0, 1), got {args.alpha}")


MV_COLUMNS = ["p", "alpha", "c_simple", "c_refined", "a", "worst_miss", "worst_delta", "series_bound"]


def _mv_row(args) -> dict:
    report = mv_bound_report(int(args.p), args.alpha)
    row = report.as_dict()
    row["series_bound"] = miss_prob_series_bound(report.p, 0.0, report.c_simple)
    return row


def cmd_mv_bound(args):
    _check_mv(args)
    row = _mv_row(args)
    return [row], MV_COLUMNS, None, EXIT_OK


def cmd_mv_verify(args):
    _check_mv(args)
    mu = parse_vector(args.mu)
    eigs = parse_vector(args.sigma_eigs) if args.sigma_eigs else [1.0] * len(mu)
    if len(mu) != args.p or len(eigs) != args.p:
        raise UsageError("--mu and --sigma-eigs must each have p entries")
    if any(v <= 0 for v in eigs):
        raise UsageError("--sigma-eigs must be positive")
    cfg = _sim_config(args)
    row = _mv_row(args)
    c_simple, _, _ = bound_constant(int(args.p), args.alpha)
    est = simulate_multivariate(mu, eigs, c_simple, cfg, args.threads)
    row.update(estimate=est.estimate, std_error=est.std_error, n=est.n)
    status = EXIT_OK if est.estimate >= 1.0 - args.alpha - 4.0 * est.std_error else EXIT_NUMERIC
    return [row], MV_COLUMNS + ["estimate", "std_error", "n"], None, status


def _common(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--format", choices=["csv", "json"], default=d("csv"))
    parser.add_argument("--out", metavar="PATH", default=d(None),
                        help="output file (default stdout); a PATH.manifest.json sidecar is written")
    parser.add_argument("--seed", type=int, default=d(0))
    parser.add_argument("--threads", type=int, default=d(1))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minimax-ci", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        _common(p, suppress=True)
        p.set_defaults(func=func)
        return p

    def mc_flags(p):
        p.add_argument("--n", type=int, default=1_000_000)
        p.add_argument("--streams", type=int, default=8)

    def rule_flags(p):
        p.add_argument("--c1", type=float)
        p.add_argument("--c2", type=float)
        p.add_argument("--empty", action="store_true")

    p = add("coverage", cmd_coverage, "exact coverage of one interval rule")
    p.add_argument("--lambda", dest="lam", required=True, help="value or start:stop:step")
    rule_flags(p)
    p.add_argument("--mc-check", action="store_true")
    mc_flags(p)

    for name, func, help_text in (("optimize", cmd_optimize, "minimax rule for one h"),
                                  ("sweep", cmd_sweep, "minimax rules over an h grid")):
        p = add(name, func, help_text)
        if name == "optimize":
            p.add_argument("--h", type=float, required=True)
        else:
            p.add_argument("--h-grid", required=True, help="start:stop:step")
        p.add_argument("--mesh", type=float, default=0.1)
        p.add_argument("--case", help="comma-separated subset of CASE1,CASE2,CASE3,CASE7")

    p = add("verify-mc", cmd_verify_mc, "compare exact coverage with simulation")
    p.add_argument("--lambda", dest="lam")
    rule_flags(p)
    mc_flags(p)

    for name, func in (("mv-bound", cmd_mv_bound), ("mv-verify", cmd_mv_verify)):
        p = add(name, func, "multivariate norm-bound constant" if name == "mv-bound"
                else "multivariate bound checked by simulation")
        p.add_argument("--p", type=int, required=True)
        p.add_argument("--alpha", type=float, required=True)
        if name == "mv-verify":
            p.add_argument("--mu", required=True, help="comma-separated mean vector")
            p.add_argument("--sigma-eigs", help="comma-separated covariance eigenvalues (default all 1)")
            mc_flags(p)
    return parser


def _manifest(args) -> dict:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    return {
        "subcommand": args.command,
        "parameters": params,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        rows, columns, extra, status = args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    text = render(rows, columns, args.format, extra)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
        with open(args.out + ".manifest.json", "w", newline="") as fh:
            fh.write(json.dumps(_manifest(args), indent=2) + "\n")
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
