"""Command line front end: ``l1phase {threshold,surface,experiment,rmt-check}``.

Exit codes: 0 ok, 2 bad parameters or unusable paths, 3 no root found,
4 Monte Carlo campaign failure, 5 a verification check failed.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys

import numpy as np

from .errors import CampaignError, DomainError, NoRootError, ParameterError

EXIT_OK, EXIT_DOMAIN, EXIT_NOROOT, EXIT_CAMPAIGN, EXIT_CHECK = 0, 2, 3, 4, 5
SEED_ENV = "L1PHASE_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 itself; route through our handler for one code path
    def error(self, message):
        raise UsageError(message)


def _g12(x) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else format(float(x), ".12g")


def parse_grid(spec: str) -> list[float]:
    """``start:stop:step`` (stop inclusive) or a single number."""
    parts = spec.split(":")
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"malformed grid spec {spec!r}") from None
    if len(nums) == 1:
        return nums
    if len(nums) != 3:
        raise UsageError(f"grid spec must be start:stop:step, got {spec!r}")
    a, b, h = nums
    if not (h > 0 and b >= a) or not all(map(math.isfinite, nums)):
        raise UsageError(f"grid spec needs step > 0 and stop >= start, got {spec!r}")
    n = int(math.floor((b - a) / h + 1e-9)) + 1
    return [round(a + k * h, 12) for k in range(n)]


def _parse_n_list(spec: str) -> list[int]:
    try:
        out = [int(v) for v in spec.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"malformed N list {spec!r}") from None
    if not out:
        raise UsageError("empty N list")
    return out


def _threads(n: int) -> int:
    if n < 0:
        raise UsageError("--threads must be >= 0")
    return n or (os.cpu_count() or 1)


def _meta(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _prepare_dir(path):
    from .experiment import ensure_dir

    try:
        ensure_dir(path)
    except OSError as exc:
        raise UsageError(f"cannot use output directory {path!r}: {exc}") from None


# -- commands -------------------------------------------------------------------

def cmd_threshold(args) -> int:
    from .blockwise import blockwise_threshold, _check_domain
    from .universal import universal_threshold

    if args.kind == "universal":
        if args.r not in (None, 0.0):
            raise UsageError("the universal threshold has no r parameter")
        pt = universal_threshold(args.rho)
    else:
        r = 0.0 if args.r is None else args.r
        _check_domain(args.rho, r)
        pt = blockwise_threshold(args.rho, r, panel_order=args.panel_order)
    row = [_g12(pt.rho), _g12(pt.r), _g12(pt.alpha), _g12(pt.chi_hat)]
    print("rho,r,alpha,chi_hat")
    print(",".join(row))
    if args.csv:
        new = not os.path.exists(args.csv)
        with open(args.csv, "a", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if new:
                w.writerow(["rho", "r", "alpha", "chi_hat"])
            w.writerow(row)
    return EXIT_OK


def cmd_surface(args) -> int:
    from .blockwise import R_MAX, threshold_surface

    rho = parse_grid(args.rho)
    r = parse_grid(args.r)
    if any(not 0.0 < v < 1.0 for v in rho):
        raise ParameterError("every rho must lie in (0, 1)")
    if any(abs(v) > R_MAX for v in r):
        raise ParameterError(f"every |r| must be <= {R_MAX}")
    out_dir = os.path.dirname(os.path.abspath(args.out))
    _prepare_dir(out_dir)
    table = threshold_surface(rho, r, workers=_threads(args.threads))
    alpha = np.full((len(rho), len(r)), np.nan)
    with open(args.out, "w", newline="") as fh:
        for k, v in _meta(args).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rho", "r", "alpha", "chi_hat", "status"])
        for i, row in enumerate(table):
            for j, cell in enumerate(row):
                if cell.ok:
                    alpha[i, j] = cell.point.alpha
                    w.writerow([_g12(cell.rho), _g12(cell.r), _g12(cell.point.alpha), _g12(cell.point.chi_hat), "ok"])
                else:
                    w.writerow([_g12(cell.rho), _g12(cell.r), "", "", cell.error.replace(",", ";")])
    failed = int(np.isnan(alpha).sum())
    print(f"wrote {args.out} ({alpha.size - failed}/{alpha.size} cells solved)")
    if not args.no_plot:
        from .plotting import plot_deviation, plot_surface

        stem = os.path.splitext(args.out)[0]
        plot_surface(rho, r, alpha, stem + "_alpha.png")
        if len(r) > 1:
            plot_deviation(rho, r, alpha, stem + "_deviation.png")
    return EXIT_OK


def _analytic(rho, r):
    from .blockwise import blockwise_threshold
    from .universal import universal_threshold

    try:
        return (universal_threshold(rho) if r == 0.0 else blockwise_threshold(rho, r)).alpha
    except (ParameterError, NoRootError):
        return math.nan


def cmd_experiment(args) -> int:
    from . import experiment as ex
    from .solver import SolverOptions

    n_list = _parse_n_list(args.n_list)
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    for n in n_list:
        ex._check_trial_args(n, args.rho, args.r)
    _prepare_dir(args.out_dir)
    opts = SolverOptions(max_iterations=args.max_iterations)
    meta = _meta(args)
    status = EXIT_OK
    try:
        result = ex.run_campaign(n_list, args.trials, args.rho, args.r, args.master_seed, opts,
                                 workers=_threads(args.threads), norm=args.norm)
    except CampaignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        result, status = exc.result, EXIT_CAMPAIGN

    join = os.path.join
    ex.write_raw_csv(join(args.out_dir, "raw.csv"), result.records, meta)
    ex.write_summary_csv(join(args.out_dir, "summary.csv"), result.summaries, meta)
    for s in result.summaries:
        print(f"N={s.N} trials={s.trials} mean_alpha={s.mean_alpha:.6f} std_error={s.std_error:.6f}")
    analytic = _analytic(args.rho, args.r)
    fit = None
    if len(result.summaries) >= 3:
        fit = ex.extrapolate(result.summaries)
        ex.write_fit_report(join(args.out_dir, "fit.txt"), fit, meta)
        print(f"alpha_infinity={fit.c0:.6f} c0_stderr={fit.c0_std_error:.6f} analytic={_g12(analytic)} "
              f"difference={fit.c0 - analytic:+.6f}")
    else:
        print(f"alpha_infinity=n/a (need 3 sizes) analytic={_g12(analytic)}")
    if not args.no_plot:
        from .plotting import plot_extrapolation

        plot_extrapolation(result.summaries, fit, join(args.out_dir, "extrapolation.png"), analytic)
    return status


def cmd_rmt_check(args) -> int:
    from .rmt import mp_density, rmt_checks

    mp_density(args.alpha)
    if not 1 <= args.n <= 1024:
        raise ParameterError("--n must lie in [1, 1024]")
    results = rmt_checks(args.alpha, args.n, args.samples, args.seed)
    for c in results:
        print(c.line())
    return EXIT_OK if all(c.passed for c in results) else EXIT_CHECK


# -- wiring -----------------------------------------------------------------------

def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="l1phase", description="l1 recovery thresholds and row-deletion experiments")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("threshold", help="analytic recovery threshold at one point")
    t.add_argument("kind", choices=["universal", "blockwise"])
    t.add_argument("--rho", type=float, required=True)
    t.add_argument("--r", type=float, default=None)
    t.add_argument("--panel-order", type=int, default=8, help="Gauss-Legendre points per panel")
    t.add_argument("--csv", help="append the result row to this CSV file")
    t.set_defaults(func=cmd_threshold)

    s = sub.add_parser("surface", help="blockwise threshold on a (rho, r) grid")
    s.add_argument("--rho", required=True, help="start:stop:step")
    s.add_argument("--r", required=True, help="start:stop:step")
    s.add_argument("--out", required=True)
    s.add_argument("--threads", type=int, default=1, help="0 = all cores")
    s.add_argument("--no-plot", action="store_true")
    s.set_defaults(func=cmd_surface)

    e = sub.add_parser("experiment", help="row-deletion Monte Carlo and N->inf extrapolation")
    e.add_argument("--rho", type=float, required=True)
    e.add_argument("--r", type=float, default=0.0)
    e.add_argument("--n-list", default="32,48,64")
    e.add_argument("--trials", type=int, default=2000)
    e.add_argument("--master-seed", type=int, default=None)
    e.add_argument("--out-dir", required=True)
    e.add_argument("--threads", type=int, default=1, help="0 = all cores")
    e.add_argument("--norm", choices=["l2", "linf"], default="l2")
    e.add_argument("--max-iterations", type=int, default=50_000)
    e.add_argument("--no-plot", action="store_true")
    e.set_defaults(func=cmd_experiment)

    c = sub.add_parser("rmt-check", help="Marchenko-Pastur and G-transform checks")
    c.add_argument("--alpha", type=float, default=0.5)
    c.add_argument("--n", type=int, default=256)
    c.add_argument("--samples", type=int, default=10)
    c.add_argument("--seed", type=int, default=None)
    c.set_defaults(func=cmd_rmt_check)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "master_seed", 0) is None:
            args.master_seed = _default_seed()
        if getattr(args, "seed", 0) is None:
            args.seed = _default_seed()
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (ParameterError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except NoRootError as exc:
        print(f"error: no root: {exc}", file=sys.stderr)
        return EXIT_NOROOT
    except CampaignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAMPAIGN


if __name__ == "__main__":
    sys.exit(main())
