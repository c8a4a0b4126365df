"""Row-deletion recovery experiment and finite-size extrapolation.

One trial draws a square ``N x N`` instance and deletes the last row of
``F`` (and entry of ``y``) one at a time, solving basis pursuit at every
``P``. The first ``P`` at which recovery fails gives ``Pc = P + 1``.
Averages of ``Pc / N`` over trials at several ``N`` are then extrapolated
to ``N -> inf`` by a quadratic fit in ``1/N``.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import CampaignError, DegeneracyError, ParameterError
from .numerics import polyfit_quadratic_cov
from .sensing import derive_seed, sample_instance
from .solver import SolverOptions, basis_pursuit, check_recovery

UNCONVERGED_LIMIT = 0.01


@dataclass(frozen=True)
class TrialRecord:
    N: int
    rho: float
    r: float
    seed: int
    Pc: int
    solver_converged_all: bool
    trial_index: int = 0

    @property
    def alpha_c(self) -> float:
        return self.Pc / self.N


@dataclass(frozen=True)
class SizeSummary:
    N: int
    trials: int
    mean_alpha: float
    std_error: float


@dataclass(frozen=True)
class ExtrapolationFit:
    c0: float
    c1: float
    c2: float
    c0_std_error: float
    weighted: bool = True

    @property
    def alpha_infinity(self) -> float:
        return self.c0

    def __call__(self, N):
        u = 1.0 / np.asarray(N, dtype=float)
        return self.c0 + self.c1 * u + self.c2 * u * u


@dataclass
class CampaignResult:
    summaries: list[SizeSummary]
    records: list[TrialRecord] = field(repr=False)

    @property
    def unconverged_fraction(self) -> float:
        if not self.records:
            return 0.0
        return sum(not t.solver_converged_all for t in self.records) / len(self.records)


def _check_trial_args(N, rho, r):
    if not isinstance(N, (int, np.integer)) or N < 4:
        raise ParameterError(f"N must be an integer >= 4, got {N!r}")
    if r != 0.0 and N % 2:
        raise ParameterError(f"N must be even when r != 0, got {N}")
    if not 0.0 <= rho <= 1.0:
        raise ParameterError(f"rho must lie in [0, 1], got {rho!r}")
    if not abs(r) < 1.0:
        raise ParameterError(f"|r| must be < 1, got {r!r}")


def run_trial(
    N: int,
    rho: float,
    r: float,
    seed: int,
    solver_opts: SolverOptions | None = None,
    tol: float = 1e-4,
    norm: str = "l2",
    trial_index: int = 0,
) -> TrialRecord:
    """Delete rows until l1 recovery first fails and record ``Pc``."""
    _check_trial_args(N, rho, r)
    inst = sample_instance(N, N, rho, r, seed)
    x0 = inst.x0.values
    warm = None
    all_ok = True
    Pc = 1
    for P in range(N, 0, -1):
        # the previous solution stays feasible after dropping a constraint
        res = basis_pursuit(inst.F[:P], inst.y[:P], solver_opts, warm_start=warm)
        warm = res.state
        all_ok &= res.converged
        if not check_recovery(res.x_star, x0, tol, norm):
            Pc = P + 1
            break
    return TrialRecord(int(N), float(rho), float(r), int(seed), Pc, bool(all_ok), int(trial_index))


def summarize(N: int, records: Sequence[TrialRecord]) -> SizeSummary:
    if not records:
        raise ParameterError("no records to summarize")
    a = np.array([t.alpha_c for t in records])
    se = float(a.std(ddof=1) / math.sqrt(len(a))) if len(a) > 1 else 0.0
    return SizeSummary(int(N), len(a), float(a.mean()), se)


def _trial_job(args):
    N, rho, r, seed, opts, tol, norm, i = args
    return run_trial(N, rho, r, seed, opts, tol, norm, i)


def run_campaign(
    N_list: Sequence[int],
    trials_per_N: int,
    rho: float,
    r: float,
    master_seed: int,
    solver_opts: SolverOptions | None = None,
    workers: int = 1,
    tol: float = 1e-4,
    norm: str = "l2",
    progress: Callable[[int, int], None] | None = None,
) -> CampaignResult:
    """Run ``trials_per_N`` trials at each ``N`` and summarize per size.

    Trial ``i`` at size ``N`` uses the seed ``derive_seed(master_seed, N, i)``,
    so records do not depend on worker count or scheduling.

    Raises
    ------
    CampaignError
        If more than 1% of trials hit a non-converged solve. The finished
        :class:`CampaignResult` is attached as ``exc.result``.
    """
    N_list = [int(n) for n in N_list]
    if not N_list:
        raise ParameterError("N_list must be nonempty")
    if trials_per_N < 1:
        raise ParameterError("trials_per_N must be >= 1")
    for n in N_list:
        _check_trial_args(n, rho, r)
    jobs = [
        (n, float(rho), float(r), derive_seed(master_seed, n, i), solver_opts, tol, norm, i)
        for n in N_list
        for i in range(trials_per_N)
    ]
    records: list[TrialRecord] = []
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            # map preserves submission order
            for k, rec in enumerate(pool.map(_trial_job, jobs, chunksize=16)):
                records.append(rec)
                if progress:
                    progress(k + 1, len(jobs))
    else:
        for k, job in enumerate(jobs):
            records.append(_trial_job(job))
            if progress:
                progress(k + 1, len(jobs))

    summaries = [summarize(n, [t for t in records if t.N == n]) for n in dict.fromkeys(N_list)]
    result = CampaignResult(summaries, records)
    frac = result.unconverged_fraction
    if frac > UNCONVERGED_LIMIT:
        exc = CampaignError(f"{frac:.2%} of trials had non-converged solves (limit {UNCONVERGED_LIMIT:.0%})")
        exc.result = result
        raise exc
    return result


def extrapolate(summaries: Iterable[SizeSummary]) -> ExtrapolationFit:
    """Fit ``mean_alpha ~ c0 + c1/N + c2/N**2``, weighted by ``1/std_error**2``.

    When any size has zero standard error the fit falls back to uniform
    weights and the intercept error is estimated from the residuals (NaN
    with only three sizes).
    """
    summaries = list(summaries)
    if len({s.N for s in summaries}) < 3:
        raise DegeneracyError("need at least three distinct N")
    weighted = all(s.std_error > 0 for s in summaries)
    pts = [(1.0 / s.N, s.mean_alpha, 1.0 / s.std_error**2 if weighted else 1.0) for s in summaries]
    (c0, c1, c2), cov = polyfit_quadratic_cov(pts)
    if weighted:
        se = math.sqrt(cov[0, 0])
    else:
        u = np.array([p[0] for p in pts])
        v = np.array([p[1] for p in pts])
        dof = len(pts) - 3
        rss = float(np.sum((v - (c0 + c1 * u + c2 * u * u)) ** 2))
        se = math.sqrt(cov[0, 0] * rss / dof) if dof > 0 else math.nan
    return ExtrapolationFit(c0, c1, c2, se, weighted)


# -- files --------------------------------------------------------------------

RAW_COLUMNS = ("N", "rho", "r", "trial_index", "seed", "Pc", "alpha_c", "converged_all")
SUMMARY_COLUMNS = ("N", "trials", "mean_alpha", "std_error")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _header(fh, meta):
    for k, v in (meta or {}).items():
        fh.write(f"# {k}={v}\n")


def write_raw_csv(path, records: Sequence[TrialRecord], meta: dict | None = None) -> None:
    with open(path, "w", newline="") as fh:
        _header(fh, meta)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RAW_COLUMNS)
        for t in records:
            w.writerow([t.N, _fmt(t.rho), _fmt(t.r), t.trial_index, t.seed, t.Pc, _fmt(t.alpha_c), int(t.solver_converged_all)])


def write_summary_csv(path, summaries: Sequence[SizeSummary], meta: dict | None = None) -> None:
    with open(path, "w", newline="") as fh:
        _header(fh, meta)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for s in summaries:
            w.writerow([s.N, s.trials, _fmt(s.mean_alpha), _fmt(s.std_error)])


def write_fit_report(path, fit: ExtrapolationFit, meta: dict | None = None) -> None:
    with open(path, "w", newline="") as fh:
        _header(fh, meta)
        for k, v in (("c0", fit.c0), ("c0_stderr", fit.c0_std_error), ("c1", fit.c1), ("c2", fit.c2)):
            fh.write(f"{k}={_fmt(v)}\n")


def _data_lines(path):
    with open(path, newline="") as fh:
        return [ln for ln in fh if not ln.startswith("#")]


def read_raw_csv(path) -> list[TrialRecord]:
    rows = csv.DictReader(_data_lines(path))
    return [
        TrialRecord(int(d["N"]), float(d["rho"]), float(d["r"]), int(d["seed"]), int(d["Pc"]),
                    d["converged_all"] == "1", int(d["trial_index"]))
        for d in rows
    ]


def read_summary_csv(path) -> list[SizeSummary]:
    rows = csv.DictReader(_data_lines(path))
    return [SizeSummary(int(d["N"]), int(d["trials"]), float(d["mean_alpha"]), float(d["std_error"])) for d in rows]


def ensure_dir(path) -> None:
    """Create ``path`` if missing and fail early if it is not writable."""
    os.makedirs(path, exist_ok=True)
    if not os.access(path, os.W_OK | os.X_OK):
        raise PermissionError(f"output directory {path!s} is not writable")
