"""Equality-constrained l1 minimization (basis pursuit).

``minimize ||x||_1 subject to F x = y`` by ADMM on the splitting
``x = z``: Euclidean projection onto the affine set (cached through a
Cholesky factor of ``F F^T``) alternates with soft thresholding. Every few
iterations the current support is polished by least squares and, when a
dual vector certifies optimality of the polished point, the solve stops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import FactorizationError, ParameterError


@dataclass(frozen=True)
class SolverOptions:
    max_iterations: int = 50_000
    primal_tolerance: float = 1e-8
    dual_tolerance: float = 1e-8
    penalty: float = 1.0
    polish: bool = True
    # slack allowed on |F^T nu| <= 1 when certifying a polished point
    certificate_tolerance: float = 1e-6
    check_every: int = 20
    relaxation: float = 1.6

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be >= 1")
        if not (self.primal_tolerance > 0 and self.dual_tolerance > 0 and self.certificate_tolerance > 0):
            raise ParameterError("tolerances must be positive")
        if not self.penalty > 0:
            raise ParameterError("penalty must be positive")
        if not 0 < self.relaxation < 2:
            raise ParameterError("relaxation must lie in (0, 2)")
        if self.check_every < 1:
            raise ParameterError("check_every must be >= 1")


@dataclass
class RecoveryResult:
    x_star: np.ndarray
    iterations: int
    feasibility_residual: float
    objective: float
    converged: bool
    dual: np.ndarray | None = None
    polished: bool = False
    state: tuple | None = field(default=None, repr=False)


@numba.njit(cache=True)
def _admm_run(Pr, xls, z, u, rho, n_iter, relax, eps_abs, eps_rel):
    """Run up to ``n_iter`` ADMM steps in place; returns (rho, steps, done)."""
    n = xls.shape[0]
    x = np.empty(n)
    v = np.empty(n)
    sqrt_n = math.sqrt(n)
    for k in range(n_iter):
        for i in range(n):
            v[i] = z[i] - u[i]
        for i in range(n):
            acc = xls[i]
            for j in range(n):
                acc += Pr[i, j] * v[j]
            x[i] = acc
        thr = 1.0 / rho
        rp2 = 0.0
        rd2 = 0.0
        nx2 = 0.0
        nz2 = 0.0
        nu2 = 0.0
        for i in range(n):
            xh = relax * x[i] + (1.0 - relax) * z[i]
            w = xh + u[i]
            if w > thr:
                zn = w - thr
            elif w < -thr:
                zn = w + thr
            else:
                zn = 0.0
            u[i] = w - zn
            rp2 += (x[i] - zn) ** 2
            rd2 += (zn - z[i]) ** 2
            nx2 += x[i] * x[i]
            nz2 += zn * zn
            nu2 += u[i] * u[i]
            z[i] = zn
        r_p = math.sqrt(rp2)
        r_d = rho * math.sqrt(rd2)
        eps_p = eps_abs * sqrt_n + eps_rel * math.sqrt(max(nx2, nz2))
        eps_d = eps_abs * sqrt_n + eps_rel * rho * math.sqrt(nu2)
        if r_p <= eps_p and r_d <= eps_d:
            return rho, k + 1, True
        if (k + 1) % 10 == 0:
            # residual balancing; the scaled dual u = y/rho is rescaled with rho
            if r_p > 10.0 * r_d:
                rho *= 2.0
                for i in range(n):
                    u[i] *= 0.5
            elif r_d > 10.0 * r_p:
                rho *= 0.5
                for i in range(n):
                    u[i] *= 2.0
    return rho, n_iter, False


def feasibility(F, x, y) -> float:
    return float(np.linalg.norm(F @ x - y) / (1.0 + np.linalg.norm(y)))


def dual_certificate(F, x, nu, support_tol=0.0) -> tuple[float, float]:
    """``(max_i |(F^T nu)_i|, min_{x_i != 0} (F^T nu)_i sign(x_i))``.

    ``x`` is optimal when the first value is at most 1 and the second at
    least 1. An empty support yields ``inf`` for the second value.
    """
    c = F.T @ nu
    supp = np.abs(x) > support_tol
    align = float(np.min(c[supp] * np.sign(x[supp]))) if supp.any() else math.inf
    return float(np.max(np.abs(c))) if c.size else 0.0, align


class _Factor:
    def __init__(self, F):
        self.F = F
        P, N = F.shape
        if P > N:
            raise ParameterError(f"need P <= N, got {F.shape}")
        G = F @ F.T
        try:
            self.cho = cho_factor(G, lower=True)
        except np.linalg.LinAlgError as exc:
            raise FactorizationError("F F^T is not positive definite (F rank deficient)") from exc
        d = np.abs(np.diag(self.cho[0]))
        if d.min() <= 1e-10 * max(d.max(), 1e-300):
            raise FactorizationError("F F^T is numerically singular")

    def solve(self, b):
        return cho_solve(self.cho, b)


def _polish(F, y, fac, z, u, rho, opts):
    """Least squares on the support of ``z`` plus a dual certificate.

    Returns ``(x, nu)`` when the polished point is feasible and certified
    optimal, else ``None``.
    """
    P, N = F.shape
    supp = np.flatnonzero(z)
    if len(supp) > P:
        return None
    x = np.zeros(N)
    lam = rho * u
    nu = fac.solve(F @ lam)
    if len(supp):
        Fs = F[:, supp]
        xs, *_ = np.linalg.lstsq(Fs, y, rcond=None)
        if np.any(xs == 0) or np.any(np.sign(xs) != np.sign(z[supp])):
            return None
        x[supp] = xs
        # nearest dual vector (in the nu metric) meeting the support equality
        s = np.sign(xs)
        gram = Fs.T @ Fs
        try:
            corr = np.linalg.solve(gram, s - Fs.T @ nu)
        except np.linalg.LinAlgError:
            return None
        nu = nu + Fs @ corr
    if feasibility(F, x, y) > opts.primal_tolerance:
        return None
    c = F.T @ nu
    if np.max(np.abs(c), initial=0.0) > 1.0 + opts.certificate_tolerance:
        return None
    return x, nu


def basis_pursuit(F, y, opts: SolverOptions | None = None, warm_start=None) -> RecoveryResult:
    """Solve ``min ||x||_1 s.t. F x = y`` for full-row-rank ``F``.

    ``warm_start`` takes the ``state`` of an earlier result (``(z, u, rho)``
    over the same columns). Hitting the iteration cap returns a result with
    ``converged=False`` rather than raising.
    """
    opts = opts or SolverOptions()
    F = np.ascontiguousarray(F, dtype=float)
    y = np.asarray(y, dtype=float)
    if F.ndim != 2 or y.shape != (F.shape[0],):
        raise ParameterError(f"shape mismatch: F {F.shape}, y {y.shape}")
    P, N = F.shape
    fac = _Factor(F)
    xls = F.T @ fac.solve(y)
    Pr = np.eye(N) - F.T @ fac.solve(F)
    Pr = np.ascontiguousarray(Pr)

    if warm_start is not None:
        z0, u0, rho = warm_start
        z, u = np.array(z0, dtype=float), np.array(u0, dtype=float)
    else:
        z, u, rho = xls.copy(), np.zeros(N), opts.penalty
    tol = min(opts.primal_tolerance, opts.dual_tolerance)

    it = 0
    nu = None
    while it < opts.max_iterations:
        n = min(opts.check_every, opts.max_iterations - it)
        rho, steps, done = _admm_run(Pr, xls, z, u, rho, n, opts.relaxation, tol * 1e-2, tol)
        it += steps
        if opts.polish:
            pol = _polish(F, y, fac, z, u, rho, opts)
            if pol is not None:
                x, nu = pol
                return RecoveryResult(
                    x, it, feasibility(F, x, y), float(np.abs(x).sum()), True, nu, True, (x.copy(), u.copy(), rho)
                )
        if done:
            break
    x = z.copy()
    nu = fac.solve(F @ (rho * u))
    feas = feasibility(F, x, y)
    converged = it < opts.max_iterations and feas <= opts.primal_tolerance
    return RecoveryResult(x, it, feas, float(np.abs(x).sum()), converged, nu, False, (z, u, rho))


def check_recovery(x_star, x0, tol: float = 1e-4, norm: str = "l2") -> bool:
    """Success iff ``||x_star - x0|| <= tol`` (l2 by default, or ``"linf"``)."""
    a = np.asarray(x_star, dtype=float)
    b = np.asarray(x0, dtype=float)
    if a.shape != b.shape:
        raise ParameterError(f"length mismatch: {a.shape} vs {b.shape}")
    if norm == "l2":
        d = np.linalg.norm(a - b)
    elif norm == "linf":
        d = np.max(np.abs(a - b), initial=0.0)
    else:
        raise ParameterError(f"norm must be 'l2' or 'linf', got {norm!r}")
    return bool(d <= tol)
