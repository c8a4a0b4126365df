"""Minimizer of the deformed l1 inner problem.

    phi(x) = (Q/2) x^T Rt x - h^T S x + ||x||_1,    S^T S = Rt,

by cyclic coordinate descent. Each coordinate subproblem is a scalar
quadratic plus ``|x_i|`` and is solved exactly by soft thresholding, so the
objective never increases. The reported value is ``min phi / N``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import FactorizationError, ParameterError
from .sensing import matrix_sqrt_sym


@dataclass(frozen=True)
class DeformedProblem:
    Rt: np.ndarray
    sqrt_Rt: np.ndarray
    h: np.ndarray
    Q_hat: float

    def __post_init__(self):
        Rt = np.asarray(self.Rt, dtype=float)
        S = np.asarray(self.sqrt_Rt, dtype=float)
        h = np.asarray(self.h, dtype=float)
        n = Rt.shape[0]
        if Rt.ndim != 2 or Rt.shape != (n, n) or S.shape != (n, n) or h.shape != (n,):
            raise ParameterError(f"shape mismatch: Rt {Rt.shape}, sqrt_Rt {S.shape}, h {h.shape}")
        if not self.Q_hat > 0:
            raise ParameterError(f"Q_hat must be positive, got {self.Q_hat!r}")
        scale = max(1.0, float(np.abs(Rt).max()))
        if not np.allclose(Rt, Rt.T, rtol=0, atol=1e-12 * scale):
            raise FactorizationError("Rt must be symmetric")
        try:
            np.linalg.cholesky(Rt)
        except np.linalg.LinAlgError as exc:
            raise FactorizationError("Rt is not positive definite") from exc
        if not np.allclose(S.T @ S, Rt, rtol=0, atol=1e-10 * scale):
            raise ParameterError("sqrt_Rt^T sqrt_Rt must equal Rt")
        object.__setattr__(self, "Rt", Rt)
        object.__setattr__(self, "sqrt_Rt", S)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "Q_hat", float(self.Q_hat))

    @classmethod
    def from_rt(cls, Rt, h, Q_hat=1.0) -> "DeformedProblem":
        """Build with the transposed Cholesky factor as the square root."""
        return cls(Rt, matrix_sqrt_sym(Rt), h, Q_hat)

    @property
    def N(self) -> int:
        return len(self.h)

    @property
    def linear(self) -> np.ndarray:
        """``g = S^T h``, the coefficient of ``x`` in the linear term."""
        return self.sqrt_Rt.T @ self.h

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * self.Q_hat * x @ self.Rt @ x - self.linear @ x + np.abs(x).sum())


@dataclass
class ProxResult:
    x_min: np.ndarray
    value: float
    converged: bool
    sweeps: int
    history: list[float] = field(default_factory=list, repr=False)

    def __iter__(self):
        # unpacks as (x_min, value)
        yield self.x_min
        yield self.value


@numba.njit(cache=True)
def _sweep(A, g, x, grad):
    """One cyclic pass; ``grad = A x`` is kept current. Returns max |dx|."""
    n = x.shape[0]
    big = 0.0
    for i in range(n):
        aii = A[i, i]
        t = g[i] - (grad[i] - aii * x[i])
        if t > 1.0:
            xn = (t - 1.0) / aii
        elif t < -1.0:
            xn = (t + 1.0) / aii
        else:
            xn = 0.0
        d = xn - x[i]
        if d != 0.0:
            for j in range(n):
                grad[j] += A[j, i] * d
            x[i] = xn
            if abs(d) > big:
                big = abs(d)
    return big


def stationarity(problem: DeformedProblem, x) -> tuple[float, float]:
    """Worst violations ``(off_support, on_support)`` of the optimality conditions.

    ``off_support`` is ``max(|Q (Rt x)_i - g_i|) - 1`` over zero entries and
    ``on_support`` is ``max |Q (Rt x)_i - g_i + sign(x_i)|`` over the rest.
    """
    x = np.asarray(x, dtype=float)
    r = problem.Q_hat * (problem.Rt @ x) - problem.linear
    zero = x == 0
    off = float(np.max(np.abs(r[zero]))) - 1.0 if zero.any() else -np.inf
    on = float(np.max(np.abs(r[~zero] + np.sign(x[~zero])))) if (~zero).any() else 0.0
    return off, on


def _refine(problem, x):
    """Exact solve on the current support; kept only if signs survive."""
    supp = np.flatnonzero(x)
    if not len(supp):
        return x
    A = problem.Q_hat * problem.Rt
    g = problem.linear
    xs = np.linalg.solve(A[np.ix_(supp, supp)], g[supp] - np.sign(x[supp]))
    if np.any(np.sign(xs) != np.sign(x[supp])):
        return x
    out = np.zeros_like(x)
    out[supp] = xs
    if problem.objective(out) > problem.objective(x) + 1e-12 * max(1.0, abs(problem.objective(x))):
        return x
    return out


def phi_tilde_min(
    problem: DeformedProblem,
    tol: float = 1e-10,
    max_sweeps: int = 100_000,
    x0=None,
) -> ProxResult:
    """Minimize the deformed objective; returns ``(x_min, value / N, ...)``.

    Sweeps stop once no coordinate moves by more than ``tol``. The support
    found is then re-solved exactly, which removes the residual
    coordinate-descent error. ``history`` holds the objective after every
    sweep (non-increasing).
    """
    A = np.ascontiguousarray(problem.Q_hat * problem.Rt)
    g = np.ascontiguousarray(problem.linear)
    x = np.zeros(problem.N) if x0 is None else np.array(x0, dtype=float)
    grad = A @ x
    history = [problem.objective(x)]
    converged = False
    sweeps = 0
    while sweeps < max_sweeps:
        change = _sweep(A, g, x, grad)
        sweeps += 1
        history.append(problem.objective(x))
        if change <= tol:
            converged = True
            break
    if converged:
        x = _refine(problem, x)
    return ProxResult(x, problem.objective(x) / problem.N, converged, sweeps, history)
