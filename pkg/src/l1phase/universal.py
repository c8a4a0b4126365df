"""Universal l1 recovery threshold for i.i.d. Gaussian sensing matrices.

At the bifurcation the threshold is the pair ``(alpha, chi_hat)`` solving::

    alpha   = 2 (1 - rho) H(1/s) + rho
    chi_hat = [2 (1 - rho) ((chi_hat + 1) H(1/s) - s phi(1/s)) + rho (chi_hat + 1)] / alpha

with ``s = sqrt(chi_hat)``, ``H`` the Gaussian upper tail and ``phi`` the
standard normal density. Eliminating ``chi_hat`` gives the weak threshold
``alpha(rho)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import NoRootError, ParameterError
from .numerics import find_root, h_tail

# The fixed point is solved in t = log(chi_hat).
CHI_BRACKET = (1e-6, 1e6)
ROOT_TOL = 1e-13


@dataclass(frozen=True)
class ThresholdPoint:
    """A solved point ``(rho, r) -> (alpha, chi_hat)`` on the phase boundary.

    ``boundary`` is set for the degenerate end point ``rho == 1``, where
    ``alpha == 1`` and ``chi_hat`` is undetermined (stored as NaN).
    """

    rho: float
    r: float
    alpha: float
    chi_hat: float
    boundary: bool = False


def _check_rho(rho, allow_one=False):
    if not (0.0 < rho < 1.0 or (allow_one and rho == 1.0)):
        raise ParameterError(f"rho must lie in (0, 1{']' if allow_one else ')'}, got {rho!r}")


def universal_terms(chi_hat: float, rho: float) -> tuple[float, float]:
    """Return ``(alpha, mse)`` where ``mse`` is the bracketed numerator.

    ``mse`` is the expected squared rescaled deviation per coordinate, i.e.
    the right-hand side of the ``chi_hat`` equation before dividing by alpha.
    """
    if not chi_hat > 0:
        raise ParameterError(f"chi_hat must be positive, got {chi_hat!r}")
    _check_rho(rho, allow_one=True)
    s = math.sqrt(chi_hat)
    h = h_tail(1.0 / s)
    alpha = 2.0 * (1.0 - rho) * h + rho
    tail = s * math.exp(-0.5 / chi_hat) / math.sqrt(2.0 * math.pi)
    mse = 2.0 * (1.0 - rho) * ((chi_hat + 1.0) * h - tail) + rho * (chi_hat + 1.0)
    return alpha, mse


def universal_residual(chi_hat: float, rho: float) -> tuple[float, float]:
    """``(alpha, chi_hat - rhs)`` for the universal fixed-point equations."""
    alpha, mse = universal_terms(chi_hat, rho)
    return alpha, chi_hat - mse / alpha


def universal_threshold(rho: float) -> ThresholdPoint:
    """Solve the universal threshold equations at density ``rho``.

    ``rho == 1`` returns the boundary point ``alpha == 1`` with
    ``boundary=True``.
    """
    _check_rho(rho, allow_one=True)
    if rho == 1.0:
        return ThresholdPoint(rho=1.0, r=0.0, alpha=1.0, chi_hat=math.nan, boundary=True)

    def f(t):
        return universal_residual(math.exp(t), rho)[1]

    lo, hi = (math.log(v) for v in CHI_BRACKET)
    t = find_root(f, (lo, hi), tol=ROOT_TOL)
    chi_hat = math.exp(t)
    alpha, _ = universal_residual(chi_hat, rho)
    return ThresholdPoint(rho=float(rho), r=0.0, alpha=alpha, chi_hat=chi_hat)


def universal_curve(rho_grid: Sequence[float]) -> list[ThresholdPoint]:
    """Universal threshold at every density of a sorted grid."""
    grid = [float(v) for v in rho_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ParameterError("rho_grid must be sorted")
    out = []
    for rho in grid:
        _check_rho(rho)
        try:
            out.append(universal_threshold(rho))
        except NoRootError as exc:
            raise NoRootError(f"rho={rho}: {exc}", bracket=exc.bracket) from exc
    return out
