"""l1 recovery threshold for the blockwise-correlated sensing model.

The sensing matrix is ``F = Xi @ sqrt(Rt)`` with ``Rt`` block diagonal in
2x2 blocks ``[[1, r], [r, 1]]``. At the bifurcation the threshold solves::

    alpha   = E[V(z1, z2, chi_hat)] / (2 sqrt(chi_hat))
    chi_hat = E[W(z1, z2, chi_hat)] / (2 alpha)

over independent standard normal ``z1, z2``. ``V`` and ``W`` average the
closed-form solutions ``x_{xi1,xi2}`` of the pairwise inner problem over the
support pattern ``(xi1, xi2)`` and the signs ``(sigma1, sigma2)`` of the
nonzero inputs.

The closed forms equal ``(1 - r**2)`` times the rescaled deviation ``u`` of
the pair minimizer from the input. ``V`` is linear in ``x`` and carries one
factor ``1 / (1 - r**2)``; ``W`` is quadratic in ``x`` and carries
``1 / (1 - r**2)**2`` so that ``W`` averages ``u^T Rt_B u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import L1PhaseError, NoRootError, ParameterError
from .numerics import QuadratureRule, find_root, piecewise_gaussian_rule_2d
from .universal import CHI_BRACKET, ROOT_TOL, ThresholdPoint

R_MAX = 0.99
PATTERNS = ((0, 0), (0, 1), (1, 0), (1, 1))
SIGNS = ((1, 1), (1, -1), (-1, 1), (-1, -1))


@dataclass(frozen=True)
class BlockCorrelation:
    """Coefficients of the 2x2 correlation block and its symmetric root."""

    r: float
    l_plus: float
    l_minus: float
    l_hat_plus: float
    l_hat_minus: float

    @property
    def rt_block(self) -> np.ndarray:
        return np.array([[1.0, self.r], [self.r, 1.0]])

    @property
    def sqrt_rt_block(self) -> np.ndarray:
        return np.array([[self.l_plus, self.l_minus], [self.l_minus, self.l_plus]])

    def swapped(self) -> "BlockCorrelation":
        """Coefficients with ``+`` and ``-`` exchanged (second coordinate)."""
        return BlockCorrelation(self.r, self.l_minus, self.l_plus, self.l_hat_minus, self.l_hat_plus)


def block_correlation(r: float) -> BlockCorrelation:
    if not abs(r) < 1.0:
        raise ParameterError(f"|r| must be < 1, got {r!r}")
    a, b = math.sqrt(1.0 + r), math.sqrt(1.0 - r)
    lp, lm = 0.5 * (a + b), 0.5 * (a - b)
    return BlockCorrelation(float(r), lp, lm, lp - r * lm, lm - r * lp)


def omega(eta, x):
    """``x`` where ``eta * x > 0``, else zero."""
    x = np.asarray(x, dtype=float)
    out = np.where(eta * x > 0, x, 0.0)
    return out if out.ndim else float(out)


def _step(x):
    return (np.asarray(x) > 0).astype(float)


def _soft(x):
    return omega(1, x - 1.0) + omega(-1, x + 1.0)


def _x00_first(z1, z2, s, bc):
    r = bc.r
    a = (bc.l_hat_plus * z1 + bc.l_hat_minus * z2) * s
    b = (bc.l_hat_minus * z1 + bc.l_hat_plus * z2) * s
    c = (bc.l_plus * z1 + bc.l_minus * z2) * s
    out = 0.0
    # both coordinates active with signs (eta1, eta2)
    for e1 in (1, -1):
        for e2 in (1, -1):
            out = out + omega(e1, a + r * e2 - e1) * _step(e2 * (b + r * e1 - e2))
    # first active, second pinned at zero
    for e in (1, -1):
        out = out + (1 - r * r) * omega(e, c - e) * _step(b + r * e + 1) * _step(-(b + r * e - 1))
    return out


def x_pair(xi1, xi2, sigma1, sigma2, z1, z2, s, bc: BlockCorrelation):
    """Closed-form pair solution ``(x1, x2)`` for support pattern ``(xi1, xi2)``.

    ``xi = 0`` marks a zero input and ``xi = 1`` a nonzero one whose sign is
    ``sigma``. Signs of zero inputs are accepted and ignored.
    """
    if not s > 0:
        raise ParameterError(f"s must be positive, got {s!r}")
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    r = bc.r
    if (xi1, xi2) == (0, 0):
        return _x00_first(z1, z2, s, bc), _x00_first(z1, z2, s, bc.swapped())
    if (xi1, xi2) == (0, 1):
        x1 = _soft((bc.l_hat_plus * z1 + bc.l_hat_minus * z2) * s + r * sigma2)
        x2 = -r * x1 + (1 - r * r) * ((bc.l_minus * z1 + bc.l_plus * z2) * s - sigma2)
        return x1, x2
    if (xi1, xi2) == (1, 0):
        x2 = _soft((bc.l_hat_minus * z1 + bc.l_hat_plus * z2) * s + r * sigma1)
        x1 = -r * x2 + (1 - r * r) * ((bc.l_plus * z1 + bc.l_minus * z2) * s - sigma1)
        return x1, x2
    if (xi1, xi2) == (1, 1):
        x1 = (bc.l_hat_plus * z1 + bc.l_hat_minus * z2) * s - sigma1 + r * sigma2
        x2 = (bc.l_hat_minus * z1 + bc.l_hat_plus * z2) * s - sigma2 + r * sigma1
        return x1, x2
    raise ParameterError(f"xi must be 0 or 1, got {(xi1, xi2)!r}")


def _pattern_weight(xi1, xi2, rho):
    return (rho if xi1 else 1 - rho) * (rho if xi2 else 1 - rho)


def _integrands(z1, z2, chi_hat, rho, bc):
    if not chi_hat > 0:
        raise ParameterError(f"chi_hat must be positive, got {chi_hat!r}")
    s = math.sqrt(chi_hat)
    r = bc.r
    S = bc.sqrt_rt_block
    # projections of z onto the columns of sqrt(Rt_B): sum_i z_i S_ij
    p1 = S[0, 0] * z1 + S[1, 0] * z2
    p2 = S[0, 1] * z1 + S[1, 1] * z2
    V = np.zeros(np.broadcast(z1, z2).shape)
    W = np.zeros_like(V)
    for xi1, xi2 in PATTERNS:
        pw = _pattern_weight(xi1, xi2, rho)
        if pw == 0.0:
            continue
        for sg1, sg2 in SIGNS:
            x1, x2 = x_pair(xi1, xi2, sg1, sg2, z1, z2, s, bc)
            V += pw * (p1 * x1 + p2 * x2)
            W += pw * (x1 * x1 + 2 * r * x1 * x2 + x2 * x2)
    one_m = 1.0 - r * r
    return V / (4.0 * one_m), W / (4.0 * one_m * one_m)


def v_integrand(z1, z2, chi_hat, rho, bc: BlockCorrelation):
    return _integrands(np.asarray(z1, float), np.asarray(z2, float), chi_hat, rho, bc)[0]


def w_integrand(z1, z2, chi_hat, rho, bc: BlockCorrelation):
    return _integrands(np.asarray(z1, float), np.asarray(z2, float), chi_hat, rho, bc)[1]


def kink_lines(chi_hat: float, bc: BlockCorrelation) -> np.ndarray:
    """Lines ``a*z1 + b*z2 + c = 0`` on which V and W may fail to be smooth."""
    s = math.sqrt(chi_hat)
    r = bc.r
    dirs_four = [(bc.l_hat_plus, bc.l_hat_minus), (bc.l_hat_minus, bc.l_hat_plus)]
    dirs_two = [(bc.l_plus, bc.l_minus), (bc.l_minus, bc.l_plus)]
    rows = []
    for p, q in dirs_four:
        for off in (1 + r, 1 - r, -1 + r, -1 - r):
            rows.append((s * p, s * q, -off))
    for p, q in dirs_two:
        for off in (1.0, -1.0):
            rows.append((s * p, s * q, -off))
    return np.asarray(rows)


def blockwise_rhs(
    chi_hat: float,
    rho: float,
    r: float,
    quad: QuadratureRule | None = None,
    panel_order: int = 8,
) -> tuple[float, float]:
    """Evaluate ``(alpha, chi_rhs)`` at a trial ``chi_hat``.

    With ``quad=None`` (default) the double Gaussian integral uses a
    composite rule cut along the kink lines of the integrands. Passing a
    :class:`QuadratureRule` uses its tensor product instead.
    """
    bc = block_correlation(r)
    if not 0.0 < rho <= 1.0:
        raise ParameterError(f"rho must lie in (0, 1], got {rho!r}")
    if quad is None:
        z1, z2, w = piecewise_gaussian_rule_2d(kink_lines(chi_hat, bc), order=panel_order)
    else:
        if quad.order < 40:
            raise ParameterError("tensor Gauss-Hermite rule needs order >= 40")
        z1, z2, w = quad.tensor()
    V, W = _integrands(z1, z2, chi_hat, rho, bc)
    alpha = float(np.dot(w, V)) / (2.0 * math.sqrt(chi_hat))
    if not alpha > 0:
        raise L1PhaseError(f"non-positive alpha {alpha!r} at chi_hat={chi_hat!r}")
    chi_rhs = float(np.dot(w, W)) / (2.0 * alpha)
    return alpha, chi_rhs


def _check_domain(rho, r):
    if not 0.0 < rho < 1.0:
        raise ParameterError(f"rho must lie in (0, 1), got {rho!r}")
    if not abs(r) <= R_MAX:
        raise ParameterError(f"|r| must be <= {R_MAX} (1/(1-r^2) is ill-conditioned beyond), got {r!r}")


def blockwise_threshold(rho: float, r: float, quad: QuadratureRule | None = None, panel_order: int = 8) -> ThresholdPoint:
    """Solve the blockwise fixed point for ``chi_hat`` and return the threshold."""
    _check_domain(rho, r)

    def f(t):
        c = math.exp(t)
        return c - blockwise_rhs(c, rho, r, quad, panel_order)[1]

    lo, hi = (math.log(v) for v in CHI_BRACKET)
    t = find_root(f, (lo, hi), tol=ROOT_TOL)
    chi_hat = math.exp(t)
    alpha, _ = blockwise_rhs(chi_hat, rho, r, quad, panel_order)
    return ThresholdPoint(rho=float(rho), r=float(r), alpha=alpha, chi_hat=chi_hat)


@dataclass
class SurfaceCell:
    rho: float
    r: float
    point: ThresholdPoint | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.point is not None


def _surface_cell(args):
    rho, r = args
    try:
        return SurfaceCell(rho, r, point=blockwise_threshold(rho, r))
    except (ParameterError, NoRootError, L1PhaseError) as exc:
        return SurfaceCell(rho, r, error=f"{type(exc).__name__}: {exc}")


def threshold_surface(
    rho_grid: Sequence[float],
    r_grid: Sequence[float],
    workers: int = 1,
) -> list[list[SurfaceCell]]:
    """Row-major table (one row per rho) of blockwise thresholds.

    Failures are recorded per cell and never abort the sweep.
    """
    cells = [(float(p), float(q)) for p in rho_grid for q in r_grid]
    if workers > 1 and len(cells) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            flat = list(pool.map(_surface_cell, cells))
    else:
        flat = [_surface_cell(c) for c in cells]
    n = len(r_grid)
    return [flat[i * n:(i + 1) * n] for i in range(len(rho_grid))]
