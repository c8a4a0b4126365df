"""Shared numeric kernels.

Gaussian quadrature for integrals against the standard normal measure,
the Gaussian tail function, a bracketed scalar root finder and a small
weighted quadratic regression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import roots_hermitenorm

from .errors import DegeneracyError, NoRootError, ParameterError

MAX_GH_ORDER = 512


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights for ``E[f(Z)]``, ``Z ~ N(0, 1)``.

    Weights sum to one, so ``rule.integrate(f) == sum(w * f(z))``.
    """

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def order(self) -> int:
        return len(self.nodes)

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.weights, f(self.nodes)))

    def tensor(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Tensor-product rule on the plane: ``(z1, z2, w)`` flattened."""
        z1, z2 = np.meshgrid(self.nodes, self.nodes, indexing="ij")
        w = np.outer(self.weights, self.weights)
        return z1.ravel(), z2.ravel(), w.ravel()


def gauss_hermite(order: int) -> QuadratureRule:
    """Probabilists' Gauss-Hermite rule with weights normalized to one.

    Exact for polynomials of degree ``2 * order - 1`` under the standard
    Gaussian measure. Above order ~360 the outermost weights underflow to
    zero in double precision.
    """
    if not isinstance(order, (int, np.integer)) or not 1 <= order <= MAX_GH_ORDER:
        raise ParameterError(f"order must be an integer in [1, {MAX_GH_ORDER}], got {order!r}")
    nodes, weights = roots_hermitenorm(int(order))
    nodes = np.asarray(nodes, dtype=float)
    # symmetrize: round-off in the eigen solve breaks exact antisymmetry
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = np.asarray(weights, dtype=float)
    weights = 0.5 * (weights + weights[::-1])
    weights = weights / weights.sum()
    return QuadratureRule(nodes, weights)


def h_tail(x: float) -> float:
    """Upper Gaussian tail ``P(Z > x)`` for a standard normal ``Z``."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def gaussian_pdf(x):
    return np.exp(-0.5 * np.square(x)) / math.sqrt(2.0 * math.pi)


def find_root(
    f: Callable[[float], float],
    bracket: tuple[float, float],
    tol: float = 1e-12,
    max_expansions: int = 64,
    factor: float = 10.0,
) -> float:
    """Root of a scalar function inside (or near) ``bracket``.

    If ``f`` has the same sign at both ends, the bracket is widened
    geometrically about its midpoint until it straddles a sign change.
    The inner solve is Brent's method (bisection safeguarded by secant and
    inverse quadratic steps) with mixed tolerance ``tol * max(1, |x|) + tol``.

    Raises
    ------
    NoRootError
        If no sign change is found after ``max_expansions`` widenings.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise ParameterError(f"bracket must satisfy lo < hi, got {bracket!r}")
    flo, fhi = f(lo), f(hi)
    n = 0
    while flo * fhi > 0:
        if n >= max_expansions:
            raise NoRootError(f"no sign change in [{lo!r}, {hi!r}]", bracket=(lo, hi))
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo) * factor
        lo, hi = mid - half, mid + half
        flo, fhi = f(lo), f(hi)
        n += 1
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    # brentq's own stopping is 2*|x|*rtol + xtol
    rtol = max(tol, 4 * np.finfo(float).eps)
    return float(brentq(f, lo, hi, xtol=tol, rtol=rtol, maxiter=500))


def polyfit_quadratic(points: Iterable[Sequence[float]]) -> tuple[float, float, float]:
    """Weighted least squares ``v ~ c0 + c1*u + c2*u**2``.

    ``points`` holds ``(u, v, weight)`` triples. The normal equations are
    solved on a column-scaled design followed by one step of iterative
    refinement.
    """
    coef, _ = _quadratic_lstsq(points)
    return coef


def polyfit_quadratic_cov(points) -> tuple[tuple[float, float, float], np.ndarray]:
    """Like :func:`polyfit_quadratic` but also returns ``inv(X^T W X)``."""
    return _quadratic_lstsq(points)


def _quadratic_lstsq(points):
    pts = np.asarray([tuple(p) for p in points], dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 3:
        raise DegeneracyError("need at least three (u, v, weight) points")
    u, v, w = pts.T
    if np.any(~np.isfinite(pts)):
        raise ParameterError("points must be finite")
    if np.any(w <= 0):
        raise ParameterError("weights must be positive")
    if len(np.unique(u)) < 3:
        raise DegeneracyError("need at least three distinct u values")

    X = np.column_stack([np.ones_like(u), u, u * u])
    scale = np.sqrt((w[:, None] * X * X).sum(axis=0))
    Xs = X / scale
    A = (w[:, None] * Xs).T @ Xs
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise DegeneracyError("normal matrix is singular") from exc

    def solve(b):
        return np.linalg.solve(L.T, np.linalg.solve(L, b))

    c = solve(Xs.T @ (w * v))
    c = c + solve(Xs.T @ (w * (v - Xs @ c)))
    coef = c / scale
    Ainv = solve(np.eye(3))
    cov = Ainv / np.outer(scale, scale)
    return (float(coef[0]), float(coef[1]), float(coef[2])), cov


# -- piecewise-smooth Gaussian integration on the plane ----------------------

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_legendre(order):
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def _composite_rule(breaks, order, max_width, L):
    """Composite Gauss-Legendre rules on ``[-L, L]``, one per row of ``breaks``.

    A uniform grid of spacing ``max_width`` is merged into every row so no
    panel is wider than that. Breaks outside the interval are clipped to the
    ends, which only creates zero-width panels.
    """
    t, tw = _gauss_legendre(order)
    breaks = np.atleast_2d(np.asarray(breaks, dtype=float))
    rows = breaks.shape[0]
    n_uniform = max(1, int(math.ceil(2 * L / max_width)))
    uniform = np.broadcast_to(np.linspace(-L, L, n_uniform + 1), (rows, n_uniform + 1))
    clipped = np.clip(np.nan_to_num(breaks, nan=L, posinf=L, neginf=-L), -L, L)
    edges = np.sort(np.concatenate([clipped, uniform], axis=1), axis=1)
    a, b = edges[:, :-1], edges[:, 1:]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b))[..., None] + half[..., None] * t
    weights = half[..., None] * tw
    return nodes.reshape(rows, -1), weights.reshape(rows, -1)


def piecewise_gaussian_rule_2d(
    lines: np.ndarray,
    half_width: float = 9.0,
    order: int = 8,
    max_width: float = 1.5,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cubature for ``E[f(Z1, Z2)]`` with ``f`` smooth away from given lines.

    Each row ``(a, b, c)`` of ``lines`` is the line ``a*z1 + b*z2 + c = 0``
    across which ``f`` may have a kink or a jump. The square
    ``[-half_width, half_width]**2`` is cut so that every panel is free of
    lines: the outer ``z2`` axis breaks at line crossings and where lines
    enter the square, and for every outer node the inner ``z1`` axis breaks
    where the lines cross it. Each panel gets a Gauss-Legendre rule of
    ``order`` points, so piecewise polynomial ``f`` is integrated to near
    machine precision.

    Returns flattened ``(z1, z2, w)``; ``w`` includes the Gaussian density.
    """
    L = float(half_width)
    lines = np.atleast_2d(np.asarray(lines, dtype=float))
    a, b, c = lines.T
    norm = np.hypot(a, b)
    ok = norm > 0
    a, b, c = a[ok] / norm[ok], b[ok] / norm[ok], c[ok] / norm[ok]
    steep = np.abs(a) > 1e-14

    outer = [-c[~steep] / b[~steep]]
    nb = np.abs(b) > 1e-14
    for side in (-L, L):
        outer.append(-(c[nb] + a[nb] * side) / b[nb])
    i, j = np.triu_indices(len(a), k=1)
    det = a[i] * b[j] - a[j] * b[i]
    cross = np.abs(det) > 1e-12
    outer.append((a[j] * c[i] - a[i] * c[j])[cross] / det[cross])
    z2, w2 = _composite_rule(np.concatenate(outer)[None, :], order, max_width, L)
    z2, w2 = z2[0], w2[0]
    keep = w2 > 0
    z2, w2 = z2[keep], w2[keep]

    roots = -(z2[:, None] * b[steep] + c[steep]) / a[steep]
    z1, w1 = _composite_rule(roots, order, max_width, L)
    w = w1 * w2[:, None]
    z2 = np.broadcast_to(z2[:, None], z1.shape)
    keep = w > 0
    z1, z2, w = z1[keep], z2[keep], w[keep]
    return z1, z2, w * gaussian_pdf(z1) * gaussian_pdf(z2)
