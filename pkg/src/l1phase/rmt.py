"""Numerical checks of the Marchenko-Pastur facts behind universality.

For ``F`` a ``P x N`` matrix with i.i.d. ``N(0, 1/N)`` entries and
``alpha = P/N <= 1``, the eigenvalues of ``F^T F`` follow the density::

    (1 - alpha) delta(lam) + sqrt((lam_plus - lam)(lam - lam_minus)) / (2 pi lam)

on ``[lam_minus, lam_plus] = [(1 - sqrt(alpha))**2, (1 + sqrt(alpha))**2]``.
Its inverse Cauchy transform ``Lambda(x)`` yields
``G(x) = 1/2 int_0^x (Lambda(t) - 1/t) dt``, which should equal
``-(alpha/2) log(1 - x)``. Everything here is computed by quadrature and
root finding; the closed form only appears in the checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, NoRootError, ParameterError
from .numerics import find_root

X_MIN, X_MAX = -2.0, 0.5
G_ORDER = 24


@dataclass(frozen=True)
class MPDensity:
    alpha: float
    lambda_minus: float
    lambda_plus: float
    atom_weight: float


def mp_density(alpha: float) -> MPDensity:
    if not 0.0 < alpha <= 1.0:
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha!r}")
    sa = math.sqrt(alpha)
    return MPDensity(alpha, (1 - sa) ** 2, (1 + sa) ** 2, 1.0 - alpha)


def mp_continuous(alpha: float, lam):
    """Continuous part of the density; the atom at zero is excluded."""
    d = mp_density(alpha)
    lam = np.asarray(lam, dtype=float)
    inside = (lam > d.lambda_minus) & (lam < d.lambda_plus) & (lam > 0)
    safe = np.where(inside, lam, 1.0)
    val = np.sqrt(np.clip((d.lambda_plus - safe) * (safe - d.lambda_minus), 0, None)) / (2 * math.pi * safe)
    out = np.where(inside, val, 0.0)
    return out if out.ndim else float(out)


def _bulk_integral(d: MPDensity, g) -> float:
    """``int g(lam) rho_c(lam) dlam`` via ``lam = lam_minus + width * sin(theta)**2``."""
    width = d.lambda_plus - d.lambda_minus

    def integrand(theta):
        s, c = math.sin(theta), math.cos(theta)
        lam = d.lambda_minus + width * s * s
        return g(lam) * width * width * s * s * c * c / (math.pi * lam)

    val, _ = quad(integrand, 0.0, 0.5 * math.pi, epsabs=1e-15, epsrel=1e-13, limit=400)
    return val


def mp_moment(alpha: float, k: int) -> float:
    """``int lam**k drho`` including the atom (which only counts for k = 0)."""
    if not (isinstance(k, (int, np.integer)) and 0 <= k <= 8):
        raise ParameterError(f"k must be an integer in [0, 8], got {k!r}")
    d = mp_density(alpha)
    bulk = _bulk_integral(d, lambda lam: lam ** k)
    return bulk + (d.atom_weight if k == 0 else 0.0)


# The inverse Cauchy transform is solved in mu = 1/Lambda:
#   x = mu * m(mu),   m(mu) = int rho(lam) / (1 - mu lam) dlam,
# and Lambda - 1/x = k1(mu) / m(mu),   k1(mu) = int rho(lam) lam / (1 - mu lam),
# which stays finite and well conditioned as x -> 0.

def _m(d, mu):
    return d.atom_weight + _bulk_integral(d, lambda lam: 1.0 / (1.0 - mu * lam))


def _k1(d, mu):
    return _bulk_integral(d, lambda lam: lam / (1.0 - mu * lam))


def _solve_mu(d: MPDensity, x: float) -> float:
    if x == 0.0:
        return 0.0

    def f(mu):
        return mu * _m(d, mu) - x

    if x > 0:
        hi = 1.0 / d.lambda_plus
        fhi = f(hi)
        if abs(fhi) <= 1e-13:
            return hi
        if fhi < 0:
            raise DomainError(f"x={x!r} beyond the Cauchy transform at the spectral edge ({x - fhi!r})")
        bracket = (0.0, hi)
    else:
        lo = x
        for _ in range(200):
            if f(lo) < 0:
                break
            lo *= 2.0
        else:
            raise DomainError(f"no real Lambda for x={x!r}")
        bracket = (lo, 0.0)
    try:
        return find_root(f, bracket, tol=1e-15, max_expansions=0)
    except NoRootError as exc:
        raise DomainError(str(exc)) from exc


def _check_x(x):
    if not X_MIN <= x <= X_MAX:
        raise DomainError(f"x must lie in [{X_MIN}, {X_MAX}], got {x!r}")


def cauchy_lambda(alpha: float, x: float) -> float:
    """Solve ``x = int rho(lam) / (Lambda - lam) dlam`` for ``Lambda``.

    The branch with ``Lambda ~ 1/x`` as ``x -> 0`` is returned: ``Lambda``
    above the bulk for ``x > 0`` and negative for ``x < 0``.
    """
    d = mp_density(alpha)
    _check_x(x)
    if x == 0.0:
        raise DomainError("Lambda(0) is infinite")
    return 1.0 / _solve_mu(d, x)


def cauchy_residual(alpha: float, lam_big: float, x: float) -> float:
    """``int rho(lam)/(Lambda - lam) dlam - x`` evaluated directly."""
    d = mp_density(alpha)
    val = d.atom_weight / lam_big + _bulk_integral(d, lambda lam: 1.0 / (lam_big - lam))
    return val - x


def _lambda_minus_inverse(d, t):
    mu = _solve_mu(d, t)
    return _k1(d, mu) / _m(d, mu)


def g_transform(alpha: float, x: float, order: int = G_ORDER) -> float:
    """``G(x) = 1/2 int_0^x (Lambda(t) - 1/t) dt`` by Gauss-Legendre quadrature."""
    d = mp_density(alpha)
    _check_x(x)
    if x == 0.0:
        return 0.0
    t, w = np.polynomial.legendre.leggauss(order)
    nodes = 0.5 * x * (t + 1.0)
    vals = np.array([_lambda_minus_inverse(d, float(s)) for s in nodes])
    return 0.25 * x * float(np.dot(w, vals))


def g_closed_form(alpha: float, x: float) -> float:
    return -0.5 * alpha * math.log1p(-x)


def empirical_spectral_moments(
    P: int,
    N: int,
    k_max: int,
    samples: int,
    seed: int,
    return_stderr: bool = False,
):
    """Monte Carlo ``(1/N) tr((Xi^T Xi)^k)`` for ``k = 1..k_max``.

    ``Xi`` is ``P x N`` with i.i.d. ``N(0, 1/N)`` entries. Traces are taken
    on the ``P x P`` Gram matrix ``Xi Xi^T``, which has the same nonzero
    spectrum.
    """
    from .sensing import make_rng

    if not 1 <= N <= 1024:
        raise ParameterError(f"N must lie in [1, 1024], got {N!r}")
    if not 1 <= P <= N:
        raise ParameterError(f"P must lie in [1, N], got {P!r}")
    if not 1 <= k_max <= 4:
        raise ParameterError(f"k_max must lie in [1, 4], got {k_max!r}")
    if samples < 1:
        raise ParameterError("samples must be >= 1")
    rng = make_rng(seed, "spectral")
    traces = np.empty((samples, k_max))
    for i in range(samples):
        xi = rng.standard_normal((P, N)) / math.sqrt(N)
        gram = xi @ xi.T
        power = gram
        for k in range(k_max):
            traces[i, k] = np.trace(power) / N
            if k + 1 < k_max:
                power = power @ gram
    mean = traces.mean(axis=0)
    if not return_stderr:
        return mean
    se = traces.std(axis=0, ddof=1) / math.sqrt(samples) if samples > 1 else np.full(k_max, np.inf)
    return mean, se


@dataclass
class CheckResult:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tolerance)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: error={self.error:.3e} tol={self.tolerance:.1e}"


def rmt_checks(alpha: float = 0.5, n: int = 256, samples: int = 10, seed: int = 0, x_points: int = 11) -> list[CheckResult]:
    """Run the normalization, moment, G-transform and trace-moment checks."""
    mp_density(alpha)
    out = [
        CheckResult("normalization", abs(mp_moment(alpha, 0) - 1.0), 1e-8),
        CheckResult("first_moment", abs(mp_moment(alpha, 1) - alpha), 1e-6),
    ]
    xs = np.linspace(X_MIN, X_MAX, x_points)
    out.append(
        CheckResult("g_transform", max(abs(g_transform(alpha, float(x)) - g_closed_form(alpha, float(x))) for x in xs), 1e-6)
    )
    res = max(abs(cauchy_residual(alpha, cauchy_lambda(alpha, float(x)), float(x))) for x in xs if x != 0.0)
    out.append(CheckResult("cauchy_residual", res, 1e-10))
    P = max(1, int(round(alpha * n)))
    emp = empirical_spectral_moments(P, n, 3, samples, seed)
    for k in (1, 2, 3):
        exact = mp_moment(P / n, k)
        out.append(CheckResult(f"trace_moment_k{k}", abs(emp[k - 1] - exact) / exact, 0.03))
    return out
