"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``CRITERION n: PASS|FAIL ...`` line with the
measured numbers, then asserts. The Monte Carlo criteria (5, 6) take
tens of minutes on one core; ``L1PHASE_ACCEPTANCE_TRIALS`` overrides the
trial count per size (minimum 2000 for a faithful run).

Run alone with ``pytest tests/test_acceptance.py -v`` or
``python tests/test_acceptance.py``.
"""

import itertools
import math
import os
import sys
import time

import numpy as np
import pytest

from l1phase.blockwise import blockwise_threshold
from l1phase.experiment import extrapolate, run_campaign
from l1phase.numerics import gauss_hermite, h_tail, polyfit_quadratic
from l1phase.prox import DeformedProblem, phi_tilde_min, stationarity
from l1phase.rmt import empirical_spectral_moments, g_closed_form, g_transform, mp_moment
from l1phase.sensing import sample_instance
from l1phase.solver import basis_pursuit, dual_certificate
from l1phase.universal import universal_threshold

TRIALS = int(os.environ.get("L1PHASE_ACCEPTANCE_TRIALS", "2000"))
MC_SIZES = (32, 48, 64)
WORKERS = os.cpu_count() or 1


@pytest.fixture
def report(capsys):
    def _report(n, passed, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if passed else 'FAIL'} {detail}")
        assert passed, detail

    return _report


@pytest.fixture(scope="module")
def alpha_05_09():
    t0 = time.perf_counter()
    pt = blockwise_threshold(0.5, 0.9)
    return pt, time.perf_counter() - t0


def test_criterion_1_blockwise_reference(report, alpha_05_09):
    pt, elapsed = alpha_05_09
    err = abs(pt.alpha - 0.83649)
    report(1, err <= 5e-4 and elapsed < 60,
           f"alpha(0.5,0.9)={pt.alpha:.10f} |err|={err:.2e} (tol 5e-4) runtime={elapsed:.1f}s (limit 60s)")


def test_criterion_2_universality_reduction(report):
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(1, 10):
        rho = k / 10
        worst = max(worst, abs(blockwise_threshold(rho, 0.0).alpha - universal_threshold(rho).alpha))
    elapsed = time.perf_counter() - t0
    report(2, worst <= 1e-6 and elapsed < 60,
           f"max |blockwise(rho,0)-universal(rho)| over rho=0.1..0.9: {worst:.2e} (tol 1e-6) runtime={elapsed:.1f}s")


def test_criterion_3_sign_symmetry(report):
    worst = 0.0
    for rho, r in itertools.product((0.3, 0.5, 0.7), (0.3, 0.6, 0.9)):
        worst = max(worst, abs(blockwise_threshold(rho, r).alpha - blockwise_threshold(rho, -r).alpha))
    report(3, worst <= 1e-8, f"max |alpha(rho,r)-alpha(rho,-r)| on 3x3 grid: {worst:.2e} (tol 1e-8)")


def test_criterion_4_deviation_from_universality(report, alpha_05_09):
    base = universal_threshold(0.5).alpha
    devs = [abs(blockwise_threshold(0.5, r).alpha - blockwise_threshold(0.5, 0.0).alpha) for r in (0.0, 0.3, 0.6)]
    devs.append(abs(alpha_05_09[0].alpha - blockwise_threshold(0.5, 0.0).alpha))
    gap = abs(alpha_05_09[0].alpha - base)
    monotone = all(b >= a for a, b in zip(devs, devs[1:]))
    report(4, gap >= 1e-3 and monotone,
           f"|alpha(0.5,0.9)-universal|={gap:.3e} (>=1e-3); deviations r=0,.3,.6,.9: "
           + ", ".join(f"{d:.3e}" for d in devs) + f" nondecreasing={monotone}")


def _campaign(rho, r, seed):
    res = run_campaign(MC_SIZES, TRIALS, rho, r, master_seed=seed, workers=WORKERS)
    return res.summaries, extrapolate(res.summaries)


def _mc_detail(summaries, fit, target):
    means = ", ".join(f"N={s.N}:{s.mean_alpha:.4f}+-{s.std_error:.4f}" for s in summaries)
    return (f"trials/N={TRIALS} {means}; alpha_inf={fit.c0:.4f}+-{fit.c0_std_error:.4f} "
            f"target={target:.5f} |diff|={abs(fit.c0 - target):.4f} (tol 0.01)")


def test_criterion_5_monte_carlo_blockwise(report):
    assert TRIALS >= 1
    summaries, fit = _campaign(0.5, 0.9, seed=5)
    means = [s.mean_alpha for s in summaries]
    decreasing = all(b < a for a, b in zip(means, means[1:]))
    close = abs(fit.c0 - 0.8365) <= 0.01
    report(5, close and decreasing and TRIALS >= 2000,
           _mc_detail(summaries, fit, 0.8365) + f" within={close} monotone_decreasing={decreasing}")


def test_criterion_6_monte_carlo_universal(report):
    target = universal_threshold(0.5).alpha
    summaries, fit = _campaign(0.5, 0.0, seed=6)
    close = abs(fit.c0 - target) <= 0.01
    report(6, close and TRIALS >= 2000, _mc_detail(summaries, fit, target))


def test_criterion_7_rmt_suite(report):
    norm = max(abs(mp_moment(a, 0) - 1) for a in (0.25, 0.5, 0.75))
    first = max(abs(mp_moment(a, 1) - a) for a in (0.25, 0.5, 0.75))
    emp = empirical_spectral_moments(128, 256, 3, 10, seed=0)
    trace = max(abs(emp[k - 1] - mp_moment(0.5, k)) / mp_moment(0.5, k) for k in (1, 2, 3))
    xs = np.linspace(-2, 0.5, 26)
    g = max(abs(g_transform(a, x) - g_closed_form(a, x)) for a in (0.25, 0.5, 0.75) for x in xs)
    ok = norm <= 1e-8 and first <= 1e-6 and trace <= 0.03 and g <= 1e-6
    report(7, ok, f"normalization {norm:.1e} (1e-8); first moment {first:.1e} (1e-6); "
                  f"trace moments k=1..3 rel {trace:.2%} (3%); G max err {g:.1e} (1e-6)")


def test_criterion_8_solver_certification(report):
    rng = np.random.default_rng(8)
    worst_feas = worst_obj = worst_top = 0.0
    worst_align = math.inf
    done = skipped = 0
    while done < 100:
        N = int(rng.integers(4, 65)) * 2
        P = int(rng.integers(max(2, N // 4), N + 1))
        inst = sample_instance(P, N, float(rng.uniform(0.05, 0.7)), float(rng.uniform(-0.95, 0.95)),
                               int(rng.integers(2**62)))
        res = basis_pursuit(inst.F, inst.y)
        if not res.converged:
            skipped += 1
            continue
        done += 1
        x0 = inst.x0.values
        worst_feas = max(worst_feas, np.linalg.norm(inst.F @ res.x_star - inst.y) / (1 + np.linalg.norm(inst.y)))
        worst_obj = max(worst_obj, res.objective - np.abs(x0).sum())
        top, align = dual_certificate(inst.F, res.x_star, res.dual)
        worst_top, worst_align = max(worst_top, top), min(worst_align, align)
    ok = worst_feas <= 1e-8 and worst_obj <= 1e-6 and worst_top <= 1 + 1e-5 and worst_align >= 1 - 1e-5
    report(8, ok, f"100 instances ({skipped} unconverged skipped): feas {worst_feas:.1e} (1e-8); "
                  f"max(|x*|_1-|x0|_1) {worst_obj:.1e} (1e-6); max|F^T nu| {worst_top:.8f}; "
                  f"min support alignment {worst_align:.8f} (slack 1e-5)")


def _full_grid_2d(prob, step=1e-3, half=5.0, chunk=500):
    g = np.arange(round(2 * half / step) + 1) * step - half
    A = prob.Q_hat * prob.Rt
    c = prob.linear
    best, arg = np.inf, None
    X2 = g[None, :]
    for k in range(0, g.size, chunk):
        X1 = g[k:k + chunk, None]
        f = 0.5 * (A[0, 0] * X1 * X1 + 2 * A[0, 1] * X1 * X2 + A[1, 1] * X2 * X2) - c[0] * X1 - c[1] * X2
        f += np.abs(X1) + np.abs(X2)
        i = np.unravel_index(np.argmin(f), f.shape)
        if f[i] < best:
            best, arg = f[i], np.array([X1[i[0], 0], X2[0, i[1]]])
    return arg


def _zoom_grid(prob, half=6.0, points=9, resolution=1e-3):
    offsets = np.array(list(itertools.product(np.linspace(-1, 1, points), repeat=prob.N)))
    center = np.zeros(prob.N)
    step = 2 * half / (points - 1)
    while True:
        cand = center + half * offsets
        center = cand[np.argmin([prob.objective(x) for x in cand])]
        if step <= resolution:
            return center
        half = 2 * step
        step = 2 * half / (points - 1)


def test_criterion_9_prox_oracle(report):
    rng = np.random.default_rng(9)
    worst_dev = worst_cert = 0.0
    for k in range(50):
        n = 2 if k < 25 else 4
        B = rng.normal(size=(n, n))
        Rt = B @ B.T / n + 0.5 * np.eye(n)
        prob = DeformedProblem.from_rt(Rt, rng.normal(size=n) * 1.5, float(rng.uniform(0.5, 2.0)))
        res = phi_tilde_min(prob)
        if n == 2:
            assert np.all(np.abs(res.x_min) < 4.9), "instance leaves the search box"
            ref = _full_grid_2d(prob)
        else:
            ref = _zoom_grid(prob)
        worst_dev = max(worst_dev, float(np.max(np.abs(res.x_min - ref))))
        worst_cert = max(worst_cert, *stationarity(prob, res.x_min))
    report(9, worst_dev <= 2e-3 and worst_cert <= 1e-8,
           f"50 instances (25 2-D full grid, 25 4-D zoom grid): max deviation {worst_dev:.1e} (2e-3); "
           f"certificate violation {worst_cert:.1e} (1e-8)")


def test_criterion_10_numerics_properties(report):
    # quadrature exactness against Gaussian moments, scaled by E|Z|^k
    quad_err = 0.0
    for order in range(1, 41):
        rule = gauss_hermite(order)
        for k in range(2 * order):
            exact = 0.0 if k % 2 else float(math.prod(range(k - 1, 0, -2)))
            scale = max(1.0, 2 ** (k / 2) * math.gamma((k + 1) / 2) / math.sqrt(math.pi))
            quad_err = max(quad_err, abs(rule.integrate(lambda z: z**k) - exact) / scale)
        assert abs(rule.weights.sum() - 1) <= 1e-12
    xs = np.linspace(-8, 8, 1601)
    h = np.array([h_tail(x) for x in xs])
    refl = float(np.max(np.abs(h + h[::-1] - 1)))
    mono = bool(np.all(np.diff(h) <= 0))
    rng = np.random.default_rng(10)
    orth = 0.0
    for _ in range(200):
        u = np.sort(rng.choice(np.arange(-500, 501), size=int(rng.integers(4, 40)), replace=False)) / 100
        v = rng.normal(size=u.size)
        w = rng.uniform(0.1, 10, u.size)
        c = np.array(polyfit_quadratic(zip(u, v, w)))
        X = np.column_stack([np.ones_like(u), u, u * u])
        orth = max(orth, float(np.max(np.abs(X.T @ (w * (v - X @ c))) / (np.abs(X.T @ (w * v)) + 1))))
    ok = quad_err <= 1e-10 and refl <= 1e-12 and mono and orth <= 1e-10
    report(10, ok, f"quadrature exactness {quad_err:.1e} (1e-10); h_tail reflection {refl:.1e} (1e-12), "
                   f"monotone={mono}; regression orthogonality {orth:.1e} (1e-10)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
