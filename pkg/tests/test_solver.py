import numpy as np
import pytest
from scipy.optimize import linprog

from l1phase.errors import FactorizationError, ParameterError
from l1phase.sensing import sample_instance
from l1phase.solver import SolverOptions, basis_pursuit, check_recovery, dual_certificate


def lp_reference(F, y):
    P, N = F.shape
    res = linprog(np.ones(2 * N), A_eq=np.hstack([F, -F]), b_eq=y, bounds=(0, None), method="highs")
    assert res.status == 0
    return res.x[:N] - res.x[N:]


def test_single_equation():
    res = basis_pursuit(np.array([[1.0, 0.0]]), np.array([1.0]))
    assert res.converged
    assert np.allclose(res.x_star, [1.0, 0.0], atol=1e-10)
    assert res.objective == pytest.approx(1.0, abs=1e-10)


def test_zero_signal():
    inst = sample_instance(12, 30, 0.0, 0.0, seed=4)
    res = basis_pursuit(inst.F, inst.y)
    assert res.converged and not res.x_star.any()
    assert res.objective == 0.0


def test_deep_success_region():
    inst = sample_instance(56, 64, 0.1, 0.0, seed=2024)
    res = basis_pursuit(inst.F, inst.y)
    assert res.converged
    assert np.linalg.norm(res.x_star - inst.x0.values) <= 1e-6


def _certificate_ok(F, y, res, x0, slack=1e-5):
    assert res.feasibility_residual <= 1e-8
    assert np.linalg.norm(F @ res.x_star - y) <= 1e-8 * (1 + np.linalg.norm(y))
    assert res.objective <= np.abs(x0).sum() + 1e-6
    assert res.objective >= 0
    top, align = dual_certificate(F, res.x_star, res.dual)
    assert top <= 1 + slack
    assert align >= 1 - slack


@pytest.mark.parametrize("seed", range(12))
def test_matches_linear_program(seed):
    rng = np.random.default_rng(seed)
    N = int(rng.choice([16, 32, 48]))
    P = int(rng.integers(N // 3, N))
    inst = sample_instance(P, N, float(rng.uniform(0.1, 0.6)), float(rng.choice([0.0, 0.5, 0.9])), seed)
    res = basis_pursuit(inst.F, inst.y)
    assert res.converged
    _certificate_ok(inst.F, inst.y, res, inst.x0.values)
    ref = lp_reference(inst.F, inst.y)
    assert res.objective == pytest.approx(np.abs(ref).sum(), rel=1e-7, abs=1e-9)


def test_failure_region_still_certified():
    # far below the threshold: l1 minimizer differs from x0 but is optimal
    inst = sample_instance(20, 64, 0.5, 0.9, seed=3)
    res = basis_pursuit(inst.F, inst.y)
    assert res.converged
    assert not check_recovery(res.x_star, inst.x0.values)
    _certificate_ok(inst.F, inst.y, res, inst.x0.values)


def test_warm_start_after_row_deletion():
    inst = sample_instance(40, 40, 0.3, 0.0, seed=8)
    full = basis_pursuit(inst.F, inst.y)
    cold = basis_pursuit(inst.F[:30], inst.y[:30])
    warm = basis_pursuit(inst.F[:30], inst.y[:30], warm_start=full.state)
    assert cold.converged and warm.converged
    assert np.allclose(cold.x_star, warm.x_star, atol=1e-8)


def test_iteration_cap_reports_not_converged():
    inst = sample_instance(30, 64, 0.3, 0.5, seed=1)
    res = basis_pursuit(inst.F, inst.y, SolverOptions(max_iterations=3, polish=False))
    assert not res.converged
    assert res.iterations == 3


def test_without_polish():
    inst = sample_instance(40, 48, 0.15, 0.0, seed=6)
    res = basis_pursuit(inst.F, inst.y, SolverOptions(polish=False))
    assert res.converged and not res.polished
    assert res.feasibility_residual <= 1e-8
    assert np.linalg.norm(res.x_star - inst.x0.values) <= 1e-4


def test_rank_deficient():
    F = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]])
    with pytest.raises(FactorizationError):
        basis_pursuit(F, np.array([1.0, 2.0]))


def test_shape_checks():
    with pytest.raises(ParameterError):
        basis_pursuit(np.eye(3)[:2], np.ones(3))
    with pytest.raises(ParameterError):
        basis_pursuit(np.ones((3, 2)), np.ones(3))


@pytest.mark.parametrize(
    "kwargs",
    [{"max_iterations": 0}, {"primal_tolerance": 0.0}, {"dual_tolerance": -1.0}, {"penalty": 0.0}],
)
def test_option_validation(kwargs):
    with pytest.raises(ParameterError):
        SolverOptions(**kwargs)


def test_bit_identical_reruns():
    inst = sample_instance(24, 32, 0.4, 0.9, seed=77)
    a = basis_pursuit(inst.F, inst.y)
    b = basis_pursuit(inst.F, inst.y)
    assert np.array_equal(a.x_star, b.x_star) and a.iterations == b.iterations


# -- success criterion ---------------------------------------------------------------

def test_identical_vectors():
    x = np.random.default_rng(0).normal(size=10)
    assert check_recovery(x, x.copy())


def test_unit_difference():
    x = np.zeros(5)
    y = x.copy()
    y[2] = 1.0
    assert not check_recovery(y, x, tol=1e-4)


def test_borderline():
    x = np.zeros(4)
    y = np.array([9e-5, 0, 0, 0])
    assert check_recovery(y, x)


def test_linf_option():
    x = np.zeros(4)
    y = np.full(4, 6e-5)  # l2 = 1.2e-4, linf = 6e-5
    assert not check_recovery(y, x)
    assert check_recovery(y, x, norm="linf")
    with pytest.raises(ParameterError):
        check_recovery(y, x, norm="l1")


def test_length_mismatch():
    with pytest.raises(ParameterError):
        check_recovery(np.zeros(3), np.zeros(4))
