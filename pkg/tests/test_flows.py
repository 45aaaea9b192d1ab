import math

import numpy as np
import pytest

from aznn import flows
from aznn.linalg_core import sqrt_residual, condition_and_rank


def _points(lo, hi, count=20, seed=0):
    return np.random.default_rng(seed).uniform(lo, hi, count)


def test_trial_squared_root_is_exact():
    fl = flows.trial_flow_squared(3, 0)
    for t in (10.0, 123.4, 3610.0):
        assert sqrt_residual(fl.value(t), fl.root(t)) <= 1e-13


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_trial_squared_derivative(seed):
    fl = flows.trial_flow_squared(3, seed)
    for t in _points(10, 610, seed=seed):
        assert flows.derivative_error(fl, t) <= 1e-5


def test_trial_squared_growth():
    fl = flows.trial_flow_squared(3, 0, gamma=0.3)
    assert np.linalg.norm(fl.value(3600.0)) >= 1e5


def test_trial_squared_rejects_small_n():
    with pytest.raises(ValueError):
        flows.trial_flow_squared(1)


@pytest.mark.parametrize("complex_flag", [False, True])
def test_trial_general_derivative(complex_flag):
    fl = flows.trial_flow_general(5, 0, complex_flag)
    for t in _points(0, 3600):
        assert flows.derivative_error(fl, t) <= 1e-5


def test_trial_general_real_stays_real():
    fl = flows.trial_flow_general(5, 0, False)
    for t in _points(0, 3600, 5):
        assert not np.any(fl.value(t).imag) and not np.any(fl.derivative(t).imag)
    assert np.any(flows.trial_flow_general(5, 0, True).value(1.0).imag)


@pytest.mark.parametrize("complex_flag", [False, True])
def test_trial_general_distinct_eigenvalues_at_start(complex_flag):
    lam = np.linalg.eigvals(flows.trial_flow_general(5, 0, complex_flag).value(0.0))
    gaps = [abs(lam[i] - lam[j]) for i in range(5) for j in range(i + 1, 5)]
    assert min(gaps) > 0.1


def _hp(a=1.1, t0=0.985, tau=1e-3, n=3):
    rng = np.random.default_rng(0)
    A = rng.standard_normal((n, n))
    BB = 1e-4 * rng.standard_normal((n, n))
    return flows.HomotopyParams(A, BB, a, t0, tau)


def test_homotopy_values():
    p = _hp()
    fl = flows.homotopy_flow(p)
    assert np.array_equal(fl.value(1.0), p.target)
    assert np.array_equal(fl.derivative(1.0), p.target)
    expected = 0.985 * p.target + (1 - 0.985) ** 1.1 * p.perturbation
    assert np.allclose(fl.value(0.985), expected, rtol=1e-15, atol=0)


def test_homotopy_derivative_closed_form():
    p = _hp()
    fl = flows.homotopy_flow(p)
    closed = p.target - 1.1 * 0.015 ** 0.1 * p.perturbation
    assert np.allclose(fl.derivative(0.985), closed, rtol=1e-14, atol=0)
    assert flows.derivative_error(fl, 0.985, step=1e-7) <= 1e-6


def test_homotopy_rejects_t_above_one():
    fl = flows.homotopy_flow(_hp())
    with pytest.raises(ValueError):
        fl.value(1.0000001)


def test_homotopy_params_validation():
    with pytest.raises(ValueError):
        _hp(tau=7e-4)  # 0.015 / 0.0007 is not an integer
    with pytest.raises(ValueError):
        flows.HomotopyParams(np.eye(2), np.zeros((2, 2)), 1.1, 0.985, 1e-3)
    with pytest.raises(ValueError):
        _hp(a=0.0)
    assert _hp().steps == 15
    assert _hp(t0=0.9985, tau=1e-4).steps == 15


def test_homotopy_small_exponent_at_one():
    fl = flows.homotopy_flow(_hp(a=0.5, t0=0.5, tau=0.25))
    with pytest.raises(ValueError):
        fl.derivative(1.0)


def test_grid_lands_on_one():
    for t0, tau in ((0.985, 1e-3), (0.9985, 1e-4), (0.985, 6e-4), (0.7, 0.1)):
        K = flows.grid_steps(t0, tau)
        assert flows.grid_time(t0, tau, K) == 1.0
        assert flows.grid_time(t0, tau, 0) == t0


def test_gallery_norms():
    assert abs(np.linalg.norm(flows.gallery("frank", 35), 2) - 340) <= 1
    assert abs(np.linalg.norm(flows.gallery("kahan", 35), 2) - 4.8) <= 0.1


def test_kahan_structure():
    K = flows.kahan(4)
    s, c = math.sin(1.2), math.cos(1.2)
    assert np.allclose(np.diag(K), s ** np.arange(4))
    assert np.allclose(K[0, 1:], -c)
    assert np.all(np.tril(K, -1) == 0)


def test_frank_structure():
    F = flows.frank(4)
    expected = np.array([[4, 3, 2, 1], [3, 3, 2, 1], [0, 2, 2, 1], [0, 0, 1, 1]], dtype=float)
    assert np.array_equal(F, expected)


def test_two_by_two_nilpotent():
    A = flows.gallery("two_by_two", alpha=0.0)
    assert np.array_equal(A @ A, np.zeros((2, 2)))
    assert condition_and_rank(A)[1] == 1


def test_derog_ut():
    C = flows.gallery("derog_ut", 23)
    assert np.all(np.tril(C, -1) == 0)
    nrm = np.linalg.norm(C, 2)
    assert 100 <= nrm <= 500
    # derogatory: some eigenvalue has geometric multiplicity > 1
    lam = np.unique(np.round(np.diag(C) / (nrm / 281.0), 8))
    geo = [23 - np.linalg.matrix_rank(C - l * (nrm / 281.0) * np.eye(23), tol=1e-8 * nrm) for l in lam]
    assert max(geo) >= 2


def test_gallery_errors():
    with pytest.raises(ValueError):
        flows.gallery("hilbert", 4)
    with pytest.raises(ValueError):
        flows.gallery("kahan", 0)
    with pytest.raises(ValueError):
        flows.gallery("two_by_two", 3)


def test_random_unitary_similarity():
    K = flows.kahan(20)
    D = flows.random_unitary_similarity(K, 3)
    assert np.allclose(np.sort_complex(np.linalg.eigvals(D)),
                       np.sort_complex(np.linalg.eigvals(K).astype(complex)), atol=1e-10)
    assert abs(np.linalg.norm(D, 2) - np.linalg.norm(K, 2)) <= 1e-10
    assert np.count_nonzero(np.abs(D) > 0) >= 0.9 * D.size
    Q = flows.random_unitary(6, 1)
    assert np.allclose(Q.conj().T @ Q, np.eye(6), atol=1e-13)


def test_constant_flow():
    fl = flows.constant_flow(np.eye(2))
    assert np.array_equal(fl.value(5.0), np.eye(2))
    assert not np.any(fl.derivative(5.0))
