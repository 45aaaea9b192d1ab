"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Long runs are cached per module so dependent criteria reuse one trajectory;
the determinism test reruns every cached run and compares CSV bytes.
"""
from fractions import Fraction
import time

import numpy as np
import pytest

from aznn import engine, findiff, flows, problems, static
from aznn.linalg_core import commutation_permutation, kron, unvec, vec

pytestmark = pytest.mark.slow

F45 = findiff.builtin("four_five_4_5")
SQRT_CFG = engine.PhaseConfig(160.0, 12, 1.45)
SYMM_CFG = engine.PhaseConfig(3.24, 12, 0.36)
SYMM_SNAPSHOTS = (600.0, 1200.0, 1800.0, 2400.0, 3000.0, 3600.0)


def _sqrt_adapted():
    return engine.run(problems.SquareRootAdapter(3), flows.trial_flow_squared(3, 0), SQRT_CFG,
                      F45, 0.02, 10.0, 610.0)


def _sqrt_baseline():
    return engine.run(problems.SquareRootAdapter(3), flows.trial_flow_squared(3, 0),
                      engine.baseline_config(1.35, F45), F45, 0.02, 10.0, 610.0)


def _symm():
    return engine.run(problems.SymmetrizerAdapter(5), flows.trial_flow_general(5, 0), SYMM_CFG,
                      F45, 0.05, 0.0, 3600.0, snapshot_times=SYMM_SNAPSHOTS)


def _static(A, name):
    return lambda: static.solve_static(A, static.preset(name), return_trajectory=True)


def _oracle_matrices():
    rng = np.random.default_rng(2024)
    return [rng.standard_normal((n, n)) for n in rng.integers(2, 7, size=20)]


RUNNERS = {
    "sqrt_adapted": _sqrt_adapted,
    "sqrt_baseline": _sqrt_baseline,
    "symmetrizer": _symm,
    "kahan35_small": _static(flows.kahan(35), "small"),
    "kahan35_large": _static(flows.kahan(35), "large"),
    "frank35_large": _static(flows.frank(35), "large"),
    "kahan20_small": _static(flows.kahan(20), "small"),
    "kahan20_dense_small": _static(flows.random_unitary_similarity(flows.kahan(20), 0), "small"),
}
for _alpha in (1e-27, 1e-10, 1e-3, 1.0):
    RUNNERS[f"two_by_two_{_alpha:g}"] = _static(flows.two_by_two(_alpha), "large")
for _i, _A in enumerate(_oracle_matrices()):
    RUNNERS[f"oracle_{_i}"] = _static(_A, "small")

_CACHE = {}


def _trajectory(result):
    return result[1] if isinstance(result, tuple) else result


def cached(name):
    if name not in _CACHE:
        t = time.perf_counter()
        result = RUNNERS[name]()
        _CACHE[name] = (result, time.perf_counter() - t)
    return _CACHE[name]


def test_criterion_01_formula_validity(criterion):
    t = time.perf_counter()
    f = findiff.builtin("fiveifd_2_3")
    weights_ok = f.weights == tuple(map(Fraction, (8, 1, -6, -5, 2))) and f.tau_scale == 18
    p1 = sum(f.recursion_coefficients())
    rep = findiff.check_convergent(f)
    slope = findiff.empirical_order(f)
    secs = time.perf_counter() - t
    ok = weights_ok and p1 == 0 and rep.passed and abs(slope - 3.0) <= 0.2 and secs < 1.0
    criterion(1, ok, f"p(1)={p1} root_ok={rep.passed} slope={slope:.3f} t={secs:.2f}s")
    assert ok


def test_criterion_02_derived_formula(criterion):
    t = time.perf_counter()
    f = findiff.derive(4, 5, search_seed=1)
    rep = findiff.check_convergent(f)
    slope = findiff.empirical_order(f, tau_list=(0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002))
    secs = time.perf_counter() - t
    ok = rep.passed and slope >= 4.7 and secs < 10.0
    criterion(2, ok, f"convergent={rep.passed} slope={slope:.3f} "
                     f"matches_builtin={f.weights == F45.weights} t={secs:.2f}s")
    assert ok


def test_criterion_03_kronecker_identities(criterion):
    t = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 7))
        m = int(rng.integers(1, 7))
        A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        X = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
        B = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        lhs = vec(A @ X @ B)
        rhs = kron(B.T, A) @ vec(X)
        worst = max(worst, np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs))
        worst = max(worst, np.linalg.norm(unvec(vec(X), n, m) - X) / np.linalg.norm(X))
        p = commutation_permutation(n, m)
        worst = max(worst, np.linalg.norm(vec(X.T) - vec(X)[p]) / np.linalg.norm(X))
    secs = time.perf_counter() - t
    ok = worst <= 1e-12 and secs < 5.0
    criterion(3, ok, f"worst_rel={worst:.2e} t={secs:.2f}s")
    assert ok


def test_criterion_04_square_root_run(criterion):
    traj, secs = cached("sqrt_adapted")
    r = np.asarray(traj.residuals)
    t = np.asarray(traj.times)
    below = np.nonzero(r < 1e-9)[0]
    first = t[below[0]] - t[0] if below.size else np.inf
    tail = float(np.median(r[int(0.8 * len(r)):]))
    ok = first <= 60.0 and tail <= 1e-9 and secs < 60.0
    criterion(4, ok, f"first<1e-9 after {first:.2f}s tail_median={tail:.2e} t={secs:.1f}s")
    assert ok


def test_criterion_05_adapted_vs_basic(criterion):
    adapted, t_a = cached("sqrt_adapted")
    base, t_b = cached("sqrt_baseline")
    ratio = adapted.residuals[-1] / base.residuals[-1]
    secs = t_a + t_b
    ok = ratio <= 0.1 and secs < 120.0
    criterion(5, ok, f"adapted={adapted.residuals[-1]:.2e} basic={base.residuals[-1]:.2e} "
                     f"ratio={ratio:.3f} t={secs:.1f}s")
    assert ok


def test_criterion_06_term_disparity(criterion):
    traj, _ = cached("sqrt_adapted")
    ratios = traj.ratios()
    med = float(np.nanmedian(ratios[int(0.9 * len(ratios)):]))
    ok = med >= 1e2
    criterion(6, ok, f"final-10% median recursion/solve={med:.3g}")
    assert ok


def test_criterion_07_symmetrizer_run(criterion):
    traj, secs = cached("symmetrizer")
    final = traj.residuals[-1]
    asym = max(np.linalg.norm(X - X.T) / np.linalg.norm(X) for X in traj.snapshots.values())
    ok = (final <= 1e-6 and asym <= 1e-12 and len(traj.snapshots) == len(SYMM_SNAPSHOTS)
          and secs < 120.0)
    criterion(7, ok, f"final={final:.2e} max_asym={asym:.1e} "
                     f"snapshots={len(traj.snapshots)} t={secs:.1f}s")
    assert ok


def test_criterion_08_static_kahan35(criterion):
    (small, _), t_s = cached("kahan35_small")
    (large, _), t_l = cached("kahan35_large")
    ok_s = small.rel_error <= 1e-8 and small.rank == 35 and t_s < 60.0
    ok_l = (large.rel_error <= 1e-12 and large.rank == 35 and 1e6 <= large.cond2 <= 1e12
            and t_l < 60.0)
    criterion(8, ok_s and ok_l,
              f"small rel={small.rel_error:.2e} rank={small.rank} t={t_s:.1f}s; "
              f"large rel={large.rel_error:.2e} rank={large.rank} cond={large.cond2:.2e} "
              f"t={t_l:.1f}s")
    assert ok_s and ok_l


def test_criterion_09_static_frank35(criterion):
    (cert, _), secs = cached("frank35_large")
    ok = cert.rel_error <= 1e-13 and cert.rank == 35 and secs < 60.0
    criterion(9, ok, f"rel={cert.rel_error:.2e} rank={cert.rank} cond={cert.cond2:.2e} "
                     f"t={secs:.1f}s")
    assert ok


def test_criterion_10_static_two_by_two(criterion):
    parts, total, ok = [], 0.0, True
    for alpha in (1e-27, 1e-10, 1e-3, 1.0):
        (cert, _), secs = cached(f"two_by_two_{alpha:g}")
        total += secs
        ok &= cert.rank == 2 and cert.cond2 <= 2.7 and cert.rel_error <= 1e-15
        parts.append(f"a={alpha:g}: rel={cert.rel_error:.1e} cond={cert.cond2:.3f}")
    ok &= total < 5.0
    criterion(10, ok, "; ".join(parts) + f" t={total:.2f}s")
    assert ok


def test_criterion_11_oracle_equivalence(criterion):
    worst, min_dim, total, ok = 1.0, np.inf, 0.0, True
    for i, A in enumerate(_oracle_matrices()):
        (cert, _), secs = cached(f"oracle_{i}")
        total += secs
        basis = static.nullspace_oracle(A)
        keep = static.projection_retention(cert.S, basis)
        worst = min(worst, keep)
        min_dim = min(min_dim, basis.shape[0] - A.shape[0])
        ok &= keep >= 0.999 and basis.shape[0] >= A.shape[0]
    ok &= total < 30.0
    criterion(11, ok, f"min_retention={worst:.6f} min(dim - n)={min_dim} t={total:.1f}s")
    assert ok


def test_criterion_12_dense_similarity(criterion):
    (sparse, _), t_s = cached("kahan20_small")
    (dense, _), t_d = cached("kahan20_dense_small")
    factor = max(dense.rel_error / sparse.rel_error, sparse.rel_error / dense.rel_error)
    ok = factor <= 100.0 and t_s + t_d < 60.0
    criterion(12, ok, f"sparse={sparse.rel_error:.2e} dense={dense.rel_error:.2e} "
                      f"factor={factor:.2f} t={t_s + t_d:.1f}s")
    assert ok


def test_criterion_13_gallery_calibration(criterion):
    t = time.perf_counter()
    fr = np.linalg.norm(flows.frank(35), 2)
    ka = np.linalg.norm(flows.kahan(35), 2)
    secs = time.perf_counter() - t
    ok = abs(fr - 340) <= 1 and abs(ka - 4.8) <= 0.1 and secs < 1.0
    criterion(13, ok, f"frank35={fr:.3f} kahan35={ka:.4f} t={secs:.3f}s")
    assert ok


def test_criterion_14_determinism(criterion):
    mismatched = []
    for name in RUNNERS:
        first = engine.format_csv(_trajectory(cached(name)[0]))
        again = engine.format_csv(_trajectory(RUNNERS[name]()))
        if first != again:
            mismatched.append(name)
    ok = not mismatched
    criterion(14, ok, f"{len(RUNNERS)} runs rerun, mismatched={mismatched or 'none'}")
    assert ok
