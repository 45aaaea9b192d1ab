"""Symmetrizers of fixed matrices by Euler-only AZNN along a homotopy.

The target A is embedded in ``A(t) = t A + (1-t)^a BB`` with a small random
BB and ``t`` runs from ``t0`` to exactly 1 on a decimal grid.  The symmetric
iterate at t = 1 is returned together with a certificate (relative error,
2-norm condition number, numerical rank).
"""

from dataclasses import dataclass, replace
from decimal import Decimal
import math

import numpy as np

from . import engine
from .flows import HomotopyParams, grid_steps, grid_time, homotopy_flow
from .linalg_core import DEFAULT_RANK_TOL, as_matrix, condition_and_rank, symm_residual, is_symmetric
from .problems import SymmetrizerAdapter


@dataclass(frozen=True)
class StaticParams:
    eta: float
    approach_exponent: float
    t0: float
    tau: float
    bb_scale: float
    seed: int = 0
    preset_name: str = "custom"
    guess_base: str = "ones"
    guess_eps: float = 0.0

    @property
    def h(self):
        return self.eta * self.tau

    @property
    def steps(self):
        return grid_steps(self.t0, self.tau)

    def validate(self):
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise ValueError(f"eta must be positive, got {self.eta!r}")
        if not self.approach_exponent > 0:
            raise ValueError(f"approach exponent must be positive, got {self.approach_exponent!r}")
        if not 0 < self.t0 < 1:
            raise ValueError(f"t0 must lie in (0, 1), got {self.t0!r}")
        if not self.bb_scale > 0:
            raise ValueError(f"bb_scale must be positive, got {self.bb_scale!r}")
        if self.steps is None:
            raise ValueError(
                f"(1 - t0)/tau is not an integer for t0={self.t0!r}, tau={self.tau!r}; "
                f"use synchronize(t0, tau) = {synchronize(self.t0, self.tau)!r}")
        return self


# Countervalent pair: eta about x12, a x10, bb / 100, tau / 10.
PRESETS = {
    "small": StaticParams(eta=800.0, approach_exponent=1.1, t0=0.985, tau=1e-3,
                          bb_scale=1e-6, preset_name="small"),
    "large": StaticParams(eta=9500.0, approach_exponent=11.0, t0=0.9985, tau=1e-4,
                          bb_scale=1e-8, preset_name="large"),
}


def preset(name, **overrides):
    try:
        p = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    return replace(p, **overrides) if overrides else p


def _decimals(d):
    return max(0, -d.normalize().as_tuple().exponent)


def synchronize(t0, tau_hint):
    """Largest decimal ``tau <= tau_hint`` with ``(1 - t0)/tau`` an integer.

    Candidates are multiples of ``10**-d`` where ``d`` is the number of
    decimals of ``tau_hint``; ``d`` grows until a divisor of the gap exists.
    """
    if not 0 < t0 < 1:
        raise ValueError(f"t0 must lie in (0, 1), got {t0!r}")
    if not tau_hint > 0:
        raise ValueError(f"tau_hint must be positive, got {tau_hint!r}")
    gap = Decimal(1) - Decimal(repr(float(t0)))
    hint = Decimal(repr(float(tau_hint)))
    if hint >= gap:
        return float(gap)
    d = _decimals(hint)
    while True:
        unit = Decimal(1).scaleb(-d)
        m = int(hint / unit)
        for mm in range(m, 0, -1):
            tau = mm * unit
            if (gap / tau) == (gap / tau).to_integral_value():
                return float(tau)
        d += 1


@dataclass(frozen=True)
class SymmetrizerCertificate:
    S: np.ndarray
    rel_error: float
    cond2: float
    rank: int
    steps_taken: int
    h: float
    preset: str
    n: int
    bb_norm: float
    params: StaticParams

    @property
    def full_rank(self):
        return self.rank == self.n

    def format(self):
        p = self.params
        return "\n".join([
            f"preset: {self.preset}",
            f"n: {self.n}",
            f"eta: {p.eta!r}",
            f"approach_exponent: {p.approach_exponent!r}",
            f"t0: {p.t0!r}",
            f"tau: {p.tau!r}",
            f"h: {self.h!r}",
            f"bb_scale: {p.bb_scale!r}",
            f"bb_norm: {self.bb_norm!r}",
            f"seed: {p.seed}",
            f"steps_taken: {self.steps_taken}",
            f"rel_error: {self.rel_error!r}",
            f"cond2: {self.cond2!r}",
            f"rank: {self.rank}",
            f"full_rank: {'yes' if self.full_rank else 'no'}",
        ]) + "\n"


def perturbation(n, scale, seed):
    rng = np.random.default_rng(seed)
    return scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))


def solve_static(A, p, rank_tol=DEFAULT_RANK_TOL, return_trajectory=False):
    """Run Euler AZNN on the homotopy from ``p.t0`` to 1 and certify ``S(1)``.

    Rank deficiency is reported in the certificate, not raised.
    """
    A = as_matrix(A, "A")
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError(f"A must be square, got shape {A.shape}")
    p.validate()
    K = p.steps
    hp = HomotopyParams(A, perturbation(n, p.bb_scale, p.seed), p.approach_exponent, p.t0, p.tau)
    flow = homotopy_flow(hp)
    adapter = SymmetrizerAdapter(n, enforce_symmetry=True, eps=p.guess_eps, seed=p.seed, base=p.guess_base)
    cfg = engine.PhaseConfig(eta_start=p.eta, startup_steps=K, eta_iter=p.eta,
                             startup_decay="explicit", label=f"static {p.preset_name}")
    hist, traj = engine.startup(adapter, flow, cfg, p.tau, t0=p.t0, rank_tol=rank_tol,
                                time_fn=lambda k: grid_time(p.t0, p.tau, k), return_trajectory=True)
    S = hist[0]
    if traj.times[-1] != 1.0:  # pragma: no cover - guaranteed by the decimal grid
        raise RuntimeError(f"homotopy grid ended at t={traj.times[-1]!r} instead of 1")
    cond2, rank = condition_and_rank(S, rank_tol)
    cert = SymmetrizerCertificate(
        S=S, rel_error=symm_residual(A, S), cond2=cond2, rank=rank, steps_taken=K,
        h=p.h, preset=p.preset_name, n=n, bb_norm=hp.bb_norm, params=p)
    assert is_symmetric(S, 1e-12)
    if return_trajectory:
        return cert, traj
    return cert


def nullspace_oracle(A, rank_tol=1e-10):
    """Orthonormal basis (Frobenius inner product) of the symmetric S with S A = (S A)^T.

    Assembles the homogeneous system in the n(n+1)/2 upper-triangular
    entries of S and takes its null space from the SVD.  Off-diagonal
    unknowns are scaled by sqrt(2) so coordinate and Frobenius norms agree.
    Returns an array of shape (dim, n, n).
    """
    A = as_matrix(A, "A")
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError("nullspace_oracle needs a square matrix")
    if n > 8:
        raise ValueError("nullspace_oracle is a small-n oracle (n <= 8)")
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    cols = []
    for i, j in pairs:
        E = np.zeros((n, n))
        if i == j:
            E[i, i] = 1.0
        else:
            E[i, j] = E[j, i] = 1.0 / math.sqrt(2.0)
        M = E @ A - A.T @ E  # antisymmetric
        cols.append([M[r, c] for r in range(n) for c in range(r + 1, n)])
    N = np.array(cols, dtype=np.complex128).T  # equations x unknowns
    m = len(pairs)
    if N.shape[0] == 0:
        null = np.eye(m)
    else:
        _, s, Vh = np.linalg.svd(N)
        rank = int(np.count_nonzero(s > rank_tol * s[0])) if s.size and s[0] > 0 else 0
        null = Vh[rank:].conj().T
    basis = []
    for v in null.T:
        S = np.zeros((n, n), dtype=np.complex128)
        for c, (i, j) in zip(v, pairs):
            if i == j:
                S[i, i] = c
            else:
                S[i, j] = S[j, i] = c / math.sqrt(2.0)
        basis.append(S)
    return np.array(basis)


def projection_retention(S, basis):
    """Fraction of ``||S||_F`` kept by the orthogonal projection onto ``span(basis)``."""
    S = as_matrix(S, "S")
    B = np.asarray(basis).reshape(len(basis), -1)
    coeff = B.conj() @ S.reshape(-1)
    proj = coeff @ B
    return float(np.linalg.norm(proj) / np.linalg.norm(S))
