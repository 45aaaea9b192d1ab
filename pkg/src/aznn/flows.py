"""Time-parameterized matrix flows and the static test-matrix gallery."""

from dataclasses import dataclass, field
from decimal import Decimal
import math

import numpy as np

from .linalg_core import as_matrix


class MatrixFlow:
    """A matrix function ``A(t)`` together with its time derivative.

    ``value`` and ``derivative`` are callables of one float.  ``root`` is an
    optional callable returning a known square root of ``A(t)`` (trial flows
    built as squares carry one).
    """

    def __init__(self, dim, value, derivative, descriptor, root=None, t_max=math.inf):
        self.dim = int(dim)
        self._value = value
        self._derivative = derivative
        self.descriptor = descriptor
        self.root = root
        self.t_max = t_max

    def _check_t(self, t):
        if t > self.t_max:
            raise ValueError(f"flow {self.descriptor!r} is undefined for t={t!r} > {self.t_max!r}")

    def value(self, t):
        self._check_t(t)
        return self._value(t)

    def derivative(self, t):
        self._check_t(t)
        return self._derivative(t)

    def __repr__(self):
        return f"MatrixFlow({self.descriptor})"


def constant_flow(A):
    A = as_matrix(A, "A").copy()
    Z = np.zeros_like(A)
    return MatrixFlow(A.shape[0], lambda t: A.copy(), lambda t: Z.copy(), f"constant n={A.shape[0]}")


def _seeded(n, seed, count, complex_flag=False):
    rng = np.random.default_rng(seed)
    mats = []
    for _ in range(count):
        M = rng.standard_normal((n, n)).astype(np.complex128)
        if complex_flag:
            M = M + 1j * rng.standard_normal((n, n))
        mats.append(M)
    return mats


def trial_flow_squared(n=3, seed=0, omega=0.5, omega2=0.35, gamma=0.3, shift=3.0):
    """``A(t) = W(t) @ W(t)`` with a trigonometric-plus-drift ``W``.

    W(t) = C0 + shift*I + C1 sin(omega t) + C2 cos(omega2 t) + gamma t I

    ``W`` is a square root of ``A`` at every t and is exposed as ``flow.root``.
    """
    if n < 2:
        raise ValueError("trial_flow_squared needs n >= 2")
    C0, C1, C2 = _seeded(n, seed, 3)
    C0 = C0 + shift * np.eye(n)
    eye = np.eye(n, dtype=np.complex128)

    def W(t):
        return C0 + C1 * math.sin(omega * t) + C2 * math.cos(omega2 * t) + (gamma * t) * eye

    def Wdot(t):
        return (omega * math.cos(omega * t)) * C1 - (omega2 * math.sin(omega2 * t)) * C2 + gamma * eye

    def value(t):
        w = W(t)
        return w @ w

    def derivative(t):
        w, d = W(t), Wdot(t)
        return d @ w + w @ d

    desc = (f"trial_squared n={n} seed={seed} omega={omega!r} omega2={omega2!r} "
            f"gamma={gamma!r} shift={shift!r}")
    return MatrixFlow(n, value, derivative, desc, root=W)


def trial_flow_general(n=5, seed=0, complex_flag=False, omega=0.3, omega2=0.2, amplitude=0.5):
    """Bounded trigonometric flow ``C0 + a (C1 sin(omega t) + C2 cos(omega2 t))``."""
    if n < 2:
        raise ValueError("trial_flow_general needs n >= 2")
    C0, C1, C2 = _seeded(n, seed, 3, complex_flag)

    def value(t):
        return C0 + amplitude * (math.sin(omega * t) * C1 + math.cos(omega2 * t) * C2)

    def derivative(t):
        return amplitude * (omega * math.cos(omega * t) * C1 - omega2 * math.sin(omega2 * t) * C2)

    kind = "complex" if complex_flag else "real"
    desc = (f"trial_general n={n} seed={seed} {kind} omega={omega!r} omega2={omega2!r} "
            f"amplitude={amplitude!r}")
    return MatrixFlow(n, value, derivative, desc)


def grid_steps(t0, tau):
    """Number of steps K with ``t0 + K*tau == 1`` in exact decimal arithmetic, or None."""
    gap = Decimal(1) - Decimal(repr(float(t0)))
    d_tau = Decimal(repr(float(tau)))
    if gap <= 0 or d_tau <= 0:
        return None
    K = gap / d_tau
    if K != K.to_integral_value():
        return None
    return int(K)


def grid_time(t0, tau, k):
    """``t_k`` computed from the step index in exact decimal arithmetic."""
    return float(Decimal(repr(float(t0))) + k * Decimal(repr(float(tau))))


@dataclass(frozen=True)
class HomotopyParams:
    target: np.ndarray
    perturbation: np.ndarray
    approach_exponent: float
    t0: float
    tau: float
    bb_norm: float = field(init=False)

    def __post_init__(self):
        A = as_matrix(self.target, "target")
        BB = as_matrix(self.perturbation, "perturbation")
        if A.shape[0] != A.shape[1] or A.shape != BB.shape:
            raise ValueError("target and perturbation must be square and of equal size")
        if not self.approach_exponent > 0:
            raise ValueError("approach exponent must be positive")
        if not 0 < self.t0 < 1:
            raise ValueError("t0 must lie in (0, 1)")
        if grid_steps(self.t0, self.tau) is None:
            raise ValueError(f"(1 - t0)/tau is not a positive integer for t0={self.t0!r}, tau={self.tau!r}")
        nrm = float(np.linalg.norm(BB))
        if nrm == 0.0:
            raise ValueError("perturbation BB must be nonzero")
        object.__setattr__(self, "target", A)
        object.__setattr__(self, "perturbation", BB)
        object.__setattr__(self, "bb_norm", nrm)

    @property
    def steps(self):
        return grid_steps(self.t0, self.tau)


def homotopy_flow(p):
    """``A(t) = t A + (1-t)^a BB`` on ``[t0, 1]``."""
    A, BB, a = p.target, p.perturbation, float(p.approach_exponent)

    def value(t):
        g = 1.0 - t
        if g == 0.0:
            return A.copy()
        return t * A + g**a * BB

    def derivative(t):
        g = 1.0 - t
        if g == 0.0:
            if a > 1:
                return A.copy()
            if a == 1:
                return A - BB
            raise ValueError("homotopy derivative is unbounded at t=1 for a < 1")
        return A - (a * g ** (a - 1.0)) * BB

    desc = f"homotopy n={A.shape[0]} a={a!r} t0={p.t0!r} tau={p.tau!r} |BB|_F={p.bb_norm!r}"
    return MatrixFlow(A.shape[0], value, derivative, desc, t_max=1.0)


def derivative_error(flow, t, step=1e-6):
    """Relative gap between ``flow.derivative(t)`` and a central difference."""
    fd = (flow.value(t + step) - flow.value(t - step)) / (2 * step)
    d = flow.derivative(t)
    return float(np.linalg.norm(fd - d) / max(1.0, np.linalg.norm(d)))


# --- gallery -------------------------------------------------------------------


def kahan(n, theta=1.2):
    s, c = math.sin(theta), math.cos(theta)
    R = np.eye(n) - c * np.triu(np.ones((n, n)), 1)
    return (s ** np.arange(n))[:, None] * R


def frank(n):
    i, j = np.indices((n, n))
    F = (n - np.maximum(i, j)).astype(float)
    F[j < i - 1] = 0.0
    return F


DEROG_TARGET_NORM = 281.0


def derog_ut(n, seed=0, target_norm=DEROG_TARGET_NORM):
    """Seeded upper-triangular derogatory matrix.

    Block-diagonal Jordan form with three eigenvalues, each carrying several
    Jordan blocks, conjugated by a unit upper-triangular matrix (which keeps
    the triangular shape) and scaled to the requested 2-norm.
    """
    if n < 4:
        raise ValueError("derog_ut needs n >= 4 to hold repeated Jordan blocks")
    rng = np.random.default_rng(seed)
    eigs = (1.0, 2.0, 3.0)
    J = np.zeros((n, n))
    pos, b = 0, 0
    while pos < n:
        size = min(int(rng.integers(1, 4)), n - pos)
        lam = eigs[b % len(eigs)]
        for i in range(size):
            J[pos + i, pos + i] = lam
            if i + 1 < size:
                J[pos + i, pos + i + 1] = 1.0
        pos += size
        b += 1
    T = np.eye(n) + np.triu(rng.uniform(-0.5, 0.5, (n, n)), 1)
    C = T @ J @ np.linalg.inv(T)
    C = np.triu(C)  # drop roundoff below the diagonal
    return C * (target_norm / np.linalg.norm(C, 2))


def two_by_two(alpha):
    return np.array([[0.0, 1.0], [0.0, alpha]])


GALLERY = ("kahan", "frank", "derog_ut", "two_by_two")


def gallery(kind, n=None, alpha=1.0, seed=0):
    if kind == "two_by_two":
        if n not in (None, 2):
            raise ValueError("two_by_two is fixed at n = 2")
        return two_by_two(alpha)
    if kind not in GALLERY:
        raise ValueError(f"unknown gallery matrix {kind!r}; choose from {', '.join(GALLERY)}")
    if n is None or int(n) != n or n < 1:
        raise ValueError(f"invalid size n={n!r} for {kind}")
    n = int(n)
    if kind == "kahan":
        return kahan(n)
    if kind == "frank":
        return frank(n)
    return derog_ut(n, seed)


def random_unitary(n, seed):
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def random_unitary_similarity(A, seed=0):
    """``Q^* A Q`` for a seeded Haar-distributed unitary ``Q``."""
    A = as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise ValueError("random_unitary_similarity needs a square matrix")
    Q = random_unitary(A.shape[0], seed)
    return Q.conj().T @ A @ Q
