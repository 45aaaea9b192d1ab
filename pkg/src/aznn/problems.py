"""Problem adapters: the per-problem error map, Kronecker system and metric.

Each adapter exposes ``initial_guess``, ``build_system``, ``residual`` and
``enforce_structure``.  ``build_system(X, t, eta, flow)`` returns ``(P, q)``
with ``P vec(Xdot) = q`` encoding ``d/dt E = -eta E``.
"""

import numpy as np

from . import kernels
from .linalg_core import as_matrix, sqrt_residual, symm_residual, vec


class SquareRootAdapter:
    """Time-varying square root, ``E(t) = A(t) - X(t) X(t)``."""

    name = "sqrt"

    def __init__(self, n):
        self.dim = int(n)

    def initial_guess(self, A0, seed=None):
        # entrywise principal square root; seed unused
        return np.sqrt(as_matrix(A0, "A0"))

    def build_system(self, X, t, eta, flow):
        X = as_matrix(X, "X")
        A = flow.value(t)
        Adot = flow.derivative(t)
        # D -> D X + X D
        P = kernels.sylvester_matrix(X, X)
        # (X^T kron I) vec(X) = vec(X X)
        q = vec(Adot) + eta * vec(A) - eta * vec(X @ X)
        return P, q

    def residual(self, A, X):
        return sqrt_residual(A, X)

    def enforce_structure(self, X):
        return X


GUESS_BASES = ("identity", "ones")


class SymmetrizerAdapter:
    """Time-varying symmetrizer, ``E(t) = X(t) A(t) - A(t)^T X(t)``.

    The Kronecker matrix always has nullity >= n, so every solve goes
    through the minimum-norm least-squares path.
    """

    name = "symmetrizer"

    def __init__(self, n, enforce_symmetry=True, eps=1e-2, seed=0, base="identity"):
        if base not in GUESS_BASES:
            raise ValueError(f"unknown initial-guess base {base!r}; choose from {', '.join(GUESS_BASES)}")
        self.dim = int(n)
        self.enforce_symmetry = bool(enforce_symmetry)
        self.eps = eps
        self.seed = seed
        self.base = base

    def initial_guess(self, A0=None, seed=None, eps=None):
        """``B + eps (R + R^T)/2`` with B = I (default) or the all-ones matrix."""
        eps = self.eps if eps is None else eps
        seed = self.seed if seed is None else seed
        n = self.dim
        B = np.eye(n) if self.base == "identity" else np.ones((n, n))
        R = np.random.default_rng(seed).standard_normal((n, n))
        return (B + eps * (R + R.T) / 2).astype(np.complex128)

    def build_system(self, X, t, eta, flow):
        X = as_matrix(X, "X")
        A = flow.value(t)
        Adot = flow.derivative(t)
        # D -> D A - A^T D
        P = kernels.sylvester_matrix(-A.T, A)
        q = vec(Adot.T @ X - X @ Adot) - eta * vec(X @ A - A.T @ X)
        return P, q

    def residual(self, A, X):
        return symm_residual(A, X)

    def enforce_structure(self, X):
        if not self.enforce_symmetry:
            return X
        return (X + X.T) / 2


ADAPTERS = {"sqrt": SquareRootAdapter, "symmetrizer": SymmetrizerAdapter}


def make_adapter(name, n, **kwargs):
    try:
        cls = ADAPTERS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {', '.join(ADAPTERS)}") from None
    return cls(n, **kwargs)
