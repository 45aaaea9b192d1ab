"""Per-step numeric kernels, each with a numba and a numpy implementation.

The engine calls the names exported at module level (``sylvester_matrix``,
``fd_combine``, ...), which point at the numba versions unless the backend
was disabled through ``AZNN_DISABLE_NUMBA``.  ``NUMBA`` and ``NUMPY`` expose
both variants explicitly for parity tests and the benchmark script.

All kernels work on ``complex128`` arrays and column-major ``vec`` ordering.
"""

from types import SimpleNamespace

import numpy as np

from ._accel import USE_NUMBA, njit


# --- numpy reference path -------------------------------------------------


def _sylvester_matrix_np(L, R):
    n = L.shape[0]
    eye = np.eye(n, dtype=np.complex128)
    return np.kron(eye, L) + np.kron(R.T, eye)


def _fd_combine_np(xdot, hist, scale, past):
    solve_term = scale * xdot
    recursion_term = -np.tensordot(past, hist[: past.shape[0]], axes=1)
    out = solve_term + recursion_term
    return out, np.linalg.norm(solve_term), np.linalg.norm(recursion_term)


def _sqrt_defect_np(A, X):
    return np.linalg.norm(A - X @ X)


def _symm_defect_np(A, S):
    return np.linalg.norm(S @ A - A.T @ S)


# --- numba path -------------------------------------------------------------


@njit
def _sylvester_matrix_nb(L, R):
    n = L.shape[0]
    N = n * n
    P = np.zeros((N, N), dtype=np.complex128)
    for j in range(n):
        for i in range(n):
            r = i + j * n
            for k in range(n):
                P[r, k + j * n] += L[i, k]
                P[r, i + k * n] += R[k, j]
    return P


@njit
def _fd_combine_nb(xdot, hist, scale, past):
    n0, n1 = xdot.shape
    out = np.empty((n0, n1), dtype=np.complex128)
    ss = 0.0
    rs = 0.0
    m = past.shape[0]
    for j in range(n1):
        for i in range(n0):
            s = scale * xdot[i, j]
            r = 0.0j
            for p in range(m):
                r -= past[p] * hist[p, i, j]
            out[i, j] = s + r
            ss += s.real * s.real + s.imag * s.imag
            rs += r.real * r.real + r.imag * r.imag
    return out, np.sqrt(ss), np.sqrt(rs)


@njit
def _sqrt_defect_nb(A, X):
    n = A.shape[0]
    acc = 0.0
    for i in range(n):
        for j in range(n):
            v = A[i, j]
            for k in range(n):
                v -= X[i, k] * X[k, j]
            acc += v.real * v.real + v.imag * v.imag
    return np.sqrt(acc)


@njit
def _symm_defect_nb(A, S):
    n = A.shape[0]
    acc = 0.0
    for i in range(n):
        for j in range(n):
            v = 0.0j
            for k in range(n):
                # (S A)_ij - (A^T S)_ij
                v += S[i, k] * A[k, j] - A[k, i] * S[k, j]
            acc += v.real * v.real + v.imag * v.imag
    return np.sqrt(acc)


NUMPY = SimpleNamespace(
    sylvester_matrix=_sylvester_matrix_np,
    fd_combine=_fd_combine_np,
    sqrt_defect=_sqrt_defect_np,
    symm_defect=_symm_defect_np,
)

NUMBA = SimpleNamespace(
    sylvester_matrix=_sylvester_matrix_nb,
    fd_combine=_fd_combine_nb,
    sqrt_defect=_sqrt_defect_nb,
    symm_defect=_symm_defect_nb,
)

_active = NUMBA if USE_NUMBA else NUMPY


def sylvester_matrix(L, R):
    """Matrix of the operator ``D -> L @ D + D @ R`` acting on ``vec(D)``.

    Equals ``kron(I, L) + kron(R.T, I)`` for column-stacked ``vec``.
    """
    return _active.sylvester_matrix(
        np.ascontiguousarray(L, dtype=np.complex128),
        np.ascontiguousarray(R, dtype=np.complex128),
    )


def fd_combine(xdot, hist, scale, past):
    """Return ``scale*xdot - sum_i past[i]*hist[i]`` and both term norms.

    ``hist`` is a ``(m, n, n)`` stack, newest first.
    """
    return _active.fd_combine(
        np.ascontiguousarray(xdot, dtype=np.complex128),
        np.ascontiguousarray(hist, dtype=np.complex128),
        complex(scale),
        np.ascontiguousarray(past, dtype=np.complex128),
    )


def sqrt_defect(A, X):
    """Frobenius norm of ``A - X @ X``."""
    return float(_active.sqrt_defect(
        np.ascontiguousarray(A, dtype=np.complex128),
        np.ascontiguousarray(X, dtype=np.complex128),
    ))


def symm_defect(A, S):
    """Frobenius norm of ``S @ A - A.T @ S``."""
    return float(_active.symm_defect(
        np.ascontiguousarray(A, dtype=np.complex128),
        np.ascontiguousarray(S, dtype=np.complex128),
    ))
