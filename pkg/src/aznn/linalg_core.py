"""Dense complex matrix helpers shared by every other module.

Vectorization is column-stacking (``X(:)`` order), so that

    vec(A @ X @ B) == kron(B.T, A) @ vec(X)

Residual metrics use the Frobenius norm; condition numbers use the 2-norm.
"""

from dataclasses import dataclass
import io
import math
import re

import numpy as np
import scipy.linalg

from . import kernels

DEFAULT_RANK_TOL = 1e-12

_MAX_DIM = 2**31 - 1


def as_matrix(M, name="matrix"):
    """Return ``M`` as a 2-D complex128 array, rejecting empty input."""
    A = np.asarray(M, dtype=np.complex128)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {A.shape}")
    return A


def kron(A, B):
    """Kronecker product ``A (x) B``."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    rows = A.shape[0] * B.shape[0]
    cols = A.shape[1] * B.shape[1]
    if rows > _MAX_DIM or cols > _MAX_DIM:
        raise OverflowError(f"Kronecker product of size {rows}x{cols} overflows the index range")
    return np.kron(A, B)


def vec(X):
    """Stack the columns of ``X`` into one vector."""
    return np.asarray(X).reshape(-1, order="F")


def unvec(v, rows, cols=None):
    """Inverse of :func:`vec`."""
    cols = rows if cols is None else cols
    v = np.asarray(v)
    if v.ndim != 1 or v.shape[0] != rows * cols:
        raise ValueError(f"vector of length {v.size} cannot be reshaped to {rows}x{cols}")
    return v.reshape(rows, cols, order="F")


def commutation_permutation(rows, cols):
    """Index array ``p`` with ``vec(X.T) == vec(X)[p]`` for an ``rows x cols`` X."""
    # vec(X.T)[j + i*cols] = X[i, j] = vec(X)[i + j*rows]
    i, j = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    p = np.empty(rows * cols, dtype=np.intp)
    p[(j + i * cols).ravel()] = (i + j * rows).ravel()
    return p


@dataclass(frozen=True)
class SolveReport:
    solution: np.ndarray
    method: str  # "direct" or "least-squares-pseudoinverse"
    rank_estimate: int
    residual_norm: float


def solve(P, q, rank_tol=DEFAULT_RANK_TOL):
    """Solve ``P x = q``, falling back to the minimum-norm least-squares solution.

    Singular values at or below ``rank_tol * sigma_max`` are treated as zero.
    A numerically nonsingular ``P`` is solved by LU; otherwise the
    pseudoinverse solution is returned with ``method`` flagging the fallback.
    """
    P = as_matrix(P, "P")
    q = np.asarray(q, dtype=np.complex128).reshape(-1)
    n = P.shape[0]
    if P.shape[1] != n:
        raise ValueError(f"P must be square, got shape {P.shape}")
    if q.shape[0] != n:
        raise ValueError(f"q has length {q.shape[0]}, expected {n}")
    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(q))):
        raise ValueError("non-finite entries in P or q")

    # gelsd returns the singular values along with the minimum-norm solution
    x, _, rank, _ = scipy.linalg.lstsq(
        P, q, cond=rank_tol, lapack_driver="gelsd", check_finite=False
    )
    if rank == n:
        x = scipy.linalg.solve(P, q, check_finite=False)
        method = "direct"
    else:
        method = "least-squares-pseudoinverse"
    residual = float(np.linalg.norm(P @ x - q))
    return SolveReport(solution=x, method=method, rank_estimate=int(rank), residual_norm=residual)


def sqrt_residual(A, X):
    """Relative square-root defect ``||A - X X||_F / max(1, ||A||_F)``."""
    A = as_matrix(A, "A")
    X = as_matrix(X, "X")
    if A.shape != X.shape or A.shape[0] != A.shape[1]:
        raise ValueError("A and X must be square matrices of the same size")
    return kernels.sqrt_defect(A, X) / max(1.0, float(np.linalg.norm(A)))


def symm_residual(A, S):
    """Relative symmetrizer defect ``||S A - A^T S||_F / ||A||_F``."""
    A = as_matrix(A, "A")
    S = as_matrix(S, "S")
    if A.shape != S.shape or A.shape[0] != A.shape[1]:
        raise ValueError("A and S must be square matrices of the same size")
    nrm = float(np.linalg.norm(A))
    if nrm == 0.0:
        raise ValueError("symm_residual is undefined for the zero matrix")
    return kernels.symm_defect(A, S) / nrm


def condition_and_rank(M, rank_tol=DEFAULT_RANK_TOL):
    """2-norm condition number and numerical rank of ``M``.

    The condition number is ``inf`` whenever the rank is deficient.
    """
    s = np.linalg.svd(as_matrix(M), compute_uv=False)
    if s[0] == 0.0:
        return math.inf, 0
    rank = int(np.count_nonzero(s > rank_tol * s[0]))
    if rank < min(M.shape):
        return math.inf, rank
    return float(s[0] / s[-1]), rank


def is_symmetric(M, tol=1e-13):
    """Plain-transpose symmetry test ``||M - M^T||_F <= tol * max(1, ||M||_F)``."""
    M = as_matrix(M)
    return float(np.linalg.norm(M - M.T)) <= tol * max(1.0, float(np.linalg.norm(M)))


# --- plain-text matrix format ------------------------------------------------
#
#   <rows> <cols> complex|real
#   one row per line, whitespace separated; complex entries as a+bi


def _fmt_real(x):
    return repr(float(x))


def _fmt_complex(z):
    re_, im = float(z.real), float(z.imag)
    sign = "-" if math.copysign(1.0, im) < 0 else "+"
    return f"{re_!r}{sign}{abs(im)!r}i"


_COMPLEX_TOKEN = re.compile(
    r"^([+-]?(?:nan|inf|[0-9.]+(?:e[+-]?\d+)?))([+-])((?:nan|inf|[0-9.]+(?:e[+-]?\d+)?))i$",
    re.IGNORECASE,
)


def _parse_complex(tok):
    m = _COMPLEX_TOKEN.match(tok)
    if m is None:
        # plain real entry inside a complex file
        return complex(float(tok), 0.0)
    im = float(m.group(3))
    return complex(float(m.group(1)), -im if m.group(2) == "-" else im)


def format_matrix(M, kind=None):
    """Serialize ``M`` into the plain-text matrix format.

    ``kind`` defaults to ``"real"`` when every imaginary part is zero.
    """
    A = as_matrix(M)
    if kind is None:
        kind = "real" if not np.any(A.imag) else "complex"
    if kind not in ("real", "complex"):
        raise ValueError(f"unknown matrix kind {kind!r}")
    if kind == "real" and np.any(A.imag):
        raise ValueError("matrix has nonzero imaginary parts; use kind='complex'")
    fmt = _fmt_real if kind == "real" else _fmt_complex
    out = io.StringIO()
    out.write(f"{A.shape[0]} {A.shape[1]} {kind}\n")
    for row in A:
        out.write(" ".join(fmt(x.real if kind == "real" else x) for x in row))
        out.write("\n")
    return out.getvalue()


def parse_matrix(text):
    """Inverse of :func:`format_matrix`; returns a complex128 array."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty matrix text")
    header = lines[0].split()
    if len(header) != 3 or header[2] not in ("real", "complex"):
        raise ValueError(f"bad matrix header {lines[0]!r}")
    rows, cols, kind = int(header[0]), int(header[1]), header[2]
    body = lines[1:]
    if len(body) != rows:
        raise ValueError(f"expected {rows} rows, found {len(body)}")
    A = np.empty((rows, cols), dtype=np.complex128)
    for i, ln in enumerate(body):
        toks = ln.split()
        if len(toks) != cols:
            raise ValueError(f"row {i} has {len(toks)} entries, expected {cols}")
        if kind == "real":
            A[i] = [float(t) for t in toks]
        else:
            A[i] = [_parse_complex(t) for t in toks]
    return A


def write_matrix(path, M, kind=None):
    with open(path, "w") as fh:
        fh.write(format_matrix(M, kind))


def read_matrix(path):
    with open(path) as fh:
        return parse_matrix(fh.read())
