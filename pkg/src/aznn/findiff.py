"""Convergent look-ahead finite difference formulas of type ``j_s``.

A formula on ``m = j + s`` equidistant samples estimates the derivative at
``t_k`` from one future and ``m - 1`` current/past values::

    zdot_k ~ (w_0 z_{k+1} + w_1 z_k + ... + w_{m-1} z_{k-m+2}) / (c * tau)

Solving for ``z_{k+1}`` gives the one-step predictor used by the ZNN
recursion.  Coefficients are kept as exact rationals.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
import math

import mpmath
import numpy as np
from scipy.optimize import differential_evolution

ROOT_MARGIN = 1e-8
P1_TOL = 1e-12

# Closed-loop design range for h = eta*tau used by derive().  Covers the
# iteration-phase settings the ZNN runs use (h ~ 0.03 to 0.06).
DEFAULT_H_DESIGN = (0.0, 0.015, 0.03, 0.045, 0.06)


class NoConvergentFormula(RuntimeError):
    def __init__(self, j, s, local_order, best_modulus):
        super().__init__(
            f"no convergent {j}_{s} formula of local order {local_order}; "
            f"best extraneous root modulus {best_modulus:.6g}"
        )
        self.best_modulus = best_modulus


@dataclass(frozen=True)
class FDFormula:
    j: int
    s: int
    future_weight: Fraction
    past_weights: tuple
    tau_scale: Fraction
    local_order: int
    name: str = ""

    @property
    def npoints(self):
        return 1 + len(self.past_weights)

    @property
    def weights(self):
        """All numerator weights, future value first."""
        return (self.future_weight,) + tuple(self.past_weights)

    def recursion_coefficients(self):
        """Normalized coefficients ``1, alpha_k, alpha_{k-1}, ...`` of p(x)."""
        w0 = self.future_weight
        return tuple(w / w0 for w in self.weights)

    def step_coefficients(self, tau):
        """Float ``(scale, past)`` with ``z_{k+1} = scale*zdot_k - past @ history``."""
        w0 = self.future_weight
        scale = float(self.tau_scale / w0) * tau
        past = np.array([float(w / w0) for w in self.past_weights])
        return scale, past

    def label(self):
        return self.name or f"{self.j}_{self.s}"


def _frac_tuple(values):
    return tuple(Fraction(v) for v in values)


def _make(j, s, weights, tau_scale, name=""):
    weights = _frac_tuple(weights)
    tau_scale = Fraction(tau_scale)
    return FDFormula(
        j=j,
        s=s,
        future_weight=weights[0],
        past_weights=weights[1:],
        tau_scale=tau_scale,
        local_order=exactness_order(weights, tau_scale),
        name=name,
    )


def _offsets(m):
    # sample positions relative to t_k, in units of tau: +1, 0, -1, ...
    return [1 - i for i in range(m)]


def exactness_order(weights, tau_scale):
    """Largest ``L`` such that the derivative estimate is exact for degree < L."""
    offs = _offsets(len(weights))
    L = 0
    for p in range(len(weights) + 2):
        moment = sum(Fraction(w) * Fraction(o) ** p for w, o in zip(weights, offs))
        target = Fraction(tau_scale) if p == 1 else Fraction(0)
        if moment != target:
            break
        L = p + 1
    return L


# --- registry ---------------------------------------------------------------

# Produced once by derive(4, 5, search_seed=1) and frozen here.
_FOUR_FIVE_WEIGHTS = (
    36498653914, 32033212675, -42418240200, -52798521116, 14943108080,
    23651821161, -8638524560, -6189512400, 2918002446,
)
_FOUR_FIVE_SCALE = 104981007540


def builtin(kind):
    """Registered formula: ``euler_1_2``, ``fiveifd_2_3`` or ``four_five_4_5``."""
    if kind == "euler_1_2":
        return _make(1, 2, (1, -1), 1, name="euler_1_2")
    if kind == "fiveifd_2_3":
        return _make(2, 3, (8, 1, -6, -5, 2), 18, name="fiveifd_2_3")
    if kind == "four_five_4_5":
        return _make(4, 5, _FOUR_FIVE_WEIGHTS, _FOUR_FIVE_SCALE, name="four_five_4_5")
    raise KeyError(f"unknown builtin formula {kind!r}")


def from_weights(weights, tau_scale=1, j=None, s=None, name=""):
    """Formula from numerator weights (future value first) and ``tau_scale``.

    ``j`` and ``s`` only label the formula; they default to ``1`` and
    ``len(weights) - 1``.
    """
    if len(weights) < 2:
        raise ValueError("a look-ahead formula needs at least two weights")
    if Fraction(weights[0]) == 0:
        raise ValueError("the weight of z_{k+1} must be nonzero")
    if Fraction(tau_scale) == 0:
        raise ValueError("tau_scale must be nonzero")
    j = 1 if j is None else j
    s = len(weights) - j if s is None else s
    return _make(j, s, weights, tau_scale, name=name)


FORMULA_ALIASES = {
    "1_2": "euler_1_2",
    "euler": "euler_1_2",
    "2_3": "fiveifd_2_3",
    "5ifd": "fiveifd_2_3",
    "4_5": "four_five_4_5",
}


def resolve(kind):
    return builtin(FORMULA_ALIASES.get(kind, kind))


# --- convergence checks -----------------------------------------------------


@dataclass(frozen=True)
class ConvergenceReport:
    p_at_1: float
    extraneous_root_moduli: tuple
    passed: bool


def _deflate_at_one(coeffs):
    # synthetic division of p(x) by (x - 1); coeffs highest power first
    out = [coeffs[0]]
    for c in coeffs[1:-1]:
        out.append(c + out[-1])
    return out


def check_convergent(f):
    """Check ``p(1) = 0`` and the strict root condition on the other roots."""
    coeffs = f.recursion_coefficients()
    p1 = sum(coeffs)
    if p1 == 0:
        quotient = _deflate_at_one(list(coeffs))
        roots = np.roots([float(c) for c in quotient]) if len(quotient) > 1 else np.array([])
    else:
        roots = np.roots([float(c) for c in coeffs])
        if roots.size:
            roots = np.delete(roots, np.argmin(np.abs(roots - 1.0)))
    moduli = tuple(sorted((float(abs(r)) for r in roots), reverse=True))
    passed = abs(float(p1)) <= P1_TOL and all(r <= 1.0 - ROOT_MARGIN for r in moduli)
    return ConvergenceReport(p_at_1=float(p1), extraneous_root_moduli=moduli, passed=passed)


def closed_loop_radius(f, h):
    """Largest modulus among the non-principal roots of the ZNN error recursion.

    With decay product ``h = eta*tau`` the error obeys
    ``w0 e_{k+1} + w1 e_k + ... = -c*h*e_k``; the principal root sits near
    ``1 - h`` and the rest must stay inside the unit disk.
    """
    w = np.array([float(x) for x in f.weights]) / float(f.tau_scale)
    w[1] += h
    roots = np.roots(w)
    roots = np.delete(roots, np.argmin(np.abs(roots - (1.0 - h))))
    return float(np.max(np.abs(roots))) if roots.size else 0.0


# --- derivation ----------------------------------------------------------------


def _order_system(m, L):
    # rows p = 0..L-1; derivative scale fixed to 1
    offs = _offsets(m)
    V = [[Fraction(o) ** p for o in offs] for p in range(L)]
    rhs = [Fraction(1 if p == 1 else 0) for p in range(L)]
    return V, rhs


def _solve_exact(A, b):
    # Gauss-Jordan over the rationals; A square and nonsingular
    n = len(A)
    M = [list(row) + [bi] for row, bi in zip(A, b)]
    for col in range(n):
        piv = next(r for r in range(col, n) if M[r][col] != 0)
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [x * inv for x in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                fac = M[r][col]
                M[r] = [x - fac * y for x, y in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


def _exact_weights(m, L, free):
    V, rhs = _order_system(m, L)
    A = [row[:L] for row in V]
    rhs = [r - sum(row[L + i] * free[i] for i in range(len(free))) for r, row in zip(rhs, V)]
    return _solve_exact(A, rhs) + list(free)


def _float_parametrization(m, L):
    V, rhs = _order_system(m, L)
    Vf = np.array([[float(x) for x in row] for row in V])
    A, B = Vf[:, :L], Vf[:, L:]
    Ainv = np.linalg.inv(A)
    base = Ainv @ np.array([float(r) for r in rhs])
    return base, -Ainv @ B


def _batched_objective(m, L, h_grid):
    base, lin = _float_parametrization(m, L)
    hs = np.asarray(h_grid, dtype=float)
    d = m - 1

    def objective(X):
        # X: (nfree, npop) as passed by differential_evolution(vectorized=True)
        X = np.atleast_2d(X)
        if X.shape[0] != m - L:
            X = X.T
        npop = X.shape[1]
        W = np.empty((npop, m))
        W[:, :L] = base + (lin @ X).T
        W[:, L:] = X.T
        bad = np.abs(W[:, 0]) < 1e-12
        W[bad, 0] = 1.0
        # companion matrices for every (candidate, h) pair
        C = np.repeat(W[:, None, :], hs.size, axis=1)
        C[:, :, 1] += hs
        C = C / C[:, :, :1]
        comp = np.zeros((npop, hs.size, d, d))
        comp[:, :, 0, :] = -C[:, :, 1:]
        idx = np.arange(d - 1)
        comp[:, :, idx + 1, idx] = 1.0
        roots = np.linalg.eigvals(comp)
        principal = np.argmin(np.abs(roots - (1.0 - hs)[None, :, None]), axis=2)
        mod = np.abs(roots)
        np.put_along_axis(mod, principal[..., None], -np.inf, axis=2)
        val = mod.max(axis=2).max(axis=1)
        val[bad] = np.inf
        return val

    return objective


def _lcm(a, b):
    return a * b // math.gcd(a, b)


def _integerize(weights):
    # scale rational weights (with tau_scale 1) to integers; return (ints, scale)
    den = reduce(_lcm, (w.denominator for w in weights), 1)
    ints = [int(w * den) for w in weights]
    g = reduce(math.gcd, ints, 0) or 1
    sign = -1 if ints[0] < 0 else 1
    return [sign * v // g for v in ints], Fraction(sign * den, g)


def derive(j, s, search_seed=0, trials=1, local_order=None, h_design=DEFAULT_H_DESIGN,
           rational_slack=1e-3):
    """Derive a convergent look-ahead formula on ``j + s`` points.

    Tries local orders from ``j + s`` downwards (or only ``local_order`` when
    given).  Free parameters left by the order conditions are chosen by a
    seeded differential-evolution search minimizing the largest extraneous
    root modulus of the ZNN error recursion over ``h_design``; ``h = 0`` is
    always part of that grid, so the result also passes
    :func:`check_convergent`.  The free weights are then replaced by the
    simplest rationals (denominators 10**3 ... 10**10) whose root radius stays
    within ``rational_slack`` of the float optimum, and the remaining weights
    are solved exactly.  Trailing zero weights are dropped, so ``derive(1, 2)``
    returns the two-point Euler rule.

    Raises
    ------
    NoConvergentFormula
        If no order in the tried range admits a convergent formula.
    """
    if j < 1 or s < 2:
        raise ValueError("derive needs j >= 1 and s >= 2")
    m = j + s
    h_grid = tuple(sorted(set((0.0,) + tuple(h_design))))
    orders = [local_order] if local_order is not None else list(range(m, 1, -1))
    best_seen = math.inf
    for L in orders:
        nfree = m - L
        if nfree == 0:
            f = _finish(j, s, _exact_weights(m, L, []))
            if f is not None:
                radius = _design_radius(f, h_grid)
                best_seen = min(best_seen, radius)
                if _accept(f, radius, L):
                    return f
            continue
        objective = _batched_objective(m, L, h_grid)
        best_fun, best_x = math.inf, None
        for t in range(trials):
            res = differential_evolution(
                objective,
                [(-0.25, 0.25)] * nfree,
                seed=search_seed + t,
                tol=1e-12,
                maxiter=2000,
                popsize=15,
                init="sobol",
                polish=False,
                vectorized=True,
                updating="deferred",
            )
            if res.fun < best_fun:
                best_fun, best_x = float(res.fun), res.x
        best_seen = min(best_seen, best_fun)
        if best_x is None or best_fun > 1.0 - ROOT_MARGIN:
            continue
        for digits in range(3, 11):
            free = [Fraction(float(x)).limit_denominator(10**digits) for x in best_x]
            f = _finish(j, s, _exact_weights(m, L, free))
            if f is None:
                continue
            radius = _design_radius(f, h_grid)
            if radius <= best_fun + rational_slack and _accept(f, radius, L):
                return f
    raise NoConvergentFormula(j, s, orders[-1], best_seen)


def _finish(j, s, weights):
    while len(weights) > 2 and weights[-1] == 0:
        weights = weights[:-1]
    if weights[0] == 0:
        return None
    ints, scale = _integerize(weights)
    return _make(j, s, ints, scale, name=f"derived_{j}_{s}")


def _design_radius(f, h_grid):
    return max(closed_loop_radius(f, h) for h in h_grid)


def _accept(f, radius, L):
    return check_convergent(f).passed and radius <= 1.0 - ROOT_MARGIN and f.local_order >= L


# --- empirical accuracy ---------------------------------------------------------

_TESTS = {
    "exp": (mpmath.exp, mpmath.exp),
    "sin": (mpmath.sin, mpmath.cos),
    "cos": (mpmath.cos, lambda t: -mpmath.sin(t)),
}


def derivative_error(f, func, dfunc, tau, points=(0.25, 0.5, 1.0), dps=50):
    """Max abs error of the formula's derivative estimate at the given points."""
    with mpmath.workdps(dps):
        tau_m = mpmath.mpf(tau)
        ws = [mpmath.mpf(w.numerator) / w.denominator for w in f.weights]
        c = mpmath.mpf(f.tau_scale.numerator) / f.tau_scale.denominator
        offs = _offsets(f.npoints)
        err = mpmath.mpf(0)
        for t in points:
            t = mpmath.mpf(t)
            est = mpmath.fsum(w * func(t + o * tau_m) for w, o in zip(ws, offs)) / (c * tau_m)
            err = max(err, abs(est - dfunc(t)))
        return float(err)


def empirical_order(f, test="exp", tau_list=(0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002)):
    """Least-squares slope of log(derivative error) against log(tau).

    ``test`` is ``"exp"``, ``"sin"``, ``"cos"`` or a ``(func, dfunc)`` pair
    of mpmath-compatible callables; evaluation runs at 50 digits so rounding
    does not contaminate small-tau errors.
    """
    taus = sorted((float(t) for t in tau_list), reverse=True)
    if len(taus) < 3:
        raise ValueError("need at least 3 tau values")
    if taus[0] / taus[-1] < 100.0 * (1 - 1e-12):
        raise ValueError("tau values must span at least two decades")
    func, dfunc = _TESTS[test] if isinstance(test, str) else test
    errs = [derivative_error(f, func, dfunc, t) for t in taus]
    if min(errs) < 1e-15:
        raise ValueError(
            f"derivative error underflows ({min(errs):.3g} < 1e-15); shrink the tau range"
        )
    slope, _ = np.polyfit(np.log(taus), np.log(errs), 1)
    return float(slope)


def predict_next(f, xdot_k, history, tau):
    """Predict ``x_{k+1}`` from ``xdot_k`` and ``history`` (newest first)."""
    need = f.npoints - 1
    if len(history) < need:
        raise ValueError(f"{f.label()} needs {need} history entries, got {len(history)}")
    scale, past = f.step_coefficients(tau)
    out = scale * np.asarray(xdot_k, dtype=np.complex128)
    for c, h in zip(past, history[:need]):
        out = out - c * np.asarray(h)
    return out


def _signed(w):
    return f"+{w}" if w >= 0 else str(w)


def format_report(f):
    """Human-readable weights and root report (used by ``derive-formula``)."""
    rep = check_convergent(f)
    lines = [
        f"formula {f.label()}  (j={f.j}, s={f.s}, points={f.npoints}, local_order={f.local_order})",
        "zdot_k = (" + " ".join(f"{_signed(w)}*z[k{1 - i:+d}]" for i, w in enumerate(f.weights))
        + f") / ({f.tau_scale} tau)",
        "normalized recursion: " + ", ".join(str(c) for c in f.recursion_coefficients()),
        f"p(1) = {rep.p_at_1:.3g}",
        "extraneous root moduli: " + ", ".join(f"{r:.6f}" for r in rep.extraneous_root_moduli),
        f"convergent: {'yes' if rep.passed else 'no'}",
    ]
    return "\n".join(lines)
