"""Phase-adapted discretized ZNN driver.

A run has a start-up phase of Euler steps with decay constant ``eta_start``
followed by the look-ahead recursion of a j_s formula with ``eta_iter``, and
optionally a third phase with ``eta_final`` from ``final_switch_time`` on.

Each step solves ``P vec(Xdot) = q`` for the current iterate and feeds the
derivative into the difference formula.  The norms of the two parts of the
update (``scale * Xdot`` and the recursion over past iterates) are logged so
their ratio can be inspected.
"""

from dataclasses import dataclass, field
import csv
import io
import math
import time

import numpy as np

from . import kernels
from .findiff import resolve
from .linalg_core import solve, unvec, DEFAULT_RANK_TOL

DIVERGENCE_LIMIT = 1e12
STARTUP_DECAY_MODES = ("implicit", "explicit")
CSV_COLUMNS = ("t", "residual", "solve_term_norm", "recursion_term_norm", "phase")
PHASE_NAMES = ("init", "startup", "iterate", "final")


class DivergenceError(RuntimeError):
    """Raised when the residual exceeds the divergence limit or turns non-finite."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class PhaseConfig:
    """Decay constants and phase lengths of one run.

    ``startup_decay="implicit"`` runs the Euler phase on the implicitly
    discretized decay ``E_{k+1} = E_k / (1 + eta tau)``, i.e. with the
    effective constant ``eta / (1 + eta tau)``; this keeps start-up steps with
    ``eta tau > 2`` stable.  ``"explicit"`` uses ``eta`` unchanged.
    """

    eta_start: float
    startup_steps: int
    eta_iter: float
    eta_final: float = None
    final_switch_time: float = None
    startup_decay: str = "implicit"
    label: str = "adapted ZNN"

    def validate(self, formula=None):
        for name in ("eta_start", "eta_iter"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")
        if (self.eta_final is None) != (self.final_switch_time is None):
            raise ValueError("eta_final and final_switch_time must be given together")
        if self.eta_final is not None and not (math.isfinite(self.eta_final) and self.eta_final > 0):
            raise ValueError(f"eta_final must be a positive finite number, got {self.eta_final!r}")
        if int(self.startup_steps) != self.startup_steps or self.startup_steps < 1:
            raise ValueError(f"startup_steps must be a positive integer, got {self.startup_steps!r}")
        if self.startup_decay not in STARTUP_DECAY_MODES:
            raise ValueError(f"startup_decay must be one of {STARTUP_DECAY_MODES}, got {self.startup_decay!r}")
        if formula is not None:
            need = max(formula.j + formula.s - 1, formula.npoints - 1)
            if self.startup_steps < need:
                raise ValueError(
                    f"startup_steps={self.startup_steps} is too short for {formula.label()}, "
                    f"which needs at least {need}")
        return self

    def startup_eta(self, tau):
        if self.startup_decay == "implicit":
            return self.eta_start / (1.0 + self.eta_start * tau)
        return self.eta_start

    def eta_at(self, t):
        if self.final_switch_time is not None and t >= self.final_switch_time:
            return self.eta_final
        return self.eta_iter


def baseline_config(eta, formula):
    """Basic (non-adapted) ZNN: one decay constant, minimal explicit Euler start-up."""
    return PhaseConfig(
        eta_start=eta,
        startup_steps=formula.j + formula.s - 1,
        eta_iter=eta,
        startup_decay="explicit",
        label="basic ZNN",
    )


def h_report(cfg, tau):
    """Per-phase ``h = eta * tau``."""
    out = [("startup", cfg.eta_start * tau), ("iterate", cfg.eta_iter * tau)]
    if cfg.eta_final is not None:
        out.append(("final", cfg.eta_final * tau))
    return out


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    solve_term_norms: list = field(default_factory=list)
    recursion_term_norms: list = field(default_factory=list)
    phases: list = field(default_factory=list)
    phase_marks: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    step_seconds: list = field(default_factory=list)
    solve_methods: dict = field(default_factory=dict)
    final: np.ndarray = None
    diverged: bool = False

    @property
    def steps(self):
        return len(self.times) - 1

    @property
    def wall_time_per_step(self):
        return float(np.median(self.step_seconds)) if self.step_seconds else math.nan

    def ratios(self):
        """Per-row ``recursion_term / solve_term`` (nan where undefined)."""
        s = np.asarray(self.solve_term_norms, dtype=float)
        r = np.asarray(self.recursion_term_norms, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(s > 0, r / s, np.nan)

    def _record(self, t, residual, s_norm, r_norm, phase):
        self.times.append(t)
        self.residuals.append(residual)
        self.solve_term_norms.append(s_norm)
        self.recursion_term_norms.append(r_norm)
        self.phases.append(phase)


def _time(t0, tau, k):
    # by index; never accumulate tau
    return t0 + k * tau


class _Runner:
    def __init__(self, adapter, flow, tau, t0, snapshot_times, rank_tol, trajectory, time_fn=None):
        self.adapter = adapter
        self.flow = flow
        self.tau = float(tau)
        self.t0 = float(t0)
        self.rank_tol = rank_tol
        self.traj = trajectory
        self.time = time_fn or (lambda k: _time(self.t0, self.tau, k))
        self.snap_steps = {}
        for ts in snapshot_times or ():
            k = int(round((ts - self.t0) / self.tau))
            self.snap_steps.setdefault(k, ts)

    def record(self, k, X, s_norm, r_norm, phase):
        t = self.time(k)
        res = self.adapter.residual(self.flow.value(t), X)
        self.traj._record(t, res, s_norm, r_norm, phase)
        if k in self.snap_steps:
            self.traj.snapshots[t] = X.copy()
        if not math.isfinite(res) or res > DIVERGENCE_LIMIT:
            self.traj.diverged = True
            self.traj.final = X
            raise DivergenceError(
                f"residual {res:.3e} at t={t!r} (step {k}) exceeds the divergence limit "
                f"{DIVERGENCE_LIMIT:.0e}", self.traj)

    def xdot(self, X, k, eta):
        n = X.shape[0]
        P, q = self.adapter.build_system(X, self.time(k), eta, self.flow)
        rep = solve(P, q, self.rank_tol)
        m = self.traj.solve_methods
        m[rep.method] = m.get(rep.method, 0) + 1
        return unvec(rep.solution, n)

    def step(self, k, hist, eta, scale, past, phase):
        tic = time.perf_counter()
        xd = self.xdot(hist[0], k, eta)
        X, s_norm, r_norm = kernels.fd_combine(xd, np.asarray(hist[: len(past)]), scale, past)
        X = self.adapter.enforce_structure(X)
        self.traj.step_seconds.append(time.perf_counter() - tic)
        self.record(k + 1, X, float(s_norm), float(r_norm), phase)
        return X


def _start(runner, cfg):
    traj = runner.traj
    X = runner.adapter.enforce_structure(
        np.asarray(runner.adapter.initial_guess(runner.flow.value(runner.t0)), dtype=np.complex128))
    runner.record(0, X, math.nan, math.nan, "init")
    hist = [X]
    eta = cfg.startup_eta(runner.tau)
    past = np.array([-1.0])
    for k in range(cfg.startup_steps):
        X = runner.step(k, hist, eta, runner.tau, past, "startup")
        hist.insert(0, X)
    traj.phase_marks.append(cfg.startup_steps)
    return hist


def startup(adapter, flow, cfg, tau, t0=0.0, snapshot_times=(), rank_tol=DEFAULT_RANK_TOL,
            time_fn=None, return_trajectory=False):
    """Run the Euler start-up phase; returns the iterates newest first.

    ``time_fn(k)`` overrides the default grid ``t0 + k*tau``.  With
    ``return_trajectory`` the logged Trajectory is returned as well.
    """
    cfg.validate()
    runner = _Runner(adapter, flow, tau, t0, snapshot_times, rank_tol, Trajectory(), time_fn)
    hist = _start(runner, cfg)
    if return_trajectory:
        runner.traj.final = hist[0]
        return hist, runner.traj
    return hist


def _iterate(runner, cfg, formula, t_end, hist, k0):
    need = formula.npoints - 1
    if len(hist) < need:
        raise ValueError(f"{formula.label()} needs {need} history entries, got {len(hist)}")
    hist = list(hist[:need])
    scale, past = formula.step_coefficients(runner.tau)
    K = int(round((t_end - runner.t0) / runner.tau))
    phase = "iterate"
    for k in range(k0, K):
        t = runner.time(k)
        eta = cfg.eta_at(t)
        if eta != cfg.eta_iter and phase == "iterate":
            phase = "final"
            runner.traj.phase_marks.append(k)
        X = runner.step(k, hist, eta, scale, past, phase)
        hist.insert(0, X)
        hist.pop()
    runner.traj.final = hist[0]
    return runner.traj


def iterate(adapter, flow, cfg, formula, tau, t_end, history, t_start=0.0,
            snapshot_times=(), rank_tol=DEFAULT_RANK_TOL):
    """Run the look-ahead recursion from ``history`` (newest first) at ``t_start``."""
    cfg.validate()
    runner = _Runner(adapter, flow, tau, t_start, snapshot_times, rank_tol, Trajectory())
    X = np.asarray(history[0], dtype=np.complex128)
    runner.record(0, X, math.nan, math.nan, "init")
    return _iterate(runner, cfg, formula, t_end, history, 0)


def run(adapter, flow, cfg, formula, tau, t0, t_end, snapshot_times=(), rank_tol=DEFAULT_RANK_TOL):
    """Start-up plus iteration from ``t0`` to ``t_end``; returns the full Trajectory.

    Raises DivergenceError (with the partial trajectory attached) when the
    residual blows past the divergence limit.
    """
    if isinstance(formula, str):
        formula = resolve(formula)
    cfg.validate(formula)
    if not t_end > t0:
        raise ValueError("t_end must exceed t0")
    K = int(round((t_end - t0) / tau))
    if K <= cfg.startup_steps:
        raise ValueError(f"horizon of {K} steps does not exceed the {cfg.startup_steps} start-up steps")
    runner = _Runner(adapter, flow, tau, t0, snapshot_times, rank_tol, Trajectory())
    hist = _start(runner, cfg)
    return _iterate(runner, cfg, formula, t_end, hist, cfg.startup_steps)


# --- export ------------------------------------------------------------------


def _g(x):
    return "%.17g" % x


def format_csv(traj):
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in zip(traj.times, traj.residuals, traj.solve_term_norms,
                   traj.recursion_term_norms, traj.phases):
        w.writerow([_g(row[0]), _g(row[1]), _g(row[2]), _g(row[3]), row[4]])
    return out.getvalue()


def write_csv(traj, path):
    with open(path, "w", newline="") as fh:
        fh.write(format_csv(traj))


def read_csv(path):
    """Load a trajectory CSV into a Trajectory (no snapshots, no timings)."""
    traj = Trajectory()
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise ValueError(f"{path}: not a trajectory CSV (header {header!r})")
        for i, row in enumerate(rows, start=2):
            if len(row) != len(CSV_COLUMNS):
                raise ValueError(f"{path}:{i}: expected {len(CSV_COLUMNS)} fields")
            traj._record(float(row[0]), float(row[1]), float(row[2]), float(row[3]), row[4])
    prev = traj.phases[0] if traj.phases else None
    for k, ph in enumerate(traj.phases):
        if ph != prev and ph != "startup":
            traj.phase_marks.append(k - 1)
        prev = ph
    return traj


def summarize(traj, cfg=None, tau=None, formula=None, extra=()):
    """Structured ``key: value`` text describing one run."""
    res = np.asarray(traj.residuals, dtype=float)
    lines = []
    if cfg is not None:
        lines.append(f"mode: {cfg.label}")
        lines.append(f"eta_start: {cfg.eta_start!r}")
        lines.append(f"startup_steps: {cfg.startup_steps}")
        lines.append(f"startup_decay: {cfg.startup_decay}")
        lines.append(f"eta_iter: {cfg.eta_iter!r}")
        if cfg.eta_final is not None:
            lines.append(f"eta_final: {cfg.eta_final!r}")
            lines.append(f"final_switch_time: {cfg.final_switch_time!r}")
    if formula is not None:
        lines.append(f"formula: {formula.label()}")
    if tau is not None:
        lines.append(f"tau: {tau!r}")
        if cfg is not None:
            for phase, h in h_report(cfg, tau):
                lines.append(f"h_{phase}: {h!r}")
    for key, value in extra:
        lines.append(f"{key}: {value}")
    lines.append(f"steps: {traj.steps}")
    if traj.times:
        lines.append(f"t_start: {traj.times[0]!r}")
        lines.append(f"t_end: {traj.times[-1]!r}")
    lines.append(f"phase_switch_indices: {' '.join(str(k) for k in traj.phase_marks)}")
    if res.size:
        k_min = int(np.nanargmin(res))
        lines.append(f"min_residual: {float(res[k_min])!r} at t={float(traj.times[k_min])!r}")
        lines.append(f"final_residual: {float(res[-1])!r}")
    lines.append(f"diverged: {'yes' if traj.diverged else 'no'}")
    for method, count in sorted(traj.solve_methods.items()):
        lines.append(f"solves_{method}: {count}")
    if traj.step_seconds:
        lines.append(f"wall_time_per_step_median: {traj.wall_time_per_step:.3e}")
    return "\n".join(lines) + "\n"


__all__ = [
    "DIVERGENCE_LIMIT", "DivergenceError", "PhaseConfig", "Trajectory",
    "baseline_config", "h_report", "startup", "iterate", "run",
    "format_csv", "write_csv", "read_csv", "summarize",
]
