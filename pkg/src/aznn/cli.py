"""Command-line front end.

Subcommands::

    run-sqrt            time-varying matrix square root on a trial flow
    run-symmetrizer     time-varying symmetrizer on a trial flow
    static-symmetrizer  homotopy symmetrizer of a gallery or file matrix
    derive-formula      search a convergent look-ahead formula of type j_s
    gallery             export a gallery matrix
    report              re-summarize stored trajectory CSVs

Exit codes: 0 success, 1 usage or I/O error, 2 divergence, 3 rank-deficient
static symmetrizer.

Run parameters may come from an INI file (``--config``) with sections
``[run]``, ``[startup]``, ``[iterate]``, ``[final]`` and ``[static]``;
command-line flags override file values.
"""

import argparse
import configparser
from dataclasses import replace
import math
import sys

from . import engine, findiff, flows, static
from .linalg_core import condition_and_rank, format_matrix, read_matrix, write_matrix
from .problems import SquareRootAdapter, SymmetrizerAdapter

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DIVERGED = 2
EXIT_RANK_DEFICIENT = 3


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which is the divergence code here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _positive(v):
    return v > 0 and math.isfinite(v)


def _nonneg(v):
    return v >= 0 and math.isfinite(v)


def _int_pos(v):
    return v >= 1


# dest -> (section, key, type, check, message)
_TV_FIELDS = {
    "n": ("run", "n", int, lambda v: v >= 2, "must be an integer >= 2"),
    "seed": ("run", "seed", int, None, ""),
    "formula": ("run", "formula", str, None, ""),
    "tau": ("run", "tau", float, _positive, "must be a positive number"),
    "t0": ("run", "t0", float, lambda v: math.isfinite(v), "must be finite"),
    "t_end": ("run", "t_end", float, lambda v: math.isfinite(v), "must be finite"),
    "csv": ("run", "csv", str, None, ""),
    "summary": ("run", "summary", str, None, ""),
    "snapshot_times": ("run", "snapshot_times", str, None, ""),
    "complex": ("run", "complex", bool, None, ""),
    "eta_start": ("startup", "eta", float, _positive, "must be a positive number"),
    "startup_steps": ("startup", "steps", int, _int_pos, "must be a positive integer"),
    "startup_decay": ("startup", "decay", str,
                      lambda v: v in engine.STARTUP_DECAY_MODES,
                      f"must be one of {', '.join(engine.STARTUP_DECAY_MODES)}"),
    "eta_iter": ("iterate", "eta", float, _positive, "must be a positive number"),
    "eta_final": ("final", "eta", float, _positive, "must be a positive number"),
    "final_switch_time": ("final", "switch_time", float, lambda v: math.isfinite(v), "must be finite"),
}

_STATIC_FIELDS = {
    "gallery": ("static", "gallery", str, lambda v: v in flows.GALLERY,
                f"must be one of {', '.join(flows.GALLERY)}"),
    "matrix": ("static", "matrix", str, None, ""),
    "n": ("static", "n", int, _int_pos, "must be a positive integer"),
    "alpha": ("static", "alpha", float, lambda v: math.isfinite(v), "must be finite"),
    "similarity_seed": ("static", "similarity_seed", int, None, ""),
    "preset": ("static", "preset", str, lambda v: v in static.PRESETS,
               f"must be one of {', '.join(static.PRESETS)}"),
    "eta": ("static", "eta", float, _positive, "must be a positive number"),
    "a": ("static", "a", float, _positive, "must be a positive number"),
    "t0": ("static", "t0", float, lambda v: 0 < v < 1, "must lie in (0, 1)"),
    "tau": ("static", "tau", float, _positive, "must be a positive number"),
    "bb_scale": ("static", "bb_scale", float, _positive, "must be a positive number"),
    "seed": ("static", "seed", int, None, ""),
    "guess_eps": ("static", "guess_eps", float, _nonneg, "must be a nonnegative number"),
    "output": ("static", "output", str, None, ""),
    "certificate": ("static", "certificate", str, None, ""),
    "csv": ("static", "csv", str, None, ""),
}

_SQRT_DEFAULTS = dict(n=3, seed=0, formula="4_5", tau=0.02, t0=10.0, t_end=610.0,
                      eta_start=160.0, startup_steps=12, startup_decay="implicit", eta_iter=1.45,
                      complex=False)
_SYMM_DEFAULTS = dict(n=5, seed=0, formula="4_5", tau=0.05, t0=0.0, t_end=3600.0,
                      eta_start=3.24, startup_steps=12, startup_decay="implicit", eta_iter=0.36,
                      complex=False)
_STATIC_DEFAULTS = dict(preset="small", alpha=1.0, seed=None)


def _load_ini(path):
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"config {path}: {exc}") from exc
    return cp


def _convert(raw, typ, where):
    if typ is bool:
        s = str(raw).strip().lower()
        if s in ("1", "true", "yes", "on"):
            return True
        if s in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{where}: expected a boolean, got {raw!r}")
    try:
        return typ(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected {typ.__name__}, got {raw!r}") from None


def _merge(args, fields, defaults):
    """Flags override the config file, which overrides defaults; validated per field."""
    cp = _load_ini(args.config) if getattr(args, "config", None) else None
    if cp is not None:
        known = {(sec, key) for sec, key, *_ in fields.values()}
        for sec in cp.sections():
            for key in cp[sec]:
                if (sec, key) not in known:
                    raise ConfigError(f"config {args.config}: unknown field [{sec}] {key}")
    out = {}
    for dest, (sec, key, typ, check, msg) in fields.items():
        val = getattr(args, dest, None)
        where = f"--{dest.replace('_', '-')}"
        if val is None and cp is not None and cp.has_option(sec, key):
            where = f"field [{sec}] {key}"
            val = _convert(cp.get(sec, key), typ, where)
        if val is None:
            val = defaults.get(dest)
        if val is not None and check is not None and not check(val):
            raise ConfigError(f"{where}: {msg}, got {val!r}")
        out[dest] = val
    return out


def _snapshot_times(spec):
    if not spec:
        return ()
    try:
        return tuple(float(x) for x in spec.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"snapshot_times: expected numbers, got {spec!r}") from None


def _phase_config(c, formula, baseline):
    if baseline:
        return engine.baseline_config(c["eta_iter"], formula)
    return engine.PhaseConfig(
        eta_start=c["eta_start"], startup_steps=c["startup_steps"], eta_iter=c["eta_iter"],
        eta_final=c["eta_final"], final_switch_time=c["final_switch_time"],
        startup_decay=c["startup_decay"])


def _write_text(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def _emit(summary, path):
    sys.stdout.write(summary)
    if path:
        _write_text(path, summary)


def _run_tv(args, problem):
    c = _merge(args, _TV_FIELDS, _SQRT_DEFAULTS if problem == "sqrt" else _SYMM_DEFAULTS)
    try:
        formula = findiff.resolve(c["formula"])
    except KeyError:
        raise ConfigError(f"--formula: unknown formula {c['formula']!r}") from None
    if not c["t_end"] > c["t0"]:
        raise ConfigError(f"--t-end: must exceed t0={c['t0']!r}, got {c['t_end']!r}")
    cfg = _phase_config(c, formula, args.baseline)
    try:
        cfg.validate(formula)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    n = c["n"]
    if problem == "sqrt":
        flow = flows.trial_flow_squared(n, c["seed"])
        adapter = SquareRootAdapter(n)
    else:
        flow = flows.trial_flow_general(n, c["seed"], complex_flag=c["complex"])
        adapter = SymmetrizerAdapter(n, enforce_symmetry=not args.no_enforce, seed=c["seed"])
    extra = [("problem", problem), ("flow", flow.descriptor)]
    try:
        traj = engine.run(adapter, flow, cfg, formula, c["tau"], c["t0"], c["t_end"],
                          snapshot_times=_snapshot_times(c["snapshot_times"]))
        code = EXIT_OK
    except engine.DivergenceError as exc:
        traj = exc.trajectory
        extra.append(("error", str(exc)))
        code = EXIT_DIVERGED
    if c["csv"]:
        engine.write_csv(traj, c["csv"])
    if traj.final is not None and problem == "symmetrizer":
        cond2, rank = condition_and_rank(traj.final)
        extra += [("final_cond2", repr(cond2)), ("final_rank", str(rank))]
    _emit(engine.summarize(traj, cfg, c["tau"], formula, extra), c["summary"])
    return code


def _static_matrix(c):
    if c["matrix"] and c["gallery"]:
        raise ConfigError("give either --matrix or --gallery, not both")
    if c["matrix"]:
        A = read_matrix(c["matrix"])
        label = c["matrix"]
    elif c["gallery"]:
        try:
            A = flows.gallery(c["gallery"], c["n"] if c["gallery"] != "two_by_two" else None,
                              alpha=c["alpha"])
        except ValueError as exc:
            raise ConfigError(f"--gallery: {exc}") from None
        label = f"{c['gallery']}" + ("" if c["gallery"] == "two_by_two" else f"({A.shape[0]})")
        if c["gallery"] == "two_by_two":
            label += f" alpha={c['alpha']!r}"
    else:
        raise ConfigError("one of --matrix or --gallery is required")
    if c["similarity_seed"] is not None:
        A = flows.random_unitary_similarity(A, c["similarity_seed"])
        label += f" unitary-similarity seed={c['similarity_seed']}"
    return A, label


def cmd_static(args):
    c = _merge(args, _STATIC_FIELDS, _STATIC_DEFAULTS)
    A, label = _static_matrix(c)
    overrides = {}
    for dest, name in (("eta", "eta"), ("a", "approach_exponent"), ("t0", "t0"), ("tau", "tau"),
                       ("bb_scale", "bb_scale"), ("seed", "seed"), ("guess_eps", "guess_eps")):
        if c[dest] is not None:
            overrides[name] = c[dest]
    p = static.preset(c["preset"], **overrides)
    if overrides:
        p = replace(p, preset_name=f"{c['preset']}+custom")
    try:
        p.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    try:
        cert, traj = static.solve_static(A, p, return_trajectory=True)
    except engine.DivergenceError as exc:
        if c["csv"] and exc.trajectory is not None:
            engine.write_csv(exc.trajectory, c["csv"])
        sys.stderr.write(f"static-symmetrizer: {exc}\n")
        return EXIT_DIVERGED
    text = f"matrix: {label}\n" + cert.format()
    _emit(text, c["certificate"])
    if c["output"]:
        write_matrix(c["output"], cert.S)
    if c["csv"]:
        engine.write_csv(traj, c["csv"])
    return EXIT_OK if cert.full_rank else EXIT_RANK_DEFICIENT


def cmd_derive(args):
    try:
        f = findiff.derive(args.j, args.s, search_seed=args.seed, trials=args.trials)
    except findiff.NoConvergentFormula as exc:
        sys.stderr.write(f"derive-formula: {exc}\n")
        return EXIT_ERROR
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    sys.stdout.write(findiff.format_report(f))
    return EXIT_OK


def cmd_gallery(args):
    try:
        A = flows.gallery(args.kind, None if args.kind == "two_by_two" else args.n,
                          alpha=args.alpha, seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.similarity_seed is not None:
        A = flows.random_unitary_similarity(A, args.similarity_seed)
    if args.output:
        write_matrix(args.output, A)
    else:
        sys.stdout.write(format_matrix(A))
    return EXIT_OK


def cmd_report(args):
    code = EXIT_OK
    for path in args.csv:
        traj = engine.read_csv(path)
        sys.stdout.write(f"file: {path}\n")
        sys.stdout.write(engine.summarize(traj))
        if traj.residuals and not math.isfinite(traj.residuals[-1]):
            code = EXIT_DIVERGED
    return code


def _add_tv(sub, name, help_text, problem):
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--config", help="INI file with [run] [startup] [iterate] [final] sections")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--formula", help="euler_1_2 | fiveifd_2_3 | four_five_4_5 (or 1_2, 2_3, 4_5)")
    p.add_argument("--tau", type=float)
    p.add_argument("--t0", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--eta-start", dest="eta_start", type=float)
    p.add_argument("--startup-steps", dest="startup_steps", type=int)
    p.add_argument("--startup-decay", dest="startup_decay", choices=engine.STARTUP_DECAY_MODES)
    p.add_argument("--eta-iter", dest="eta_iter", type=float)
    p.add_argument("--eta-final", dest="eta_final", type=float)
    p.add_argument("--final-switch-time", dest="final_switch_time", type=float)
    p.add_argument("--snapshot-times", dest="snapshot_times", help="comma separated times")
    p.add_argument("--baseline", action="store_true",
                   help="basic ZNN: eta_start = eta_iter, minimal start-up")
    p.add_argument("--csv", help="trajectory CSV path")
    p.add_argument("--summary", help="also write the summary to this path")
    if problem == "symmetrizer":
        p.add_argument("--complex", action="store_const", const=True, default=None)
        p.add_argument("--no-enforce", action="store_true", help="skip symmetrization after each step")
    p.set_defaults(func=lambda a: _run_tv(a, problem))


def build_parser():
    ap = _Parser(prog="aznn", description="Adapted Zhang neural network solvers.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _add_tv(sub, "run-sqrt", "time-varying matrix square root", "sqrt")
    _add_tv(sub, "run-symmetrizer", "time-varying matrix symmetrizer", "symmetrizer")

    p = sub.add_parser("static-symmetrizer", help="symmetrizer of a fixed matrix")
    p.add_argument("--config")
    p.add_argument("--gallery", choices=flows.GALLERY)
    p.add_argument("--matrix", help="matrix file in the plain-text format")
    p.add_argument("--n", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--similarity-seed", dest="similarity_seed", type=int,
                   help="apply a seeded random unitary similarity first")
    p.add_argument("--preset", choices=tuple(static.PRESETS))
    p.add_argument("--eta", type=float)
    p.add_argument("--a", type=float, help="approach exponent")
    p.add_argument("--t0", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--bb-scale", dest="bb_scale", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--guess-eps", dest="guess_eps", type=float)
    p.add_argument("--output", help="write S here")
    p.add_argument("--certificate", help="also write the certificate here")
    p.add_argument("--csv", help="per-step trajectory CSV")
    p.set_defaults(func=cmd_static)

    p = sub.add_parser("derive-formula", help="derive a convergent look-ahead formula")
    p.add_argument("--j", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=1)
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("gallery", help="export a gallery matrix")
    p.add_argument("--kind", choices=flows.GALLERY, required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--similarity-seed", dest="similarity_seed", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_gallery)

    p = sub.add_parser("report", help="summarize trajectory CSV files")
    p.add_argument("csv", nargs="+")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"aznn {args.command}: invalid configuration: {exc}\n")
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        sys.stderr.write(f"aznn {args.command}: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
