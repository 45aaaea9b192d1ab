"""Compare the numba and numpy kernel paths.

    python3 benchmarks/bench_kernels.py [--repeat 200]

Prints the median time per call for each kernel and matrix size, the
speedup, and the largest difference between the two results.  The first
numba call (compilation) is excluded.  A whole-step timing at the end runs
one short square-root trajectory under each backend in a subprocess, since
the backend is fixed at import time by AZNN_DISABLE_NUMBA.
"""

import argparse
import os
import statistics
import subprocess
import sys
import time

import numpy as np

from aznn import kernels


def _median_time(fn, args, repeat):
    fn(*args)  # warm-up / compile
    samples = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        samples.append(time.perf_counter() - t)
    return statistics.median(samples)


def _gap(a, b):
    if isinstance(a, tuple):
        return max(float(np.max(np.abs(np.asarray(x) - np.asarray(y)))) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def _cases(n, rng):
    def cm(*shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    X, A = cm(n, n), cm(n, n)
    hist, past = cm(8, n, n), cm(8)
    return {
        "sylvester_matrix": (X, A),
        "fd_combine": (X, hist, 0.37 + 0j, past),
        "sqrt_defect": (A, X),
        "symm_defect": (A, X),
    }


_STEP_SCRIPT = """
import time
from aznn import engine, flows, problems, kernels
fl = flows.trial_flow_squared(3, 0)
cfg = engine.PhaseConfig(160.0, 12, 1.45)
engine.run(problems.SquareRootAdapter(3), fl, cfg, "4_5", 0.02, 10.0, 11.0)
t = time.perf_counter()
tr = engine.run(problems.SquareRootAdapter(3), fl, cfg, "4_5", 0.02, 10.0, 70.0)
print(kernels.__name__, tr.wall_time_per_step, time.perf_counter() - t)
"""


def _step_timing(disable):
    env = dict(os.environ, AZNN_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", _STEP_SCRIPT], env=env, check=True,
                         capture_output=True, text=True).stdout.split()
    return float(out[1]), float(out[2])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--sizes", default="3,5,10,20")
    ap.add_argument("--no-steps", action="store_true", help="skip the whole-run comparison")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'n':>4}{'numpy [us]':>14}{'numba [us]':>14}{'speedup':>10}{'max diff':>12}")
    for n in (int(s) for s in args.sizes.split(",")):
        for name, case in _cases(n, rng).items():
            f_np = getattr(kernels.NUMPY, name)
            f_nb = getattr(kernels.NUMBA, name)
            t_np = _median_time(f_np, case, args.repeat)
            t_nb = _median_time(f_nb, case, args.repeat)
            diff = _gap(f_np(*case), f_nb(*case))
            print(f"{name:<18}{n:>4}{t_np * 1e6:>14.2f}{t_nb * 1e6:>14.2f}{t_np / t_nb:>10.2f}{diff:>12.1e}")

    if not args.no_steps:
        print()
        print("square-root run, 3000 steps, n = 3")
        for label, disable in (("numpy", True), ("numba", False)):
            per_step, total = _step_timing(disable)
            print(f"  {label:<6} median step {per_step * 1e6:8.1f} us   total {total:6.2f} s")


if __name__ == "__main__":
    main()
