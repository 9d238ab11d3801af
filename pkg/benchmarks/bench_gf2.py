"""Compare the compiled GF(2) kernels with the numpy fallback.

Usage::

    python3 benchmarks/bench_gf2.py [--repeat 5] [--sizes 64 256 1024]

Prints one row per kernel and size with the best time of each backend and the speedup.
The last rows time a full stabilizer toric run in subprocesses, once per backend.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from subfactorlab import gf2


def bench_rref(size, repeat):
    rng = np.random.default_rng(size)
    mat = gf2.pack(rng.random((size, 2 * size)) < 0.5)
    times = {}
    for name in ("cython", "python"):
        kern = gf2.kernels(name)
        times[name] = min(timeit.repeat(lambda: kern.rref(mat.copy(), 2 * size), number=1, repeat=repeat))
    return times


def bench_sym_inner(size, repeat):
    rng = np.random.default_rng(size + 1)
    words = max(1, size // 64)
    ax, az, bx, bz = (rng.integers(0, 2**63, (size, words), dtype=np.uint64) for _ in range(4))
    times = {}
    for name in ("cython", "python"):
        kern = gf2.kernels(name)
        times[name] = min(timeit.repeat(lambda: kern.sym_inner(ax, az, bx, bz), number=1, repeat=repeat))
    return times


def bench_toric(n):
    code = (f"import time; from subfactorlab import toric; t=time.perf_counter(); "
            f"toric.disturbance_experiment({n}, pp_trials=10); print(time.perf_counter()-t)")
    times = {}
    for name, flag in (("cython", ""), ("python", "1")):
        env = dict(os.environ, SUBFACTORLAB_PURE_PYTHON=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        times[name] = float(out.stdout.strip())
    return times


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--sizes", type=int, nargs="+", default=[64, 256, 1024])
    parser.add_argument("--toric-n", type=int, nargs="*", default=[3, 4])
    args = parser.parse_args(argv)
    try:
        gf2.kernels("cython")
    except ImportError:
        sys.exit("compiled extension not built; reinstall with `pip install -e . --no-build-isolation`")
    print(f"{'kernel':<12}{'size':>6}{'cython [s]':>14}{'python [s]':>14}{'speedup':>10}")
    rows = [("rref", s, bench_rref(s, args.repeat)) for s in args.sizes]
    rows += [("sym_inner", s, bench_sym_inner(s, args.repeat)) for s in args.sizes]
    rows += [("toric", n, bench_toric(n)) for n in args.toric_n]
    for kernel, size, t in rows:
        print(f"{kernel:<12}{size:>6}{t['cython']:>14.6f}{t['python']:>14.6f}{t['python'] / t['cython']:>10.1f}")


if __name__ == "__main__":
    main()
