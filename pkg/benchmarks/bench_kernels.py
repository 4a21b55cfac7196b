"""Time the numba and numpy kernel backends on the hot paths.

Usage::

    python benchmarks/bench_kernels.py [--n 200000] [--repeat 5] [--threads 1]

Each row reports the best wall time over ``--repeat`` runs after one warm-up
call (which also triggers JIT compilation) and the numpy/numba ratio.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from fene_closure import _kernels
from fene_closure._kernels import STRATEGY_CASCADE, STRATEGY_EVEN
from fene_closure.model import sample_equilibrium
from fene_closure.rng import RngStream

WORD = np.uint64(0x2545F4914F6CDD1D)


def _cases(n):
    x = sample_equilibrium(n, 49.0, RngStream(1)).configs
    idx = np.arange(n, dtype=np.int64)
    draw = np.zeros(n, np.int64)
    g = np.vstack([2 * x, 4 * x ** 3]) / n
    lam = np.array([1e-3, -1e-5])
    bound = (1 - np.sqrt(2e-4)) * 49.0
    return {
        "normals": lambda k: k.normals(WORD, idx, draw, 1.0),
        "trial_accept (FENE)": lambda k: k.trial_accept(x, idx, draw, 2.0, 2e-4, 1.0, 1, 49.0, 0.0,
                                                        WORD, 1.0, bound, 1000),
        "obs_means (even, L=4)": lambda k: k.obs_means(x, STRATEGY_EVEN, 4, 49.0),
        "obs_means (cascade)": lambda k: k.obs_means(x, STRATEGY_CASCADE, 4, 49.0),
        "proj_eval (even, L=2)": lambda k: k.proj_eval(x, g, lam, STRATEGY_EVEN, 2, 49.0),
        "mean": lambda k: k.mean(x),
    }


def _best(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=200_000, help="particles")
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--threads", type=int, default=1, help="numba worker threads")
    args = parser.parse_args(argv)

    backends = {name: _kernels.use(name) for name in ("numba", "numpy")}
    if backends["numba"].NAME != "numba":
        parser.error("numba is not importable; nothing to compare")
    _kernels.use("numba")
    _kernels.set_threads(args.threads)

    print(f"n = {args.n}, numba threads = {_kernels.get_threads()}")
    print(f"{'kernel':<24}{'numba [ms]':>12}{'numpy [ms]':>12}{'ratio':>8}")
    for label, fn in _cases(args.n).items():
        t = {name: _best(lambda: fn(mod), args.repeat) for name, mod in backends.items()}
        print(f"{label:<24}{1e3 * t['numba']:>12.2f}{1e3 * t['numpy']:>12.2f}"
              f"{t['numpy'] / t['numba']:>8.1f}")


if __name__ == "__main__":
    main()
