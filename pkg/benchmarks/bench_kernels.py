"""Compare the compiled and NumPy segment kernels.

    python benchmarks/bench_kernels.py [--nodes 100 1000 10000] [--repeat 200]

Prints the median time per call for each backend and their ratio, and
checks that both return the same forces.
"""

import argparse
import timeit

import numpy as np

from pmorkit import _kernels_py

try:
    from pmorkit import _kernels as _ext
except ImportError:
    _ext = None


def fixture(n, seed=0):
    rng = np.random.default_rng(seed)
    ang = 2 * np.pi * (np.arange(n) + 0.5) / n
    x = 25.0 * np.column_stack([np.cos(ang), np.sin(ang)]) + 0.1 * rng.standard_normal((n, 2))
    w = rng.standard_normal((n, 2))
    L = np.full(n, 2 * 25.0 * np.sin(np.pi / n))
    tau = rng.uniform(0, 50, n)
    return x, w, L, tau


def call(fn, args):
    x, w, L, tau = args
    F = np.zeros_like(x)
    G = np.empty((len(x), 2, 2))
    fn(x, w, L, tau, 200.0, 1000.0, 5.0, 0.6, 10.0, F, G)
    return F, G


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nodes", type=int, nargs="+", default=[100, 1000, 10000])
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    backends = {"python": _kernels_py.segment_forces}
    if _ext is not None:
        backends["cython"] = _ext.segment_forces
    else:
        print("compiled extension not built; timing the NumPy backend only")
    print(f"{'nodes':>7} " + " ".join(f"{b + ' [us]':>14}" for b in backends) + f" {'ratio':>8}")
    for n in args.nodes:
        data = fixture(n)
        ref = call(backends["python"], data)
        times = {}
        for name, fn in backends.items():
            F, G = call(fn, data)
            assert np.allclose(F, ref[0], rtol=1e-12, atol=1e-12)
            assert np.allclose(G, ref[1], rtol=1e-12, atol=1e-12)
            t = timeit.repeat(lambda fn=fn: call(fn, data), number=1, repeat=args.repeat)
            times[name] = 1e6 * float(np.median(t))
        ratio = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{n:>7} " + " ".join(f"{times[b]:>14.2f}" for b in backends) + f" {ratio:>8.2f}")


if __name__ == "__main__":
    main()
