"""Time one batched tamed step with the pure-Python and compiled kernels.

    python3 benchmarks/bench_kernels.py [--modes 16 64 256] [--batch 256] [--repeat 20]

Prints microseconds per sample-step for each backend, the speedup, and
the largest coefficient difference between the two outputs.
"""
import argparse
import timeit

import numpy as np

from sacesim import kernels
from sacesim.operators import ModelParams
from sacesim.scheme import Discretization, SchemeConfig


def bench(n_modes, batch, repeat, tau=2.0**-8):
    disc = Discretization(SchemeConfig(n_modes, tau, 1), ModelParams())
    rng = np.random.default_rng(0)
    k = np.arange(1, n_modes + 1)
    V = 0.5 * rng.standard_normal((batch, n_modes)) / k
    W = np.sqrt(tau) * rng.standard_normal((batch, n_modes)) / k
    disc.basis  # build the cached basis outside the timed region

    rows = {}
    for name in ("python", "compiled"):
        backend = kernels.get_backend(name) if name == "python" or kernels.compiled_backend else None
        if backend is None:
            continue
        backend.step_batch(V, W, disc)  # warm up
        best = min(timeit.repeat(lambda: backend.step_batch(V, W, disc), number=5, repeat=repeat)) / 5
        rows[name] = (best / batch * 1e6, backend.step_batch(V, W, disc))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--modes", type=int, nargs="+", default=[16, 64, 256])
    ap.add_argument("--batch", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    print(f"active backend: {kernels.BACKEND}; batch {args.batch}")
    print(f"{'N':>5} {'python us':>10} {'compiled us':>12} {'speedup':>8} {'max diff':>10}")
    for n in args.modes:
        rows = bench(n, args.batch, args.repeat)
        py_us, py_out = rows["python"]
        if "compiled" in rows:
            c_us, c_out = rows["compiled"]
            diff = float(np.max(np.abs(py_out - c_out)))
            print(f"{n:>5} {py_us:>10.2f} {c_us:>12.2f} {py_us / c_us:>8.2f} {diff:>10.1e}")
        else:
            print(f"{n:>5} {py_us:>10.2f} {'n/a':>12} {'n/a':>8} {'n/a':>10}")


if __name__ == "__main__":
    main()
