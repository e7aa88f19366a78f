"""Benchmark the compiled inner-loop kernels against the numpy fallback.

Run after installing the package:

    python benchmarks/bench_kernels.py

Times full Sinkhorn solves on random uniform instances at several sizes
and reports per-solve wall time for both backends plus the agreement of
their converged potentials.
"""

import time

import numpy as np

from entot import _core, _kernels_np  # type: ignore[attr-defined]


def make_instance(n, d, rng):
    x = rng.uniform(-0.3, 0.3, size=(n, d))
    y = rng.uniform(-0.3, 0.3, size=(n, d))
    C = ((x[:, None, :] - y[None, :, :]) ** 2).sum(axis=2)
    u = np.full(n, 1.0 / n)
    return np.ascontiguousarray(C), u, u.copy(), np.log(u), np.log(u)


def solve_with(backend, C, u, w, logu, logw, eta=1.0, tol=1e-10, max_iter=10000):
    f = np.zeros(C.shape[0])
    g = np.zeros(C.shape[1])
    t0 = time.perf_counter()
    norm, iters, conv = backend.sinkhorn_loop(C, u, w, logu, logw, f, g, eta, tol, max_iter)
    return time.perf_counter() - t0, f, g, iters, conv


def main():
    rng = np.random.default_rng(7)
    print(f"{'n':>6} {'compiled (s)':>14} {'numpy (s)':>12} {'speedup':>8} "
          f"{'iters':>6} {'max |df|':>10}")
    for n in (50, 100, 200, 400, 800):
        C, u, w, logu, logw = make_instance(n, 3, rng)
        tc, fc, gc, ic, _ = solve_with(_core, C, u, w, logu, logw)
        tn, fn, gn, _, _ = solve_with(_kernels_np, C, u, w, logu, logw)
        diff = max(np.abs(fc - fn).max(), np.abs(gc - gn).max())
        print(f"{n:>6} {tc:>14.4f} {tn:>12.4f} {tn / tc:>8.2f} {ic:>6} {diff:>10.2e}")


if __name__ == "__main__":
    main()
