"""Time the numba and numpy flavours of each hot kernel on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeats 5]

The numba flavours are compiled (and cached) before timing. Prints one CSV
row per kernel and size: kernel,size,numba_s,numpy_s,speedup,max_abs_diff.
"""
import argparse
import time

import numpy as np

from nisqspec import kernels


def best_time(fn, repeats):
    out, best = None, np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(rng):
    for n in (255, 1023, 4095):
        z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        args = (z.real.copy(), z.imag.copy(), w.real.copy(), w.imag.copy(), 2.5)
        yield "gauss_pair_sum", n, (lambda a=args: kernels._nb_gauss_pair_sum(*a)), \
            (lambda a=args: kernels._np_gauss_pair_sum(*a))
        xy = (z.real.copy(), z.imag.copy())
        yield "nn_mean_distance", n, (lambda a=xy: kernels._nb_nn_mean_distance(*a)), \
            (lambda a=xy: kernels._np_nn_mean_distance(*a))
    for n, samples in ((3, 10_000), (4, 10_000)):
        angles = rng.uniform(0, 2 * np.pi, size=(samples, 4, 2 * n))
        yield "circuit_zero_fidelities", f"n={n},N={samples}", \
            (lambda a=angles, n=n: kernels._nb_circuit_zero_fidelities(a, n, 0, 0)), \
            (lambda a=angles, n=n: kernels._np_circuit_zero_fidelities(a, n, 0, 0))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    print("kernel,size,numba_s,numpy_s,speedup,max_abs_diff")
    for name, size, nb, npy in cases(rng):
        nb()  # compile
        t_nb, a = best_time(nb, args.repeats)
        t_np, b = best_time(npy, args.repeats)
        diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
        print(f"{name},{size},{t_nb:.5f},{t_np:.5f},{t_np / t_nb:.1f},{diff:.1e}")


if __name__ == "__main__":
    main()
