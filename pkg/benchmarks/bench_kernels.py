"""Time the numba kernels against their numpy counterparts.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Each kernel runs once untimed (JIT compile) and is then timed ``repeat``
times; the best time is reported. Outputs are checked for agreement.
Top-T selection has no jitted variant (numpy's introselect is faster), so
it is not listed.
"""
import argparse
import time

import numpy as np

from aftsdar import _kernels


def best_of(fn, args, repeat):
    fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(rng):
    delta = rng.integers(0, 2, 200_000)
    A = rng.standard_normal((60, 18))
    gram = A.T @ A
    log_t = rng.standard_normal(50_000)
    log_u = np.log1p(-rng.random(50_000))
    return {
        "km_jumps (n=200000)": ("km_jumps", (delta,)),
        "min_subset_eig (p=18, 2T=6)": ("min_subset_eig", (gram, 6)),
        "censored_fraction (50000 draws)": ("censored_fraction", (log_t, log_u, 0.3)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if "numba" not in _kernels.KERNELS:
        print("numba is not installed; only the numpy kernels are available")
        return
    print(f"{'kernel':34s} {'numpy (ms)':>11s} {'numba (ms)':>11s} {'speedup':>8s}")
    for label, (name, kargs) in cases(np.random.default_rng(args.seed)).items():
        t_np, out_np = best_of(_kernels.KERNELS["numpy"][name], kargs, args.repeat)
        t_nb, out_nb = best_of(_kernels.KERNELS["numba"][name], kargs, args.repeat)
        if name == "min_subset_eig":
            assert abs(out_np[0] - out_nb[0]) <= 1e-9 * max(1.0, abs(out_np[0]))
        else:
            np.testing.assert_allclose(out_nb, out_np, rtol=1e-12, atol=0)
        print(f"{label:34s} {t_np * 1e3:11.2f} {t_nb * 1e3:11.2f} {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
