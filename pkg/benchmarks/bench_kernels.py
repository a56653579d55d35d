"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Both backends are loaded side by side; outputs are checked for equality
before anything is timed.
"""

import argparse
import time

import numpy as np
from scipy import ndimage

from sigid import _fallback

try:
    from sigid import _core
except ImportError:  # extension not built
    _core = None


def signature_like_mask(rng, shape=(130, 330)):
    field = ndimage.gaussian_filter(rng.random(shape), 2.0)
    lo, hi = np.quantile(field, [0.55, 0.62])
    return ((field > lo) & (field < hi)).astype(np.uint8)


def svm_problem(rng, n=1440):
    x = np.vstack([rng.normal(0.45, 0.12, (n * 5 // 6, 3)), rng.normal(0.7, 0.12, (n // 6, 3))])
    y = np.r_[-np.ones(n * 5 // 6), np.ones(n // 6)]
    k = x @ x.T
    return np.ascontiguousarray((k + k.T) / 2), y


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    img = np.pad(signature_like_mask(rng), 1)
    K, y = svm_problem(rng)

    def smo(mod):
        alpha, grad = np.zeros(len(y)), -np.ones(len(y))
        it, ok = mod.smo_solve(K, y, 10.0, alpha, grad, 1e-3, 10_000 * len(y))
        return alpha, it

    cases = [
        ("zhang_suen 130x330", lambda m: m.zhang_suen(img)),
        (f"smo_solve n={len(y)}", smo),
    ]
    print(f"{'kernel':24s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, run in cases:
        t_py, out_py = best_of(lambda: run(_fallback), args.repeat)
        if _core is None:
            print(f"{name:24s} {t_py * 1e3:12.2f} {'n/a':>12s}")
            continue
        t_cy, out_cy = best_of(lambda: run(_core), args.repeat)
        a, b = (out_py, out_cy) if name.startswith("zhang") else (out_py[0], out_cy[0])
        assert np.array_equal(a, b), f"{name}: backends disagree"
        print(f"{name:24s} {t_py * 1e3:12.2f} {t_cy * 1e3:12.2f} {t_py / t_cy:7.1f}x")


if __name__ == "__main__":
    main()
