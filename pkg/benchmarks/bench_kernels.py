"""Time the hot kernels with numba and with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--points 200000] [--repeat 5]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from tsallis_lab import _kernels as K
from tsallis_lab._accel import numba_enabled
from tsallis_lab.functionals import power_jets
from tsallis_lab.mixtures import GaussianMixture


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--components", type=int, default=3)
    ap.add_argument("--dim", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    m = GaussianMixture.random(rng, args.dim, args.components)
    X = rng.normal(size=(args.points, args.dim))
    lw = np.log(m.weights)

    jets = K.mixture_logjets(X, lw, m.means, m.variances, use_numba=False)
    u, gu, Hu, glu = power_jets(*jets, 1.0)
    v, gv, Hv, glv = power_jets(*jets, 0.5)
    g = np.einsum("md,md->m", gv, gv)
    gg = 2 * np.einsum("mij,mj->mi", Hv, gv)
    lg = 2 * np.einsum("mij,mij->m", Hv, Hv) + 2 * np.einsum("md,md->m", glv, gv)
    lG = 2 * np.einsum("mij,mij->m", Hu, Hu) + 2 * np.einsum("md,md->m", glu, gu)
    red_args = (u, gu.T.copy(), Hu.transpose(1, 2, 0).copy(), glu.T.copy(), v, gv.T.copy(),
                Hv.transpose(1, 2, 0).copy(), g, gg.T.copy(), lg, lG, 0.0, 1.0)

    print(f"numba available and enabled: {numba_enabled()}")
    print(f"{args.points} points, d={args.dim}, {args.components} components, best of {args.repeat}")
    print(f"{'kernel':<20}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}{'max diff/scale':>15}")
    cases = [
        ("mixture_logjets", lambda nb: K.mixture_logjets(X, lw, m.means, m.variances, use_numba=nb)),
        ("mixture_power_sum", lambda nb: (K.mixture_power_sum(X, lw, m.means, m.variances, 2.0,
                                                               use_numba=nb),)),
        ("reduce_terms", lambda nb: K.reduce_terms(*red_args, use_numba=nb)),
    ]
    for name, fn in cases:
        ref = fn(False)
        t_np = best_of(lambda: fn(False), args.repeat)
        if numba_enabled():
            out = fn(True)  # compile outside the timing
            t_nb = best_of(lambda: fn(True), args.repeat)
            diff = max(float(np.max(np.abs(a - b)) / (np.max(np.abs(a)) + 1e-300))
                       for a, b in zip(ref, out) if np.size(a))
            print(f"{name:<20}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>10.2f}{diff:>15.2e}")
        else:
            print(f"{name:<20}{t_np:>12.4f}{'n/a':>12}{'':>10}{'':>15}")


if __name__ == "__main__":
    main()
