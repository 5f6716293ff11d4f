#!/usr/bin/env python3
"""Time the numba kernels against their pure-numpy fallbacks.

Usage: python benchmarks/bench_backends.py [--size 512] [--repeats 5]

The numbers cover the per-pixel hot loops only; file IO und estimation
are excluded.  The numba column includes a warm-up call so JIT compile
time is not counted.
"""

import argparse
import time

import numpy as np

from lumisep import _kernels_numpy

try:
    from lumisep import _kernels_numba

    HAVE_NUMBA = True
except ImportError:
    _kernels_numba = None
    HAVE_NUMBA = False


def make_inputs(size, seed=0):
    rng = np.random.default_rng(seed)
    p = size * size
    noflash = rng.random((p, 3)) + 0.05
    alphahat = rng.normal(size=(p, 3))
    alphahat /= np.linalg.norm(alphahat, axis=1, keepdims=True)
    valid = rng.random(p) > 0.02
    coupling = rng.normal(size=(3, 3, 3)) + 2.0 * np.eye(3)[None]

    basis = np.array([[0.0, 0.35, -0.2], [0.15, -0.05, 0.3], [1.0, 0.93, 0.93]])
    basis /= np.linalg.norm(basis, axis=0, keepdims=True)
    from lumisep.separate import _nnls_tables

    masks, pinvs = _nnls_tables(basis)

    gamma = rng.normal(size=(p, 3))
    gamma /= np.linalg.norm(gamma, axis=1, keepdims=True)
    bn = rng.random(p)
    z = rng.random((p, 3))
    ekb = np.einsum("kmj,nj->nkm", coupling, basis.T)
    mats = rng.random((3, p, 3, 3))
    mu = rng.random(3)
    btilde = basis.T.copy()

    dirs = rng.normal(size=(4, 3))
    dirs[:, 2] = np.abs(dirs[:, 2]) + 1.0
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    meas = np.maximum(rng.normal(size=(p, 4)), 0.0)
    thresh = 0.01 * meas.max(axis=0)

    return {
        "solve_beta_gamma": (noflash, alphahat, valid, coupling, 1e6),
        "nnls_cone": (gamma, valid, basis, masks, pinvs),
        "render_layers": (alphahat, bn, z, valid, ekb),
        "build_bundle_matrices": (alphahat, bn, z, valid, coupling),
        "composite_bundle": (mats, mu, btilde),
        "photometric_stereo_solve": (meas, dirs, thresh, 3, 1e12),
        "sphere_histogram": (gamma, valid, 100),
    }


def bench(fn, args, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--size", type=int, default=512, help="image side length")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    inputs = make_inputs(args.size)
    print(f"image {args.size}x{args.size} ({args.size * args.size} pixels), "
          f"best of {args.repeats}")
    header = f"{'kernel':<26} {'numpy':>10} {'numba':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, data in inputs.items():
        t_np = bench(getattr(_kernels_numpy, name), data, args.repeats)
        if HAVE_NUMBA:
            fn = getattr(_kernels_numba, name)
            fn(*data)  # warm up the JIT
            t_nb = bench(fn, data, args.repeats)
            print(f"{name:<26} {t_np * 1e3:>8.1f}ms {t_nb * 1e3:>8.1f}ms "
                  f"{t_np / t_nb:>7.1f}x")
        else:
            print(f"{name:<26} {t_np * 1e3:>8.1f}ms {'n/a':>10} {'':>8}")
    if not HAVE_NUMBA:
        print("numba unavailable; only the numpy path was timed")


if __name__ == "__main__":
    main()
