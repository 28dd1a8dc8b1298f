"""Time each hot kernel under both backends and check the outputs agree.

    python benchmarks/bench_kernels.py [--repeat 3] [--scale 1.0]

Workloads mirror one pipeline run on a 160x120 image set: window scoring
for a few thousand keypoints, a greedy pass over a long candidate list, an
SMO solve on BoW-sized histograms (dense and row-on-demand kernels) and a
k-means transfer pass over deduplicated descriptors.
"""
import argparse
import sys
import time

import numpy as np

from shipbow import kernels


def workloads(scale, seed=0):
    rng = np.random.default_rng(seed)
    n_pts = int(3000 * scale)
    mag = rng.random((480, 640))
    cx = rng.integers(0, 640, n_pts)
    cy = rng.integers(0, 480, n_pts)
    yield "window_sums", lambda m: m.window_sums(mag, cx, cy, 3)

    gx = rng.uniform(0, 640, n_pts)
    gy = rng.uniform(0, 480, n_pts)
    yield "greedy_select", lambda m: m.greedy_select(gx, gy, 15.0, 2, n_pts // 3)

    n_svm = int(300 * scale)
    hist = rng.dirichlet(np.ones(50), n_svm)
    y = np.where(hist[:, :25].sum(1) > 0.5, 1.0, -1.0)
    gamma = 2.0
    d2 = ((hist[:, None, :] - hist[None, :, :]) ** 2).sum(-1)
    kmat = np.exp(-gamma * d2)
    np.fill_diagonal(kmat, 1.0)
    yield "smo_solve(dense)", lambda m: m.smo_solve(kmat, hist, y, gamma, 10.0, 1e-3, 200 * n_svm)[:3]
    yield "smo_solve(rows)", lambda m: m.smo_solve(None, hist, y, gamma, 10.0, 1e-3, 200 * n_svm)[:3]

    n_km, k = int(2000 * scale), 50
    x = rng.normal(size=(n_km, 128))
    w = rng.integers(1, 4, n_km).astype(np.float64)
    labels = rng.integers(0, k, n_km)
    labels[:k] = np.arange(k)
    yield "transfer_pass", lambda m: m.transfer_pass(x, w, labels, k, 1)


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def same(a, b):
    if isinstance(a, tuple):
        return len(a) == len(b) and all(same(p, q) for p, q in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scale", type=float, default=1.0, help="multiply workload sizes")
    args = ap.parse_args(argv)

    names = sorted(kernels.BACKENDS)
    if "cython" not in names:
        print("compiled backend not built; only the Python fallback is timed", file=sys.stderr)
    print(f"{'kernel':<18}" + "".join(f"{n + ' [s]':>14}" for n in names) + f"{'speedup':>10}  identical")
    status = 0
    for name, fn in workloads(args.scale):
        times, outs = {}, {}
        for b in names:
            times[b], outs[b] = best_of(lambda m=kernels.BACKENDS[b]: fn(m), args.repeat)
        agree = all(same(outs[names[0]], outs[b]) for b in names[1:])
        status |= not agree
        speed = f"{times['python'] / times['cython']:9.1f}x" if "cython" in times else f"{'-':>10}"
        print(f"{name:<18}" + "".join(f"{times[b]:14.4f}" for b in names) + f"{speed}  {agree}")
    return status


if __name__ == "__main__":
    sys.exit(main())
