"""Compare the compiled and numpy Morrey ball kernels on a synthetic workload.

    python3 benchmarks/bench_kernels.py --centers 4096 --points 4096
"""

import argparse
import time

import numpy as np

from curvlab import _kernels_py, kernels


def workload(centers, points, radii, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((points, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    c = np.concatenate([x[: centers // 2], rng.standard_normal((centers - centers // 2, 3)) * 0.5])
    fw = rng.random(points)
    r = np.geomspace(0.01, 1.0, radii)
    lf = rng.integers(0, radii + 1, points)
    lv = np.minimum(radii, lf + rng.integers(0, radii + 1, points))
    return c, x, fw, r, lf, lv


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--centers", type=int, default=2048)
    ap.add_argument("--points", type=int, default=4096)
    ap.add_argument("--radii", type=int, default=32)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args()
    args = workload(a.centers, a.points, a.radii)
    t_py, ref = best_of(_kernels_py.ball_accumulate, args, a.repeat)
    print(f"python  {t_py:8.3f} s")
    if "cython" not in kernels.BACKENDS:
        print("cython  not built")
        return
    t_cy, out = best_of(kernels.BACKENDS["cython"], args, a.repeat)
    err = float(np.max(np.abs(out - ref)) / max(1.0, np.max(np.abs(ref))))
    print(f"cython  {t_cy:8.3f} s   speedup {t_py / t_cy:5.1f}x   max rel diff {err:.2e}")


if __name__ == "__main__":
    main()
