"""Compiled vs pure-Python kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Times the recursive filters, one coordinate-descent sweep, and a full Lasso
support search with each backend, and checks the outputs agree.
"""
import argparse
import time
from unittest import mock

import numpy as np

from annealcast import _kernels_py, kernels, lasso

try:
    from annealcast import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def sweep_case(seed=0, n=1000, p=1000):
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, p))
    Z -= Z.mean(axis=0)
    Z *= np.sqrt(n) / np.linalg.norm(Z, axis=0)
    y = Z[:, :10] @ np.ones(10) + rng.standard_normal(n)
    return np.asfortranarray(Z), y - y.mean()


def run(repeat):
    backends = {"python": _kernels_py}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    rng = np.random.default_rng(1)
    x = rng.standard_normal(200_000)
    Z, y = sweep_case()
    coords = np.arange(Z.shape[1], dtype=np.intp)
    pen = np.full(Z.shape[1], 0.1 * np.max(np.abs(Z.T @ y)))
    nrm2 = np.full(Z.shape[1], float(Z.shape[0]))

    rows = []
    outputs = {}
    for name, mod in backends.items():
        t_ema, e = best_of(lambda: mod.ema(x, 0.1), repeat)
        t_wil, w = best_of(lambda: mod.wilder(np.abs(x), 14, 13), repeat)

        def one_sweep():
            r, g = y.copy(), np.zeros(Z.shape[1])
            mod.cd_sweep(Z, r, g, pen, nrm2, coords)
            return g

        t_sw, g = best_of(one_sweep, repeat)
        with mock.patch.object(kernels, "cd_sweep", mod.cd_sweep):
            t_fit, model = best_of(lambda: lasso.lasso_fit(Z, y, lasso.LassoConfig(target_support=30)), max(1, repeat // 2))
        outputs[name] = (e, w, g, model.coef)
        rows.append((name, t_ema, t_wil, t_sw, t_fit))

    print(f"{'backend':8s} {'ema 200k':>10s} {'wilder 200k':>12s} {'cd sweep 1000x1000':>19s} {'lasso k=30':>11s}")
    for name, *ts in rows:
        print(f"{name:8s} " + " ".join(f"{t * 1e3:{w}.2f}ms" for t, w in zip(ts, (8, 10, 17, 9))))
    if len(rows) == 2:
        base = rows[0]
        fast = rows[1]
        print("speedup  " + "  ".join(f"{b / f:8.1f}x" for b, f in zip(base[1:], fast[1:])))
        diff = max(float(np.max(np.abs(a - b))) for a, b in zip(outputs["python"], outputs["cython"]))
        print(f"max |python - cython| over all outputs: {diff:.3g}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    run(ap.parse_args().repeat)
