"""Time the numba kernels against their numpy twins and check they agree.

Run with ``python3 benchmarks/bench_kernels.py``. Numba compile time is paid
once before timing.
"""
from __future__ import annotations

import argparse
import math
import timeit

import numpy as np

from crowdimpute import kernels
from crowdimpute._accel import NUMBA_AVAILABLE


def _inputs(rng, n_agents, n_cells):
    agents = rng.uniform(-6, 6, size=(n_agents, 2))
    headings = rng.uniform(-math.pi, math.pi, size=n_agents)
    comms = rng.integers(0, 3, size=n_agents).astype(np.int64)
    cells = rng.uniform(-8, 8, size=(n_cells, 2))
    labels = rng.integers(0, 3, size=n_cells).astype(np.int64)
    strong = rng.uniform(0.01, 1, size=(20, 36))
    absent = rng.uniform(0.01, 1, size=(20, 36))
    bearings = np.linspace(-math.pi, math.pi, 720, endpoint=False)
    vel = rng.normal(size=(n_agents, 2))
    return dict(agents=agents, headings=headings, comms=comms, cells=cells, labels=labels,
                strong=strong, absent=absent, bearings=bearings, vel=vel)


def cases(d):
    tie_args = (d["cells"], d["labels"], d["agents"], d["headings"], d["comms"],
                d["strong"], d["absent"], 5.0, 0.25, math.radians(10))
    n = len(d["cells"])
    return {
        "tie_product": (lambda f: f(np.ones(n), *tie_args),
                        kernels.tie_product_into_nb, kernels.tie_product_into_np),
        "ray_hits": (lambda f: f(0.0, 0.0, d["bearings"], d["agents"], 0.3, 8.0),
                     kernels.ray_hits_nb, kernels.ray_hits_np),
        "shadow_mask": (lambda f: f(d["cells"], 0.0, 0.0, d["agents"], 0.3),
                        kernels.shadow_mask_nb, kernels.shadow_mask_np),
        "kde": (lambda f: f(d["cells"], d["agents"], 0.5), kernels.kde_nb, kernels.kde_np),
        "territory": (lambda f: f(d["cells"], d["agents"], d["vel"], d["comms"], 0.2, 0.1),
                      kernels.territory_nb, kernels.territory_np),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    if a.dtype.kind == "f":
        return np.allclose(a, b, rtol=1e-12, atol=1e-12, equal_nan=True)
    return np.array_equal(a, b)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--agents", type=int, default=15)
    ap.add_argument("--cells", type=int, default=128 * 128)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not NUMBA_AVAILABLE:
        print("numba is not installed; nothing to compare")
        return 1
    d = _inputs(np.random.default_rng(0), args.agents, args.cells)
    print(f"{'kernel':14s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}  agree")
    ok = True
    for name, (call, nb, np_) in cases(d).items():
        call(nb)  # compile
        t_nb = min(timeit.repeat(lambda: call(nb), number=1, repeat=args.repeat)) * 1e3
        t_np = min(timeit.repeat(lambda: call(np_), number=1, repeat=args.repeat)) * 1e3
        agree = _same(call(nb), call(np_))
        ok &= agree
        print(f"{name:14s} {t_nb:10.2f} {t_np:10.2f} {t_np / t_nb:8.1f}  {agree}")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
