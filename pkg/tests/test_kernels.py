import math
import os
import subprocess
import sys

import numpy as np
import pytest

from crowdimpute import kernels


def _scene(seed, n_agents=12, n_cells=900):
    rng = np.random.default_rng(seed)
    return (rng.uniform(-6, 6, (n_cells, 2)), rng.uniform(-5, 5, (n_agents, 2)),
            rng.uniform(-math.pi, math.pi, n_agents))


@pytest.mark.parametrize("seed", range(5))
def test_flavours_agree(seed):
    cells, agents, heads = _scene(seed)
    rng = np.random.default_rng(seed + 100)
    bearings = np.arange(720) * math.radians(0.5)
    a = kernels.ray_hits_nb(0.1, -0.2, bearings, agents, 0.3, 8.0)
    b = kernels.ray_hits_np(0.1, -0.2, bearings, agents, 0.3, 8.0)
    fin = np.isfinite(a[0])
    assert np.array_equal(fin, np.isfinite(b[0]))
    assert np.allclose(a[0][fin], b[0][fin], rtol=0, atol=1e-12)
    for x, y in zip(a[1:], b[1:]):
        assert np.array_equal(x, y)
    assert np.array_equal(kernels.shadow_mask_nb(cells, 0.1, -0.2, agents, 0.3),
                          kernels.shadow_mask_np(cells, 0.1, -0.2, agents, 0.3))
    strong, absent = rng.uniform(0.01, 1, (2, 20, 36))
    labels = rng.integers(0, 3, len(cells))
    comms = rng.integers(0, 3, len(agents))
    args = (cells, labels, agents, heads, comms, strong, absent, 5.0, 0.25, math.radians(10))
    q1 = kernels.tie_product_into_nb(np.ones(len(cells)), *args)
    q2 = kernels.tie_product_into_np(np.ones(len(cells)), *args)
    assert np.max(np.abs(q1 - q2)) <= 1e-12
    assert np.allclose(kernels.kde_nb(cells, agents, 0.5), kernels.kde_np(cells, agents, 0.5),
                       rtol=1e-12, atol=1e-15)
    vel = rng.normal(0, 1, agents.shape)
    vel[0] = 0
    cid = np.sort(rng.integers(0, 4, len(agents)))
    assert np.array_equal(kernels.territory_nb(cells, agents, vel, cid, 0.2, 0.1),
                          kernels.territory_np(cells, agents, vel, cid, 0.2, 0.1))


def test_empty_inputs():
    cells = np.zeros((4, 2))
    none = np.zeros((0, 2))
    assert not kernels.shadow_mask_nb(cells, 0.0, 0.0, none, 0.3).any()
    assert not kernels.shadow_mask_np(cells, 0.0, 0.0, none, 0.3).any()
    d, i, s, v = kernels.ray_hits_np(0.0, 0.0, np.zeros(3), none, 0.3, 8.0)
    assert np.all(np.isinf(d)) and np.all(i == -1) and len(s) == 0


def test_bin_edges_agree():
    # exact radial edge and the theta = pi wrap
    dx = np.array([0.25, -1.0, 0.0, 3.0])
    dy = np.array([0.0, 0.0, 0.0, -1e-12])
    _, ri, ti = kernels._bin_np(dx, dy, 0.25, math.radians(10), 20, 36)
    for k in range(4):
        _, r1, t1 = kernels._bin_nb(dx[k], dy[k], 0.25, math.radians(10), 20, 36)
        assert (r1, t1) == (ri[k], ti[k])
    assert ri[0] == 1 and ti[1] == 0 and ti[2] == 18


def test_env_flag_selects_numpy():
    env = dict(os.environ, CROWDIMPUTE_NO_NUMBA="1")
    code = ("import crowdimpute, crowdimpute.kernels as k;"
            "print(crowdimpute.BACKEND, k.kde is k.kde_np)")
    r = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env)
    assert r.returncode == 0, r.stderr
    assert r.stdout.split() == ["numpy", "True"]
