import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crowdimpute.evaluation import (CATEGORIES, GridMismatch, category, kde_map, mse,
                                    occluded_fractions, occlusion_severity, write_occlusion_csv)
from crowdimpute.geometry import GridSpec, Pose, ScalarGrid, Vec2
from crowdimpute.sensor import LidarSpec
from crowdimpute.trajectory import Scene, annotate, synth_random_walk

GRID = GridSpec(Vec2(-5, -5), 8.0, 80, 80)


def test_kde_examples():
    assert np.all(kde_map(np.zeros((0, 2)), 0.5, GRID).values == 0)
    centre = GRID.cell_to_world(40, 40)
    m = kde_map([centre], 0.5, GRID)
    assert m.values.max() == pytest.approx(1 / (2 * math.pi * 0.25), abs=1e-12)
    assert m.values.max() == pytest.approx(0.63662, abs=5e-6)
    two = kde_map([(-2.5, 0.0), (2.5, 0.0)], 0.5, GRID)
    assert two.values.sum() * GRID.cell_area == pytest.approx(2.0, abs=0.02)
    with pytest.raises(ValueError):
        kde_map([centre], 0.0, GRID)


@settings(max_examples=30)
@given(st.integers(0, 10**6))
def test_kde_additive(seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-5, 5, size=(int(rng.integers(0, 9)), 2))
    k = int(rng.integers(0, len(pts) + 1))
    whole = kde_map(pts, 0.5, GRID).values
    parts = kde_map(pts[:k], 0.5, GRID).values + kde_map(pts[k:], 0.5, GRID).values
    assert np.allclose(whole, parts, rtol=1e-12, atol=1e-15)


def test_mse_examples():
    g = GridSpec(Vec2(0, 0), 1.0, 10, 10)
    a = ScalarGrid.zeros(g)
    b = ScalarGrid(g, np.zeros(g.shape))
    b.values[3, 3] = 0.5
    assert mse(a, [a]) == 0
    assert mse(a, [b]) == pytest.approx(0.0025)
    assert mse(a, [a, b]) == pytest.approx(0.00125)
    with pytest.raises(GridMismatch):
        mse(a, [ScalarGrid.zeros(GridSpec(Vec2(0, 0), 1.0, 10, 11))])
    with pytest.raises(ValueError):
        mse(a, [])


@settings(max_examples=40)
@given(st.integers(0, 10**6), st.floats(0.1, 10))
def test_mse_symmetry_and_scaling(seed, scale):
    rng = np.random.default_rng(seed)
    g = GridSpec(Vec2(0, 0), 1.0, 6, 5)
    x = ScalarGrid(g, rng.random(g.shape))
    y = ScalarGrid(g, rng.random(g.shape))
    assert mse(x, [y]) == mse(y, [x])
    assert mse(x, [y]) > 0 and mse(x, [x]) == 0
    xs, ys = ScalarGrid(g, scale * x.values), ScalarGrid(g, scale * y.values)
    assert mse(xs, [ys]) == pytest.approx(scale * scale * mse(x, [y]), rel=1e-12)


def test_category_boundaries():
    assert category(0.10) == "Fully-Visible"
    assert category(0.15) == "Partially-Occluded"
    assert category(0.50) == "Largely-Occluded"
    assert category(0.85) == "Fully-Occluded"
    assert category(1.0) == "Fully-Occluded"
    assert category(0.0) == "Fully-Visible"


def test_two_agents_fully_visible(tmp_path):
    data = {f: (np.array([0, 1]), np.array([[0.1 * f, 0.0], [0.1 * f, 1.5]])) for f in range(5)}
    records, hist = occlusion_severity(annotate(Scene(10.0, data)), LidarSpec())
    assert len(records) == 1 * 5 * 2
    assert hist["Fully-Visible"] == 10 and sum(hist.values()) == 10
    assert all(r.fraction == 0.0 for r in records)
    write_occlusion_csv(records, tmp_path / "o.csv")
    lines = (tmp_path / "o.csv").read_text().splitlines()
    assert lines[0] == "substitute_id,frame,agent_id,fraction,category"
    assert lines[1] == "0,0,1,0.0,Fully-Visible"


def test_occlusion_count_invariant():
    s = synth_random_walk(n_agents=7, n_frames=12, extent=5, seed=2)
    records, hist = occlusion_severity(s, LidarSpec())
    assert len(records) == (7 - 1) * 12 * 7
    assert sum(hist.values()) == len(records) and set(hist) == set(CATEGORIES)
    assert all(category(r.fraction) == r.category for r in records)
    sub, _ = occlusion_severity(s, LidarSpec(), substitutes=[3])
    assert len(sub) == 6 * 12


def test_hidden_agent_fully_occluded():
    robot = Pose(Vec2(0, 0), 0.0)
    frac = occluded_fractions(robot, [(2.0, 0.0), (4.0, 0.0)], LidarSpec())
    assert frac[0] == 0.0 and frac[1] == 1.0
    # beyond max range counts as blocked
    assert occluded_fractions(robot, [(20.0, 0.0)], LidarSpec())[0] == 1.0


def test_occlusion_needs_two_agents():
    with pytest.raises(ValueError):
        one = Scene(10.0, {0: (np.array([0]), np.zeros((1, 2)))})
        occlusion_severity(annotate(one), LidarSpec())
