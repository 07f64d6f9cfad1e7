"""Occupancy-map scoring and occlusion-severity statistics."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import GridSpec, Pose, ScalarGrid, Vec2
from .sensor import LidarSpec, visible_fractions
from .trajectory import AnnotatedScene

CATEGORIES = ("Fully-Visible", "Partially-Occluded", "Largely-Occluded", "Fully-Occluded")
_EDGES = (0.15, 0.5, 0.85)


class GridMismatch(ValueError):
    pass


def kde_map(positions, sigma: float, grid: GridSpec) -> ScalarGrid:
    """Sum of unit-mass isotropic Gaussians (m^-2) at the cell centres."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    pts = np.asarray(positions, dtype=float).reshape(-1, 2)
    vals = kernels.kde(grid.centers(), pts, float(sigma))
    return ScalarGrid(grid, vals.reshape(grid.shape))


def mse(truth: ScalarGrid, predictions) -> float:
    """Per-cell squared error averaged over cells and over the predicted maps."""
    predictions = list(predictions)
    if not predictions:
        raise ValueError("need at least one predicted map")
    total = 0.0
    for p in predictions:
        if p.spec != truth.spec:
            raise GridMismatch("maps do not share a grid")
        d = truth.values - p.values
        total += float(np.mean(d * d))
    return total / len(predictions)


def category(fraction: float) -> str:
    for edge, name in zip(_EDGES, CATEGORIES):
        if fraction < edge:
            return name
    return CATEGORIES[-1]


@dataclass(frozen=True)
class OcclusionRecord:
    substitute_id: int
    frame: int
    agent_id: int
    fraction: float
    category: str


def occluded_fractions(robot: Pose, agents, spec: LidarSpec) -> np.ndarray:
    """Share of each agent's subtended rays that are blocked or out of range."""
    return 1.0 - visible_fractions(robot, agents, spec)


def occlusion_severity(scene: AnnotatedScene, spec: LidarSpec, substitutes=None):
    """Replace each agent in turn by the robot and grade everyone else's occlusion.

    Returns ``(records, histogram)`` where ``histogram`` counts records per
    category.
    """
    if len(scene.agents) < 2:
        raise ValueError("occlusion severity needs at least 2 agents")
    subs = scene.agents if substitutes is None else sorted(substitutes)
    records: list[OcclusionRecord] = []
    for s in subs:
        for f in scene.frames:
            state = scene.state(f, s)
            if state is None:
                continue
            pos, _, heading = state
            ids, all_pos = scene.at(f)
            keep = ids != s
            robot = Pose(Vec2(float(pos[0]), float(pos[1])), heading)
            others = all_pos[keep]
            if len(others) == 0:
                continue
            _, _, subtend, visible = _counts(robot, others, spec)
            for aid, n_sub, n_vis in zip(ids[keep], subtend, visible):
                frac = (n_sub - n_vis) / n_sub if n_sub > 0 else 1.0
                records.append(OcclusionRecord(int(s), int(f), int(aid), float(frac), category(frac)))
    hist = Counter({c: 0 for c in CATEGORIES})
    hist.update(r.category for r in records)
    return records, dict(hist)


def _counts(robot: Pose, agents: np.ndarray, spec: LidarSpec):
    ox, oy = robot.position
    return kernels.ray_hits(ox, oy, spec.bearings(robot.heading), agents,
                            spec.body_radius, spec.max_range)


def write_occlusion_csv(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("substitute_id,frame,agent_id,fraction,category\n")
        for r in records:
            fh.write(f"{r.substitute_id},{r.frame},{r.agent_id},{float(r.fraction)!r},{r.category}\n")
