"""Simulated 360-degree 2D LiDAR over disk-shaped pedestrians."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import GridSpec, Pose, ScalarGrid, Vec2


@dataclass(frozen=True)
class LidarSpec:
    angular_resolution: float = 0.5  # degrees
    min_range: float = 0.05
    max_range: float = 8.0
    body_radius: float = 0.3
    noise_sigma: float = 0.05
    visibility_fraction: float = 0.5

    def __post_init__(self):
        if not 0 < self.min_range < self.max_range:
            raise ValueError("need 0 < min_range < max_range")
        n = 360.0 / self.angular_resolution
        if self.angular_resolution <= 0 or abs(n - round(n)) > 1e-9:
            raise ValueError("angular_resolution must divide 360 evenly")
        if self.body_radius <= 0:
            raise ValueError("body_radius must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if not 0 < self.visibility_fraction <= 1:
            raise ValueError("visibility_fraction must lie in (0, 1]")

    @property
    def n_rays(self) -> int:
        return int(round(360.0 / self.angular_resolution))

    def bearings(self, heading: float) -> np.ndarray:
        return heading + np.arange(self.n_rays) * math.radians(self.angular_resolution)


@dataclass(frozen=True)
class Scan:
    ranges: np.ndarray


@dataclass(frozen=True)
class Detection:
    position: Vec2
    source_ray_count: int
    truth_index: int = -1  # index into the simulated agent list


def _as_points(agents) -> np.ndarray:
    return np.asarray(agents, dtype=float).reshape(-1, 2)


def _hits(robot: Pose, agents: np.ndarray, spec: LidarSpec):
    ox, oy = robot.position
    return kernels.ray_hits(ox, oy, spec.bearings(robot.heading), agents,
                            spec.body_radius, spec.max_range)


def raycast(robot: Pose, agents, spec: LidarSpec) -> Scan:
    dist, _, _, _ = _hits(robot, _as_points(agents), spec)
    ranges = np.clip(np.where(np.isfinite(dist), dist, spec.max_range),
                     spec.min_range, spec.max_range)
    return Scan(ranges)


def visible_fractions(robot: Pose, agents, spec: LidarSpec) -> np.ndarray:
    """Per agent, the share of rays crossing its disk that hit it first within range.

    Agents whose disk no ray crosses get 0.
    """
    pts = _as_points(agents)
    _, _, subtend, visible = _hits(robot, pts, spec)
    return np.where(subtend > 0, visible / np.maximum(subtend, 1), 0.0)


def detect(robot: Pose, true_agents, spec: LidarSpec, rng: np.random.Generator) -> list[Detection]:
    pts = _as_points(true_agents)
    if len(pts) == 0:
        return []
    _, _, subtend, visible = _hits(robot, pts, spec)
    dist = np.hypot(pts[:, 0] - robot.position.x, pts[:, 1] - robot.position.y)
    out = []
    for i in range(len(pts)):
        if not spec.min_range <= dist[i] <= spec.max_range or subtend[i] == 0:
            continue
        if visible[i] / subtend[i] < spec.visibility_fraction:
            continue
        p = pts[i]
        if spec.noise_sigma > 0:
            p = p + rng.normal(0.0, spec.noise_sigma, size=2)
        out.append(Detection(Vec2(float(p[0]), float(p[1])), int(visible[i]), i))
    return out


def visibility_map(robot: Pose, detected, spec: LidarSpec, grid: GridSpec) -> ScalarGrid:
    """1 where the robot cannot see, 0 where it can.

    Out-of-range cells and cells inside the tangent shadow cone of a detected
    disk (and farther than its centre) are invisible. Boundaries are hard.
    """
    cells = grid.centers()
    ox, oy = robot.position
    rc = np.hypot(cells[:, 0] - ox, cells[:, 1] - oy)
    hidden = (rc > spec.max_range) | (rc < spec.min_range)
    hidden |= kernels.shadow_mask(cells, ox, oy, _as_points(detected), spec.body_radius)
    return ScalarGrid(grid, hidden.astype(float).reshape(grid.shape))
