"""Planar vectors, poses and the discretised world grid."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

STOPPED_SPEED = 1e-6


class Vec2(NamedTuple):
    x: float
    y: float


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"non-finite coordinate: {v!r}")


def wrap_angle(a: float) -> float:
    """Map an angle into (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


def angle_diff(a: float, b: float) -> float:
    """Absolute angular difference in [0, pi]."""
    return abs(wrap_angle(a - b))


@dataclass(frozen=True)
class Pose:
    position: Vec2
    heading: float = 0.0

    def __post_init__(self):
        x, y = self.position
        _check_finite(x, y, self.heading)
        object.__setattr__(self, "position", Vec2(float(x), float(y)))
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))


def rotation(heading: float) -> np.ndarray:
    c, s = math.cos(heading), math.sin(heading)
    return np.array([[c, -s], [s, c]])


def rotate(v, heading: float) -> Vec2:
    c, s = math.cos(heading), math.sin(heading)
    return Vec2(c * v[0] - s * v[1], s * v[0] + c * v[1])


def to_polar(v) -> tuple[float, float]:
    x, y = float(v[0]), float(v[1])
    _check_finite(x, y)
    r = math.hypot(x, y)
    return r, (math.atan2(y, x) if r > 0.0 else 0.0)


def from_polar(r: float, theta: float) -> Vec2:
    return Vec2(r * math.cos(theta), r * math.sin(theta))


def heading_from_velocity(v, previous: float = 0.0) -> float:
    """Heading of a velocity; a stopped agent keeps ``previous``."""
    vx, vy = float(v[0]), float(v[1])
    if math.hypot(vx, vy) < STOPPED_SPEED:
        return previous
    return math.atan2(vy, vx)


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned grid; ``origin`` is the lower-left corner of cell (0, 0).

    Cells are half-open ``[lo, hi)`` on both axes. Values are stored as
    ``values[i, j]`` with ``i`` along x.
    """

    origin: Vec2
    resolution: float
    width: int
    height: int

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("grid needs at least one cell per axis")
        object.__setattr__(self, "origin", Vec2(float(self.origin[0]), float(self.origin[1])))

    @classmethod
    def centered(cls, center, half_extent: float, resolution: float) -> "GridSpec":
        n = max(1, int(round(2.0 * half_extent * resolution)))
        return cls(Vec2(center[0] - half_extent, center[1] - half_extent), resolution, n, n)

    @property
    def shape(self) -> tuple[int, int]:
        return self.width, self.height

    @property
    def cell_area(self) -> float:
        return 1.0 / (self.resolution * self.resolution)

    def world_to_cell(self, p) -> tuple[int, int] | None:
        """Cell index containing ``p``, or ``None`` when outside the grid."""
        x, y = float(p[0]), float(p[1])
        _check_finite(x, y)
        i = math.floor((x - self.origin.x) * self.resolution)
        j = math.floor((y - self.origin.y) * self.resolution)
        if 0 <= i < self.width and 0 <= j < self.height:
            return i, j
        return None

    def cell_to_world(self, i: int, j: int) -> Vec2:
        if not (0 <= i < self.width and 0 <= j < self.height):
            raise IndexError(f"cell ({i}, {j}) outside {self.width}x{self.height} grid")
        return Vec2(self.origin.x + (i + 0.5) / self.resolution,
                    self.origin.y + (j + 0.5) / self.resolution)

    def centers(self) -> np.ndarray:
        """All cell centres as a ``(width*height, 2)`` array in C order."""
        xs = self.origin.x + (np.arange(self.width) + 0.5) / self.resolution
        ys = self.origin.y + (np.arange(self.height) + 0.5) / self.resolution
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])


@dataclass
class ScalarGrid:
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.spec.shape)
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("grid values must be finite and non-negative")

    @classmethod
    def zeros(cls, spec: GridSpec) -> "ScalarGrid":
        return cls(spec, np.zeros(spec.shape))

    def at(self, p) -> float:
        cell = self.spec.world_to_cell(p)
        return 0.0 if cell is None else float(self.values[cell])
