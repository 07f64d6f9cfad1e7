"""Occlusion-aware crowd imputation.

The occupancy likelihood of an occluded cell is a product of calibrated tie
factors: strong-tie factors from agents of the community owning the cell,
absent-tie factors from everyone else. Virtual agents are drawn from that
grid one at a time, each joining the product before the next draw, until no
candidate cell near the robot exceeds ``eps_s``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .communities import Community, TerritoryField
from .geometry import GridSpec, Pose, ScalarGrid, Vec2, heading_from_velocity
from .ties import TieModel


class EmptySupport(ValueError):
    """The likelihood grid is zero everywhere."""


@dataclass(frozen=True)
class ImputationParams:
    eps_s: float = 0.5
    r_s: float = 2.0
    r_nav: float = 4.0
    max_virtual: int = 20
    hypotheses: int = 5
    sensor_sigma: float = 0.05

    def __post_init__(self):
        if not 0 < self.eps_s <= 1:
            raise ValueError("eps_s must lie in (0, 1]")
        if not self.r_s > 0 or not self.r_nav > 0:
            raise ValueError("r_s and r_nav must be positive")
        if self.max_virtual < 1 or self.hypotheses < 1:
            raise ValueError("max_virtual and hypotheses must be >= 1")


@dataclass(frozen=True)
class Crowd:
    """Observed agents: positions, headings, community labels, velocities."""

    positions: np.ndarray
    headings: np.ndarray
    communities: np.ndarray
    velocities: np.ndarray

    @classmethod
    def build(cls, positions, headings, communities, velocities=None) -> "Crowd":
        pos = np.asarray(positions, dtype=float).reshape(-1, 2)
        vel = np.zeros_like(pos) if velocities is None else np.asarray(velocities, dtype=float).reshape(-1, 2)
        return cls(pos, np.asarray(headings, dtype=float).reshape(-1),
                   np.asarray(communities, dtype=np.int64).reshape(-1), vel)

    @classmethod
    def empty(cls) -> "Crowd":
        return cls.build(np.zeros((0, 2)), [], [])

    def __len__(self) -> int:
        return len(self.positions)

    def canonical(self) -> "Crowd":
        """Same agents in a fixed order, so products do not depend on input order."""
        order = np.lexsort((self.communities, self.headings, self.positions[:, 1], self.positions[:, 0]))
        return Crowd(self.positions[order], self.headings[order],
                     self.communities[order], self.velocities[order])


@dataclass(frozen=True)
class VirtualAgent:
    position: Vec2
    community: int
    velocity: Vec2


@dataclass
class Hypothesis:
    detections: Crowd
    virtual: list[VirtualAgent] = field(default_factory=list)

    def positions(self) -> np.ndarray:
        v = np.array([a.position for a in self.virtual], dtype=float).reshape(-1, 2)
        return np.vstack([self.detections.positions, v])


def candidate_mask(visibility: ScalarGrid, robot: Pose, r_nav: float) -> np.ndarray:
    """Flat mask of invisible cells within ``r_nav`` of the robot."""
    cells = visibility.spec.centers()
    near = np.hypot(cells[:, 0] - robot.position.x, cells[:, 1] - robot.position.y) <= r_nav
    return near & (visibility.values.ravel() > 0.5)


def _kernel_args(model: TieModel):
    g = model.geometry
    strong, absent = model.tables()
    return strong, absent, float(g.r_max), float(g.radial_width), float(g.angular_width)


def tie_product_grid(model: TieModel, crowd: Crowd, visibility: ScalarGrid,
                     territory: TerritoryField, robot: Pose, r_nav: float) -> ScalarGrid:
    """Likelihood grid ``q``; zero on visible cells and beyond ``r_nav``.

    ``model`` should already be pre-filtered for the sensor noise.
    """
    return _initial_grid(model, crowd.canonical(), visibility, territory, robot, r_nav).full()


def sample_virtual(q: ScalarGrid, r_s: float, rng: np.random.Generator) -> Vec2:
    """Draw a cell proportionally to ``q`` then climb to the best cell within ``r_s``."""
    flat = q.values.ravel()
    total = flat.sum()
    if not total > 0:
        raise EmptySupport("likelihood grid has no mass")
    cum = np.cumsum(flat)
    k = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    k = min(k, flat.size - 1)
    while flat[k] <= 0:  # guards float edge cases at the top of the cumsum
        k -= 1
    cells = q.spec.centers()
    near = np.hypot(cells[:, 0] - cells[k, 0], cells[:, 1] - cells[k, 1]) <= r_s
    local = np.where(near, flat, -np.inf)
    best = int(np.argmax(local))
    return Vec2(float(cells[best, 0]), float(cells[best, 1]))


def _community_velocity(communities: list[Community], k: int) -> np.ndarray:
    for c in communities:
        if c.id == k:
            return np.asarray(c.velocity, dtype=float)
    return np.zeros(2)


@dataclass
class _Grid:
    """Working state of one imputation run over the candidate cells."""

    spec: GridSpec
    mask: np.ndarray
    cells: np.ndarray
    labels: np.ndarray
    q: np.ndarray

    def full(self) -> ScalarGrid:
        out = np.zeros(self.mask.size)
        out[self.mask] = self.q
        return ScalarGrid(self.spec, out.reshape(self.spec.shape))


def _initial_grid(model, crowd, visibility, territory, robot, r_nav) -> _Grid:
    spec = visibility.spec
    mask = candidate_mask(visibility, robot, r_nav)
    cells = spec.centers()[mask]
    labels = territory.labels.ravel()[mask].astype(np.int64)
    q = np.ones(len(cells))
    kernels.tie_product_into(q, cells, labels, crowd.positions, crowd.headings,
                             crowd.communities, *_kernel_args(model))
    return _Grid(spec, mask, cells, labels, q)


def _run(model, crowd, communities, territory, params, grid: _Grid, rng) -> Hypothesis:
    args = _kernel_args(model)
    virtual: list[VirtualAgent] = []
    q = grid.q.copy()
    work = _Grid(grid.spec, grid.mask, grid.cells, grid.labels, q)
    while len(virtual) < params.max_virtual:
        if len(q) == 0 or q.max() <= params.eps_s:
            break
        x_s = sample_virtual(work.full(), params.r_s, rng)
        k = territory.label_at(x_s)
        v = _community_velocity(communities, k)
        h = heading_from_velocity(v, 0.0)
        virtual.append(VirtualAgent(x_s, k, Vec2(float(v[0]), float(v[1]))))
        # adding an agent multiplies its own factors into q; same order as a full recompute
        kernels.tie_product_into(q, grid.cells, grid.labels, np.array([x_s], dtype=float),
                                 np.array([h]), np.array([k], dtype=np.int64), *args)
    return Hypothesis(crowd, virtual)


def impute_once(model: TieModel, crowd: Crowd, communities: list[Community],
                territory: TerritoryField, visibility: ScalarGrid, robot: Pose,
                params: ImputationParams, rng: np.random.Generator) -> Hypothesis:
    crowd = crowd.canonical()
    grid = _initial_grid(model, crowd, visibility, territory, robot, params.r_nav)
    return _run(model, crowd, communities, territory, params, grid, rng)


def hypothesis_rng(seed: int, h: int) -> np.random.Generator:
    return np.random.default_rng([seed, h])


def impute_multi(model: TieModel, crowd: Crowd, communities: list[Community],
                 territory: TerritoryField, visibility: ScalarGrid, robot: Pose,
                 params: ImputationParams, seed: int, n_hypotheses: int | None = None) -> list[Hypothesis]:
    """``n_hypotheses`` independent runs with streams ``(seed, h)``."""
    n = params.hypotheses if n_hypotheses is None else n_hypotheses
    if n < 1:
        raise ValueError("need at least one hypothesis")
    crowd = crowd.canonical()
    grid = _initial_grid(model, crowd, visibility, territory, robot, params.r_nav)
    return [_run(model, crowd, communities, territory, params, grid, hypothesis_rng(seed, h))
            for h in range(n)]


def write_hypotheses(hypotheses: list[Hypothesis], path) -> None:
    lines = []
    for h, hyp in enumerate(hypotheses):
        lines.append(f"# hypothesis {h}")
        d = hyp.detections
        for p, c in zip(d.positions, d.communities):
            lines.append(f"D {float(p[0])!r} {float(p[1])!r} {int(c)}")
        for a in hyp.virtual:
            lines.append(f"V {a.position[0]!r} {a.position[1]!r} {a.velocity[0]!r} {a.velocity[1]!r} {a.community}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_hypotheses(path) -> list[Hypothesis]:
    blocks: list[tuple[list, list]] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "#":
                blocks.append(([], []))
            elif parts[0] == "D":
                blocks[-1][0].append((float(parts[1]), float(parts[2]), int(parts[3])))
            elif parts[0] == "V":
                blocks[-1][1].append(VirtualAgent(Vec2(float(parts[1]), float(parts[2])), int(parts[5]),
                                                  Vec2(float(parts[3]), float(parts[4]))))
    out = []
    for det, virt in blocks:
        pos = np.array([d[:2] for d in det], dtype=float).reshape(-1, 2)
        out.append(Hypothesis(Crowd.build(pos, np.zeros(len(det)), [d[2] for d in det]), virt))
    return out
