"""Strong-tie communities and their Mahalanobis territories."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import kernels
from .geometry import STOPPED_SPEED, GridSpec


@dataclass(frozen=True)
class MahalanobisParams:
    alpha: float = 0.2  # s/m
    beta: float = 0.1  # m^2

    def __post_init__(self):
        if self.alpha < 0 or not self.beta > 0:
            raise ValueError("need alpha >= 0 and beta > 0")


@dataclass(frozen=True)
class Community:
    id: int
    members: tuple[int, ...]
    velocity: np.ndarray


@dataclass
class TerritoryField:
    """Hard 1-NN territory: ``labels[i, j]`` is the community owning cell (i, j)."""

    spec: GridSpec
    labels: np.ndarray
    n_communities: int

    def phi(self) -> np.ndarray:
        """One-hot probabilities, shape ``(K, width, height)``."""
        return (self.labels[None, :, :] == np.arange(self.n_communities)[:, None, None]).astype(float)

    def label_at(self, p) -> int | None:
        cell = self.spec.world_to_cell(p)
        return None if cell is None else int(self.labels[cell])


def find_communities(agent_ids, strong_pairs, velocities=None) -> list[Community]:
    """Connected components of the strong-tie graph.

    Communities are numbered by their smallest member id. ``velocities``
    maps agent id to velocity; the community velocity is the member mean.
    """
    ids = sorted(int(a) for a in agent_ids)
    index = {a: k for k, a in enumerate(ids)}
    rows, cols = [], []
    for a, b in strong_pairs:
        if a not in index or b not in index:
            raise KeyError(f"tie ({a}, {b}) references an unknown agent")
        rows.append(index[a])
        cols.append(index[b])
    n = len(ids)
    if n == 0:
        return []
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    _, comp = connected_components(graph, directed=False)
    groups: dict[int, list[int]] = {}
    for k, c in enumerate(comp):
        groups.setdefault(int(c), []).append(ids[k])
    ordered = sorted(groups.values(), key=lambda m: m[0])
    out = []
    for cid, members in enumerate(ordered):
        if velocities is not None:
            v = np.mean([np.asarray(velocities[m], dtype=float) for m in members], axis=0)
        else:
            v = np.zeros(2)
        out.append(Community(cid, tuple(members), v))
    return out


def mahalanobis_distance(x, y, v, params: MahalanobisParams = MahalanobisParams()) -> float:
    """Squared Mahalanobis form with the long axis along ``v``.

    Eigenvalues are ``alpha*|v| + beta`` along the velocity and ``beta``
    across it; a stopped member uses +x as its (irrelevant) axis.
    """
    ex, ey = float(x[0]) - float(y[0]), float(x[1]) - float(y[1])
    vx, vy = float(v[0]), float(v[1])
    speed = math.hypot(vx, vy)
    ux, uy = (1.0, 0.0) if speed < STOPPED_SPEED else (vx / speed, vy / speed)
    along = ex * ux + ey * uy
    across = -ex * uy + ey * ux
    return along * along / (params.alpha * speed + params.beta) + across * across / params.beta


def territory(communities: list[Community], positions: dict, velocities: dict,
              grid: GridSpec, params: MahalanobisParams = MahalanobisParams()) -> TerritoryField:
    """Label every cell with the community of its Mahalanobis-nearest member.

    Ties go to the smaller community id. Each member's own velocity shapes
    its metric.
    """
    if not communities:
        raise ValueError("territory needs at least one community")
    members, vels, comms = [], [], []
    for c in sorted(communities, key=lambda c: c.id):
        for m in c.members:
            members.append(positions[m])
            vels.append(velocities[m])
            comms.append(c.id)
    labels = kernels.territory_labels(grid.centers(), np.asarray(members, dtype=float).reshape(-1, 2),
                                      np.asarray(vels, dtype=float).reshape(-1, 2),
                                      np.asarray(comms, dtype=np.int64), params.alpha, params.beta)
    return TerritoryField(grid, labels.reshape(grid.shape), len(communities))
