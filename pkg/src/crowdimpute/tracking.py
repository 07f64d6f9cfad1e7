"""Multi-pedestrian tracker: gated optimal assignment + constant-acceleration KF."""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import heading_from_velocity

_H = np.zeros((2, 6))
_H[0, 0] = _H[1, 1] = 1.0


class Status(enum.Enum):
    NORMAL = "normal"
    VIRTUAL = "virtual"


@dataclass(frozen=True)
class TrackerParams:
    gate: float = 1.0
    max_misses: int = 5
    jerk: float = 0.5  # m/s^3, white-jerk intensity
    measurement_sigma: float = 0.05
    init_velocity_var: float = 1.0
    init_accel_var: float = 1.0
    r_max: float = 5.0
    history_len: int = 10  # ceil(t_c * frame_rate)


@dataclass(frozen=True)
class TrackState:
    """State ``(x, y, vx, vy, ax, ay)`` and its covariance."""

    x: np.ndarray
    P: np.ndarray

    @property
    def position(self) -> np.ndarray:
        return self.x[:2]

    @property
    def velocity(self) -> np.ndarray:
        return self.x[2:4]


@dataclass
class Track:
    id: int
    state: TrackState
    status: Status = Status.NORMAL
    misses: int = 0
    heading: float = 0.0
    # neighbour id -> deque of (relative position, own heading, neighbour heading)
    pair_history: dict = field(default_factory=dict)

    @property
    def position(self) -> np.ndarray:
        return self.state.position

    @property
    def velocity(self) -> np.ndarray:
        return self.state.velocity


@dataclass(frozen=True)
class Assignment:
    matches: list[tuple[int, int]]  # (track index, detection index)
    unmatched_tracks: list[int]
    unmatched_detections: list[int]


def transition(dt: float) -> np.ndarray:
    F = np.eye(6)
    F[0, 2] = F[1, 3] = F[2, 4] = F[3, 5] = dt
    F[0, 4] = F[1, 5] = 0.5 * dt * dt
    return F


def process_noise(dt: float, jerk: float) -> np.ndarray:
    q = jerk * jerk
    block = q * np.array([
        [dt**5 / 20, dt**4 / 8, dt**3 / 6],
        [dt**4 / 8, dt**3 / 3, dt**2 / 2],
        [dt**3 / 6, dt**2 / 2, dt],
    ])
    Q = np.zeros((6, 6))
    for axis in (0, 1):
        idx = [axis, axis + 2, axis + 4]
        Q[np.ix_(idx, idx)] = block
    return Q


def assign_costs(cost, gate: float) -> Assignment:
    """Gated assignment on a cost matrix.

    Among pairs with cost <= gate, returns the matching with the most pairs
    and, among those, the least total cost.
    """
    if not gate > 0:
        raise ValueError("gate must be positive")
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError("cost must be a 2-d matrix")
    n_t, n_d = cost.shape
    if n_t == 0 or n_d == 0:
        return Assignment([], list(range(n_t)), list(range(n_d)))
    valid = cost <= gate
    if not valid.any():
        return Assignment([], list(range(n_t)), list(range(n_d)))
    # bonus dominates any difference in total valid cost, so cardinality wins first
    bonus = min(n_t, n_d) * float(cost[valid].max()) + 1.0
    shaped = np.where(valid, cost - bonus, 0.0)
    rows, cols = linear_sum_assignment(shaped)
    matches = [(int(r), int(c)) for r, c in zip(rows, cols) if valid[r, c]]
    mt = {r for r, _ in matches}
    md = {c for _, c in matches}
    return Assignment(matches,
                      [i for i in range(n_t) if i not in mt],
                      [j for j in range(n_d) if j not in md])


def assign(tracks, detections, gate: float) -> Assignment:
    """Euclidean-cost assignment of detections to (predicted) tracks."""
    tp = np.array([t.position for t in tracks], dtype=float).reshape(-1, 2)
    dp = np.asarray(detections, dtype=float).reshape(-1, 2)
    cost = np.hypot(tp[:, None, 0] - dp[None, :, 0], tp[:, None, 1] - dp[None, :, 1])
    return assign_costs(cost, gate)


def predict(track: Track, dt: float, jerk: float = 0.5) -> Track:
    if not dt > 0:
        raise ValueError("dt must be positive")
    F = transition(dt)
    x = F @ track.state.x
    P = F @ track.state.P @ F.T + process_noise(dt, jerk)
    return replace(track, state=TrackState(x, 0.5 * (P + P.T)))


def update(track: Track, z, R) -> Track:
    """Kalman update with a position measurement ``z`` and noise ``R`` (2x2)."""
    R = np.asarray(R, dtype=float)
    if R.shape != (2, 2) or not np.allclose(R, R.T, atol=1e-12):
        raise ValueError("R must be a symmetric 2x2 matrix")
    if np.linalg.eigvalsh(R).min() < -1e-12:
        raise ValueError("R must be positive semi-definite")
    x, P = track.state.x, track.state.P
    S = _H @ P @ _H.T + R
    K = np.linalg.solve(S, _H @ P).T
    innov = np.asarray(z, dtype=float) - _H @ x
    x = x + K @ innov
    A = np.eye(6) - K @ _H
    P = A @ P @ A.T + K @ R @ K.T
    return replace(track, state=TrackState(x, 0.5 * (P + P.T)))


class Tracker:
    """Owns a set of tracks and advances them frame by frame."""

    def __init__(self, params: TrackerParams | None = None):
        self.params = params or TrackerParams()
        self.tracks: list[Track] = []
        self._next_id = 0

    def _new_track(self, pos, vel=(0.0, 0.0), status=Status.NORMAL) -> Track:
        p = self.params
        s2 = p.measurement_sigma ** 2
        x = np.array([pos[0], pos[1], vel[0], vel[1], 0.0, 0.0], dtype=float)
        P = np.diag([s2, s2, p.init_velocity_var, p.init_velocity_var,
                     p.init_accel_var, p.init_accel_var])
        t = Track(self._next_id, TrackState(x, P), status,
                  heading=heading_from_velocity(vel, 0.0))
        self._next_id += 1
        return t

    def add_virtual(self, position, velocity) -> Track:
        t = self._new_track(position, velocity, Status.VIRTUAL)
        self.tracks.append(t)
        return t

    def clear_virtual(self) -> None:
        self.tracks = [t for t in self.tracks if t.status is Status.NORMAL]

    @property
    def observed(self) -> list[Track]:
        """Normal tracks confirmed by a detection in the latest frame."""
        return [t for t in self.tracks if t.status is Status.NORMAL and t.misses == 0]

    def step(self, detections, dt: float) -> list[Track]:
        p = self.params
        dets = np.asarray(detections, dtype=float).reshape(-1, 2)
        R = np.eye(2) * p.measurement_sigma ** 2
        tracks = [predict(t, dt, p.jerk) for t in self.tracks]
        a = assign(tracks, dets, p.gate)

        for ti, di in a.matches:
            t = update(tracks[ti], dets[di], R)
            tracks[ti] = replace(t, status=Status.NORMAL, misses=0)
        survivors = []
        matched = {ti for ti, _ in a.matches}
        for ti, t in enumerate(tracks):
            if ti not in matched:
                t = replace(t, misses=t.misses + 1)
                if t.misses > p.max_misses:
                    continue
            survivors.append(t)
        for di in a.unmatched_detections:
            survivors.append(self._new_track(dets[di]))

        for t in survivors:
            t.heading = heading_from_velocity(t.velocity, t.heading)
        self.tracks = survivors
        self._record_pairs()
        return self.tracks

    def _record_pairs(self) -> None:
        p = self.params
        normal = [t for t in self.tracks if t.status is Status.NORMAL]
        alive = {t.id for t in normal}
        for t in normal:
            for other in list(t.pair_history):
                if other not in alive:
                    del t.pair_history[other]
        for t in normal:
            for o in normal:
                if o.id == t.id:
                    continue
                rel = o.position - t.position
                if math.hypot(rel[0], rel[1]) > p.r_max:
                    t.pair_history.pop(o.id, None)
                    continue
                hist = t.pair_history.setdefault(o.id, deque(maxlen=p.history_len))
                hist.append((rel.copy(), t.heading, o.heading))
