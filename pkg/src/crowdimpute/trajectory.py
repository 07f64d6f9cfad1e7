"""Trajectory scenes: text loader, velocity annotation, splitting, synthesis.

Dataset files hold one ``frame agent_id x y`` record per line (whitespace
separated, ``#`` comments). The frame rate is not stored in the file.
Consecutive frames of a scene are assumed to be ``1 / frame_rate`` apart
regardless of their numeric labels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .geometry import heading_from_velocity


class DatasetError(ValueError):
    """Malformed or inconsistent dataset content."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class AgentSample(NamedTuple):
    frame: int
    agent_id: int
    position: tuple[float, float]


@dataclass
class Scene:
    """Agent positions indexed by frame.

    ``data[frame]`` is a pair ``(ids, positions)`` with ids sorted ascending.
    """

    frame_rate: float
    data: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.frame_rate > 0:
            raise ValueError("frame_rate must be positive")
        self.data = dict(sorted(self.data.items()))

    @property
    def frames(self) -> list[int]:
        return list(self.data)

    @property
    def dt(self) -> float:
        return 1.0 / self.frame_rate

    @property
    def agents(self) -> list[int]:
        ids = set()
        for a, _ in self.data.values():
            ids.update(int(i) for i in a)
        return sorted(ids)

    def __len__(self) -> int:
        return len(self.data)

    @property
    def sample_count(self) -> int:
        return sum(len(ids) for ids, _ in self.data.values())

    def at(self, frame: int) -> tuple[np.ndarray, np.ndarray]:
        return self.data[frame]

    def position(self, frame: int, agent_id: int) -> np.ndarray | None:
        ids, pos = self.data[frame]
        k = np.searchsorted(ids, agent_id)
        if k < len(ids) and ids[k] == agent_id:
            return pos[k]
        return None

    def samples(self) -> Iterator[AgentSample]:
        for f, (ids, pos) in self.data.items():
            for i, p in zip(ids, pos):
                yield AgentSample(f, int(i), (float(p[0]), float(p[1])))

    def subset(self, frames) -> "Scene":
        return Scene(self.frame_rate, {f: self.data[f] for f in frames})


@dataclass
class AnnotatedScene(Scene):
    """Scene with per-sample velocity (m/s) and heading (rad)."""

    velocities: dict[int, np.ndarray] = field(default_factory=dict)
    headings: dict[int, np.ndarray] = field(default_factory=dict)

    def subset(self, frames) -> "AnnotatedScene":
        frames = list(frames)
        return AnnotatedScene(
            self.frame_rate,
            {f: self.data[f] for f in frames},
            {f: self.velocities[f] for f in frames},
            {f: self.headings[f] for f in frames},
        )

    def state(self, frame: int, agent_id: int):
        """``(position, velocity, heading)`` of one agent, or ``None``."""
        ids, pos = self.data[frame]
        k = np.searchsorted(ids, agent_id)
        if k < len(ids) and ids[k] == agent_id:
            return pos[k], self.velocities[frame][k], float(self.headings[frame][k])
        return None


def _build(frame_rate: float, records: dict[int, dict[int, tuple[float, float]]]) -> Scene:
    data = {}
    for f, per in records.items():
        ids = np.array(sorted(per), dtype=np.int64)
        pos = np.array([per[i] for i in ids], dtype=float).reshape(-1, 2)
        data[f] = (ids, pos)
    return Scene(frame_rate, data)


def parse_dataset(lines, frame_rate: float) -> Scene:
    records: dict[int, dict[int, tuple[float, float]]] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 4:
            raise DatasetError(f"expected 4 fields, got {len(parts)}", lineno)
        try:
            frame, agent = int(parts[0]), int(parts[1])
            x, y = float(parts[2]), float(parts[3])
        except ValueError as exc:
            raise DatasetError(str(exc), lineno) from None
        if frame < 0 or agent < 0:
            raise DatasetError("frame and agent id must be non-negative", lineno)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise DatasetError("non-finite coordinate", lineno)
        per = records.setdefault(frame, {})
        if agent in per:
            raise DatasetError(f"duplicate record for frame {frame}, agent {agent}", lineno)
        per[agent] = (x, y)
    return _build(frame_rate, records)


def load_dataset(path, frame_rate: float) -> Scene:
    with open(path, encoding="utf-8") as fh:
        return parse_dataset(fh, frame_rate)


def save_dataset(scene: Scene, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# frame agent_id x y\n")
        for s in scene.samples():
            fh.write(f"{s.frame} {s.agent_id} {s.position[0]!r} {s.position[1]!r}\n")


def annotate(scene: Scene) -> AnnotatedScene:
    """Finite-difference velocities and headings for every sample.

    Central differences inside a trajectory, one-sided at its ends, zero for
    single-sample trajectories. Gaps are bridged using the frame-position
    distance between the neighbouring samples.
    """
    frames = scene.frames
    pos_of: dict[int, list[tuple[int, np.ndarray]]] = {}
    for k, f in enumerate(frames):
        ids, pos = scene.data[f]
        for i, p in zip(ids, pos):
            pos_of.setdefault(int(i), []).append((k, p))

    vel: dict[tuple[int, int], np.ndarray] = {}
    head: dict[tuple[int, int], float] = {}
    fr = scene.frame_rate
    for agent, traj in pos_of.items():
        n = len(traj)
        last = 0.0
        for m, (k, p) in enumerate(traj):
            if n == 1:
                v = np.zeros(2)
            else:
                a = traj[max(m - 1, 0)]
                b = traj[min(m + 1, n - 1)]
                v = (b[1] - a[1]) * fr / (b[0] - a[0])
            last = heading_from_velocity(v, last)
            vel[(k, agent)] = v
            head[(k, agent)] = last

    velocities, headings = {}, {}
    for k, f in enumerate(frames):
        ids, _ = scene.data[f]
        velocities[f] = np.array([vel[(k, int(i))] for i in ids], dtype=float).reshape(-1, 2)
        headings[f] = np.array([head[(k, int(i))] for i in ids], dtype=float)
    return AnnotatedScene(scene.frame_rate, dict(scene.data), velocities, headings)


def split(scene: Scene, ratio: float = 0.7):
    """Temporal split: the first ``floor(ratio * n_frames)`` frames train."""
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie strictly between 0 and 1")
    frames = scene.frames
    if len(frames) < 2:
        raise ValueError("need at least 2 frames to split")
    cut = min(max(int(math.floor(ratio * len(frames))), 1), len(frames) - 1)
    return scene.subset(frames[:cut]), scene.subset(frames[cut:])


def synth_corridor(lanes: int = 2, agents_per_lane: int = 8, speed: float = 1.0,
                   lane_spacing: float = 1.2, agent_spacing: float = 1.0,
                   length: float = 13.2, frame_rate: float = 10.0, seed: int = 0,
                   crossing: float = 0.5, sway: float = 0.0) -> AnnotatedScene:
    """Bidirectional lane flow.

    Lane ``l`` runs along ``y = l * lane_spacing``, even lanes towards +x and
    odd lanes towards -x. Each lane is a rigid platoon: members share one
    velocity and keep their spacing. The scene lasts ``length / speed``
    seconds and lane centres pass each other at fraction ``crossing`` of it.
    Agent ``k`` of lane ``l`` gets id ``l * agents_per_lane + k``.
    Each walker also surges back and forth along its lane by up to ``sway`` m
    at its own gait frequency (0.6 to 1.0 Hz), so in-lane gaps breathe
    without breaking up and headings stay on the lane axis.
    """
    if sway < 0:
        raise ValueError("sway must be >= 0")
    for name, v in (("lanes", lanes), ("agents_per_lane", agents_per_lane), ("speed", speed),
                    ("lane_spacing", lane_spacing), ("agent_spacing", agent_spacing),
                    ("length", length), ("frame_rate", frame_rate)):
        if not v > 0:
            raise ValueError(f"{name} must be positive")
    rng = np.random.default_rng(seed)
    duration = length / speed
    n_frames = int(math.floor(duration * frame_rate + 1e-9)) + 1
    n = agents_per_lane
    offsets = (np.arange(n) - (n - 1) / 2.0) * agent_spacing
    jitter = rng.uniform(-0.045, 0.045, size=(lanes, n))
    freq = rng.uniform(0.6, 1.0, size=(lanes, n))
    phase = rng.uniform(0.0, 2.0 * math.pi, size=(lanes, n))

    data = {}
    t_cross = crossing * duration
    for f in range(n_frames):
        t = f / frame_rate
        ids, pos = [], []
        for lane in range(lanes):
            d = 1.0 if lane % 2 == 0 else -1.0
            xc = length / 2.0 + d * speed * (t - t_cross)
            for k in range(n):
                sx = sway * math.sin(2.0 * math.pi * freq[lane, k] * t + phase[lane, k])
                ids.append(lane * n + k)
                pos.append((xc + offsets[k] + sx, lane * lane_spacing + jitter[lane, k]))
        data[f] = (np.array(ids, dtype=np.int64), np.array(pos, dtype=float))
    return annotate(Scene(frame_rate, data))


def synth_random_walk(n_agents: int = 16, extent: float = 10.0, speed: float = 1.0,
                      n_frames: int = 100, frame_rate: float = 10.0, seed: int = 0,
                      turn_sigma: float = 1.0, min_separation: float = 0.8) -> AnnotatedScene:
    """Correlated random walkers reflecting off the walls of a square box.

    Headings diffuse with ``turn_sigma`` rad/sqrt(s); speed is constant.
    Starting positions are drawn with a minimum pairwise separation.
    """
    rng = np.random.default_rng(seed)
    pts: list[np.ndarray] = []
    while len(pts) < n_agents:
        p = rng.uniform(0.0, extent, size=2)
        if all(np.hypot(*(p - q)) >= min_separation for q in pts):
            pts.append(p)
    pos = np.array(pts).reshape(-1, 2)
    heading = rng.uniform(-math.pi, math.pi, size=n_agents)
    dt = 1.0 / frame_rate
    ids = np.arange(n_agents, dtype=np.int64)
    data = {}
    for f in range(n_frames):
        data[f] = (ids, pos.copy())
        heading = heading + rng.normal(0.0, turn_sigma * math.sqrt(dt), size=n_agents)
        step = speed * dt * np.column_stack([np.cos(heading), np.sin(heading)])
        pos = pos + step
        for axis in range(2):
            low = pos[:, axis] < 0.0
            high = pos[:, axis] > extent
            pos[low, axis] = -pos[low, axis]
            pos[high, axis] = 2.0 * extent - pos[high, axis]
            flip = low | high
            if axis == 0:
                heading[flip] = math.pi - heading[flip]
            else:
                heading[flip] = -heading[flip]
    return annotate(Scene(frame_rate, data))
