"""Frame loop: simulate sensing from a substituted robot, track, impute, score."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines, imputation
from .communities import find_communities, territory
from .config import ConfigError, RunConfig
from .evaluation import kde_map, mse
from .geometry import GridSpec, Pose, ScalarGrid, Vec2
from .imputation import Crowd, Hypothesis
from .sensor import detect, visibility_map
from .ties import InsufficientHistory, TieModel, TieType, classify_history, prefilter
from .tracking import Tracker
from .trajectory import AnnotatedScene, split

CSV_HEADER = "frame,density,mse_vanilla,mse_imputed,mse_pcf,virtual_count"


@dataclass
class FrameResult:
    frame: int
    density: int
    mse_vanilla: float
    mse_imputed: float
    mse_pcf: float
    virtual_count: float
    q: ScalarGrid | None = None
    truth: ScalarGrid | None = None
    hypotheses: list[Hypothesis] = field(default_factory=list)

    def csv_row(self) -> str:
        return (f"{self.frame},{self.density},{self.mse_vanilla!r},{self.mse_imputed!r},"
                f"{self.mse_pcf!r},{self.virtual_count!r}")


@dataclass
class EvaluationResult:
    robot_agent: int
    frames: list[FrameResult]
    config: RunConfig

    def summary(self) -> dict:
        def mean(attr):
            vals = [getattr(f, attr) for f in self.frames]
            return float(np.mean(vals)) if vals else float("nan")

        wins = sum(f.mse_imputed < f.mse_vanilla for f in self.frames)
        return {
            "robot_agent": self.robot_agent,
            "frames": len(self.frames),
            "mean_mse_vanilla": mean("mse_vanilla"),
            "mean_mse_imputed": mean("mse_imputed"),
            "mean_mse_pcf": mean("mse_pcf"),
            "mean_virtual_count": mean("virtual_count"),
            "imputed_beats_vanilla_fraction": wins / len(self.frames) if self.frames else float("nan"),
            "mse_normalisation": "per cell (A = cell count)",
            "config": self.config.to_dict(),
        }

    def csv(self) -> str:
        return "\n".join([CSV_HEADER] + [f.csv_row() for f in self.frames]) + "\n"


def check_model(model: TieModel, config: RunConfig) -> None:
    g, want = model.geometry, config.bin_geometry()
    if (g.n_r, g.n_theta) != (want.n_r, want.n_theta) or not (
            math.isclose(g.r_max, want.r_max) and math.isclose(g.radial_width, want.radial_width)
            and math.isclose(g.angular_width_deg, want.angular_width_deg)):
        raise ConfigError(f"model bin geometry {g} does not match config {want}")


def choose_robot(test: AnnotatedScene, choice, seed: int) -> int:
    """Resolve ``--robot-agent``: an id, or ``random`` among agents seen in every test frame."""
    if str(choice) != "random":
        return int(choice)
    present = None
    for f in test.frames:
        ids = set(int(i) for i in test.at(f)[0])
        present = ids if present is None else present & ids
    pool = sorted(present or test.agents)
    if not pool:
        raise ValueError("no agent available to replace by the robot")
    return pool[int(np.random.default_rng(seed).integers(len(pool)))]


def strong_pairs(tracks, params) -> list[tuple[int, int]]:
    ids = {t.id for t in tracks}
    pairs = []
    for t in tracks:
        for other, hist in t.pair_history.items():
            if other <= t.id or other not in ids or len(hist) < 2:
                continue
            try:
                if classify_history(hist, params) is TieType.STRONG:
                    pairs.append((t.id, other))
            except InsufficientHistory:
                continue
    return pairs


def _frame_rng(seed: int, frame: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, frame, stream])


def evaluate(scene: AnnotatedScene, model: TieModel, config: RunConfig,
             robot_agent=None, keep_grids: bool = False) -> EvaluationResult:
    check_model(model, config)
    train, test = split(scene, config.train_ratio)
    if model.metadata.get("prefilter_sigma", 0.0) == 0.0 and config.noise_sigma > 0:
        model = prefilter(model, config.noise_sigma)

    lidar = config.lidar()
    tie_params = config.tie_params()
    imp = config.imputation()
    maha = config.mahalanobis()
    radii = baselines.radius_grid(config.r_max, config.pcf_points)
    target = baselines.mean_pcf([train.at(f)[1] for f in train.frames], radii, config.pcf_bandwidth)
    if config.pcf_gp_smoothing:
        target = baselines.gp_smooth(target, config.gp(target))
    pcf_usable = bool(np.any(target.values > 0))

    robot_id = choose_robot(test, config.robot_agent if robot_agent is None else robot_agent, config.seed)
    tracker = Tracker(config.tracker())
    dt = 1.0 / scene.frame_rate
    warm = [f for f in train.frames if train.state(f, robot_id) is not None][-config.warmup_frames:] \
        if config.warmup_frames else []
    scored = [f for f in test.frames if test.state(f, robot_id) is not None]

    results = []
    for f in warm + scored:
        pos, _, heading = scene.state(f, robot_id)
        robot = Pose(Vec2(float(pos[0]), float(pos[1])), heading)
        ids, all_pos = scene.at(f)
        truth = all_pos[ids != robot_id]
        dets = detect(robot, truth, lidar, _frame_rng(config.seed, f, 0))
        det_pos = np.array([d.position for d in dets], dtype=float).reshape(-1, 2)
        tracker.step(det_pos, dt)
        tracker.clear_virtual()
        if f not in scored:
            continue

        obs = tracker.observed
        obs_ids = [t.id for t in obs]
        positions = {t.id: t.position for t in obs}
        velocities = {t.id: t.velocity for t in obs}
        comms = find_communities(obs_ids, strong_pairs(obs, tie_params), velocities)
        label = {m: c.id for c in comms for m in c.members}
        crowd = Crowd.build([positions[i] for i in obs_ids], [t.heading for t in obs],
                            [label[i] for i in obs_ids], [velocities[i] for i in obs_ids])

        grid = GridSpec.centered(robot.position, config.map_half_extent, config.grid_resolution)
        truth_map = kde_map(truth, config.kde_sigma, grid)
        vanilla_map = kde_map(crowd.positions, config.kde_sigma, grid)

        q_grid = None
        if comms:
            terr = territory(comms, positions, velocities, grid, maha)
            vis = visibility_map(robot, det_pos, lidar, grid)
            q_grid = imputation.tie_product_grid(model, crowd, vis, terr, robot, imp.r_nav)
            hyps = imputation.impute_multi(model, crowd, comms, terr, vis, robot, imp,
                                           seed=int(_frame_rng(config.seed, f, 1).integers(2**31)))
            domain = grid.centers()[imputation.candidate_mask(vis, robot, imp.r_nav)]
            pcf_hyps = []
            for h in range(imp.hypotheses):
                if not pcf_usable:
                    pcf_hyps.append(baselines.vanilla(crowd))
                    continue
                pcf_hyps.append(baselines.pcf_synthesize(
                    crowd, target, domain, _frame_rng(config.seed, f, 2 + h), terr, comms,
                    config.pcf_max_trials, config.pcf_tolerance, config.max_virtual))
            for a in hyps[0].virtual:
                tracker.add_virtual(a.position, a.velocity)
        else:
            hyps = [baselines.vanilla(crowd)]
            pcf_hyps = [baselines.vanilla(crowd)]

        imputed_maps = [kde_map(h.positions(), config.kde_sigma, grid) for h in hyps]
        pcf_maps = [kde_map(h.positions(), config.kde_sigma, grid) for h in pcf_hyps]
        density = int(np.sum(np.hypot(truth[:, 0] - pos[0], truth[:, 1] - pos[1]) <= config.r_nav))
        results.append(FrameResult(
            int(f), density,
            mse(truth_map, [vanilla_map]), mse(truth_map, imputed_maps), mse(truth_map, pcf_maps),
            float(np.mean([len(h.virtual) for h in hyps])),
            q_grid if keep_grids else None, truth_map if keep_grids else None,
            hyps if keep_grids else []))
    return EvaluationResult(robot_id, results, config)


def write_pgm(grid: ScalarGrid, path, label: str = "") -> None:
    """ASCII PGM (P2), max-normalised to 0..255, top row = largest y."""
    v = grid.values
    vmax = float(v.max()) if v.size else 0.0
    scaled = np.zeros_like(v) if vmax <= 0 else np.rint(v / vmax * 255.0)
    img = scaled.T[::-1].astype(int)  # rows along y, flipped so north is up
    w, h = grid.spec.width, grid.spec.height
    lines = ["P2", f"# {label} max={vmax!r}".rstrip(), f"{w} {h}", "255"]
    lines += [" ".join(str(x) for x in row) for row in img]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def write_outputs(result: EvaluationResult, out_dir) -> None:
    out = Path(out_dir)
    (out / "grids").mkdir(parents=True, exist_ok=True)
    (out / "hypotheses").mkdir(exist_ok=True)
    (out / "metrics.csv").write_text(result.csv(), encoding="utf-8")
    for fr in result.frames:
        if fr.truth is not None:
            write_pgm(fr.truth, out / "grids" / f"pi_{fr.frame:06d}.pgm", "pi")
        if fr.q is not None:
            write_pgm(fr.q, out / "grids" / f"q_{fr.frame:06d}.pgm", "q")
        if fr.hypotheses:
            imputation.write_hypotheses(fr.hypotheses, out / "hypotheses" / f"frame_{fr.frame:06d}.txt")
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(result.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")
