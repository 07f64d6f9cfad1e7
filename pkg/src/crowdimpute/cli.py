"""Command-line entry point: ``crowdimpute <command> ...``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline
from .config import RunConfig, dump_config, load_config, with_overrides
from .evaluation import occlusion_severity, write_occlusion_csv
from .ties import TieType, entropy, learn, load_model, save_model
from .trajectory import annotate, load_dataset, save_dataset, split
from .trajectory import synth_corridor, synth_random_walk

EXIT_IO = 2


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if getattr(args, "frame_rate", None) is not None:
        over["frame_rate"] = args.frame_rate
    if getattr(args, "robot_agent", None) is not None:
        over["robot_agent"] = args.robot_agent
    return with_overrides(cfg, over)


def _scene(path, cfg: RunConfig):
    return annotate(load_dataset(path, cfg.frame_rate))


def cmd_learn(args) -> int:
    cfg = _config(args)
    scene = _scene(args.dataset, cfg)
    if len(scene.frames) >= 2:
        train, _ = split(scene, cfg.train_ratio)
    else:
        train = scene
    model = learn(train, cfg.tie_params(), cfg.bin_geometry(), dataset_id=Path(args.dataset).name)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out)
    for w in model.metadata["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    print(f"strong entropy {entropy(model.histogram(TieType.STRONG)):.6f} "
          f"({model.metadata['strong_observations']} observations)")
    print(f"absent entropy {entropy(model.histogram(TieType.ABSENT)):.6f} "
          f"({model.metadata['absent_observations']} observations)")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    scene = _scene(args.dataset, cfg)
    model = load_model(args.model)
    result = pipeline.evaluate(scene, model, cfg, keep_grids=True)
    pipeline.write_outputs(result, args.out)
    s = result.summary()
    print(f"robot agent {s['robot_agent']}, {s['frames']} frames")
    print(f"mean MSE vanilla {s['mean_mse_vanilla']:.6g} imputed {s['mean_mse_imputed']:.6g} "
          f"pcf {s['mean_mse_pcf']:.6g}")
    return 0


def cmd_occlusion(args) -> int:
    cfg = _config(args)
    scene = _scene(args.dataset, cfg)
    records, hist = occlusion_severity(scene, cfg.lidar())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_occlusion_csv(records, out / "occlusion.csv")
    total = sum(hist.values())
    shares = {k: (v / total if total else 0.0) for k, v in hist.items()}
    with open(out / "histogram.json", "w", encoding="utf-8") as fh:
        json.dump({"counts": hist, "fractions": shares}, fh, indent=2)
        fh.write("\n")
    for k, v in hist.items():
        print(f"{k:20s} {v:8d} {shares[k]:.3f}")
    return 0


def cmd_synth(args) -> int:
    fr = args.frame_rate or 10.0
    seed = args.seed or 0
    if args.kind == "corridor":
        scene = synth_corridor(lanes=args.lanes, agents_per_lane=args.agents, frame_rate=fr,
                               seed=seed, crossing=args.crossing, sway=args.sway)
    else:
        scene = synth_random_walk(n_agents=args.agents, n_frames=args.frames, frame_rate=fr,
                                  seed=seed, extent=args.extent)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_dataset(scene, args.out)
    print(f"wrote {len(scene.frames)} frames, {len(scene.agents)} agents to {args.out}")
    return 0


def cmd_entropy(args) -> int:
    model = load_model(args.model)
    for tau in (TieType.STRONG, TieType.ABSENT):
        print(f"{tau.name.lower()} {entropy(model.histogram(tau)):.6f}")
    return 0


def cmd_config(args) -> int:
    sys.stdout.write(dump_config(_config(args)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--frame-rate", type=float)

    p = argparse.ArgumentParser(prog="crowdimpute", description="Occlusion-aware crowd imputation")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("learn", parents=[common], help="learn tie histograms from a dataset")
    s.add_argument("dataset")
    s.add_argument("--out", required=True, help="model file to write")
    s.set_defaults(func=cmd_learn)

    s = sub.add_parser("evaluate", parents=[common], help="score imputation against baselines")
    s.add_argument("dataset")
    s.add_argument("--model", required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--robot-agent", help="agent id to replace, or 'random'")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("occlusion-stats", parents=[common], help="occlusion severity histogram")
    s.add_argument("dataset")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_occlusion)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic dataset")
    s.add_argument("kind", choices=["corridor", "random-walk"])
    s.add_argument("--out", required=True)
    s.add_argument("--agents", type=int, default=8, help="agents per lane, or walkers")
    s.add_argument("--lanes", type=int, default=2)
    s.add_argument("--frames", type=int, default=100, help="random-walk length")
    s.add_argument("--crossing", type=float, default=0.5)
    s.add_argument("--sway", type=float, default=0.1, help="corridor along-lane surge amplitude (m)")
    s.add_argument("--extent", type=float, default=10.0, help="random-walk box side (m)")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("entropy", parents=[common], help="print histogram entropies of a model")
    s.add_argument("model")
    s.set_defaults(func=cmd_entropy)

    s = sub.add_parser("config", parents=[common], help="print the effective configuration")
    s.set_defaults(func=cmd_config)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:  # DatasetError, ConfigError, malformed model files
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
