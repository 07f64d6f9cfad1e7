import json
import os
import subprocess
import sys

import numpy as np
import pytest

from crowdimpute.cli import main
from crowdimpute.ties import load_model
from crowdimpute.trajectory import load_dataset


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["synth", "corridor", "--out", str(d / "corr.txt"), "--seed", "0"]) == 0
    assert main(["learn", str(d / "corr.txt"), "--out", str(d / "model.txt")]) == 0
    (d / "fast.cfg").write_text("hypotheses = 2\nrobot_agent = 4\n")
    return d


def test_synth_writes_dataset(work):
    s = load_dataset(work / "corr.txt", 10.0)
    assert len(s.agents) == 16 and len(s.frames) == 133


def test_learn_corridor_entropies(work, capsys):
    main(["entropy", str(work / "model.txt")])
    out = capsys.readouterr().out.split()
    strong, absent = float(out[1]), float(out[3])
    assert strong < absent
    assert load_model(work / "model.txt").metadata["strong_observations"] > 0


def test_evaluate_outputs(work, capsys):
    out = work / "eval"
    rc = main(["evaluate", str(work / "corr.txt"), "--model", str(work / "model.txt"),
               "--config", str(work / "fast.cfg"), "--out", str(out)])
    assert rc == 0
    lines = (out / "metrics.csv").read_text().splitlines()
    assert lines[0] == "frame,density,mse_vanilla,mse_imputed,mse_pcf,virtual_count"
    assert len(lines) == 41
    summary = json.loads((out / "summary.json").read_text())
    assert summary["robot_agent"] == 4 and summary["config"]["hypotheses"] == 2
    pgms = sorted((out / "grids").glob("pi_*.pgm"))
    assert len(pgms) == 40
    head = pgms[0].read_text().splitlines()
    assert head[0] == "P2" and head[1].startswith("# pi max=") and head[2] == "128 128"
    assert any((out / "grids").glob("q_*.pgm"))
    assert any((out / "hypotheses").glob("frame_*.txt"))


def test_occlusion_stats(work):
    out = work / "occ"
    assert main(["occlusion-stats", str(work / "corr.txt"), "--out", str(out)]) == 0
    rows = (out / "occlusion.csv").read_text().splitlines()
    assert len(rows) - 1 == 15 * 133 * 16
    hist = json.loads((out / "histogram.json").read_text())
    assert sum(hist["counts"].values()) == len(rows) - 1


def test_two_agent_scene_fully_visible(tmp_path):
    ds = tmp_path / "two.txt"
    ds.write_text("".join(f"{f} 0 {0.1 * f} 0.0\n{f} 1 {0.1 * f} 1.5\n" for f in range(20)))
    assert main(["occlusion-stats", str(ds), "--out", str(tmp_path / "o")]) == 0
    hist = json.loads((tmp_path / "o" / "histogram.json").read_text())
    assert hist["fractions"]["Fully-Visible"] == 1.0


def test_empty_dataset_gives_uniform_model(tmp_path, capsys):
    ds = tmp_path / "empty.txt"
    ds.write_text("# nothing\n")
    assert main(["learn", str(ds), "--out", str(tmp_path / "m.txt")]) == 0
    assert "warning" in capsys.readouterr().err
    m = load_model(tmp_path / "m.txt")
    assert np.allclose(m.strong.pmf, 1 / 720)
    assert m.metadata["warnings"]


def test_bad_inputs_exit_2(tmp_path, work, capsys):
    assert main(["learn", str(tmp_path / "missing.txt"), "--out", str(tmp_path / "m.txt")]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1 2\n")
    assert main(["learn", str(bad), "--out", str(tmp_path / "m.txt")]) == 2
    cfg = tmp_path / "c.cfg"
    cfg.write_text("hist_radial = 0.5\n")
    assert main(["evaluate", str(work / "corr.txt"), "--model", str(work / "model.txt"),
                 "--config", str(cfg), "--out", str(tmp_path / "e")]) == 2
    assert main(["entropy", str(bad)]) == 2
    assert "error:" in capsys.readouterr().err


def test_config_echo(capsys):
    assert main(["config", "--seed", "5"]) == 0
    assert "seed = 5" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    env = dict(os.environ)
    r = subprocess.run([sys.executable, "-m", "crowdimpute", "synth", "random-walk", "--agents", "3",
                        "--frames", "5", "--out", str(tmp_path / "rw.txt")],
                       capture_output=True, text=True, env=env)
    assert r.returncode == 0, r.stderr
    assert len(load_dataset(tmp_path / "rw.txt", 10.0).frames) == 5
