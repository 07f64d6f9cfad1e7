import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crowdimpute.trajectory import (DatasetError, Scene, annotate, load_dataset, parse_dataset,
                                    save_dataset, split, synth_corridor, synth_random_walk)


def _scene(tracks, frame_rate=1.0):
    lines = [f"{f} {aid} {x} {y}" for aid, pts in tracks.items() for f, (x, y) in enumerate(pts)]
    return parse_dataset(lines, frame_rate)


def test_load_two_frames(tmp_path):
    p = tmp_path / "d.txt"
    p.write_text("0 1 0.0 0.0\n1 1 0.5 0.0\n")
    s = load_dataset(p, 2.5)
    assert s.agents == [1] and s.frames == [0, 1] and s.frame_rate == 2.5


def test_load_empty(tmp_path):
    p = tmp_path / "d.txt"
    p.write_text("")
    s = load_dataset(p, 10)
    assert s.frames == [] and s.sample_count == 0


def test_parse_error_line_number():
    with pytest.raises(DatasetError) as e:
        parse_dataset(["0 1 abc 0.0"], 1.0)
    assert e.value.line == 1


def test_duplicate_record_rejected():
    with pytest.raises(DatasetError) as e:
        parse_dataset(["# header", "0 1 0 0", "0 1 1 1"], 1.0)
    assert e.value.line == 3


def test_comments_and_tabs():
    s = parse_dataset(["# c", "3\t7   1.5 2.5", ""], 1.0)
    assert s.frames == [3] and tuple(s.position(3, 7)) == (1.5, 2.5)


def test_save_round_trip(tmp_path):
    s = synth_random_walk(n_agents=4, n_frames=5)
    save_dataset(s, tmp_path / "x.txt")
    back = load_dataset(tmp_path / "x.txt", s.frame_rate)
    for f in s.frames:
        np.testing.assert_array_equal(back.at(f)[0], s.at(f)[0])
        np.testing.assert_array_equal(back.at(f)[1], s.at(f)[1])


def test_annotate_examples():
    a = annotate(_scene({1: [(0, 0), (1, 0), (2, 0)]}))
    _, v, h = a.state(1, 1)
    assert tuple(v) == (1, 0) and h == 0
    a = annotate(_scene({1: [(3, 3)] * 4}))
    _, v, h = a.state(2, 1)
    assert tuple(v) == (0, 0) and h == 0
    a = annotate(_scene({1: [(0, 0), (0, 1), (0, 3)]}, 2.0))
    assert tuple(a.state(1, 1)[1]) == (0, 3)


def test_annotate_one_sided_and_single():
    a = annotate(_scene({1: [(0, 0), (2, 0), (3, 0)], 2: [(5, 5)]}))
    assert tuple(a.state(0, 1)[1]) == (2, 0)
    assert tuple(a.state(2, 1)[1]) == (1, 0)
    assert tuple(a.state(0, 2)[1]) == (0, 0)


def _circle_error(frame_rate):
    ts = np.arange(40) / frame_rate
    s = annotate(_scene({0: list(zip(np.cos(ts), np.sin(ts)))}, frame_rate))
    dt = 1 / frame_rate
    return max(float(np.hypot(*(s.state(f, 0)[0] + s.state(f, 0)[1] * dt - s.state(f + 1, 0)[0])))
               for f in s.frames[1:-1])


def test_annotate_integrates_back():
    # unit circle at unit speed: forward step error is about a*dt^2/2
    coarse, fine = _circle_error(10.0), _circle_error(20.0)
    assert coarse < 0.01
    assert 3.0 < coarse / fine < 5.0


def test_split_examples():
    s = _scene({1: [(i, 0) for i in range(10)]})
    tr, te = split(s, 0.7)
    assert tr.frames == list(range(7)) and te.frames == [7, 8, 9]
    tr, te = split(_scene({1: [(0, 0), (1, 0)]}), 0.5)
    assert len(tr.frames) == len(te.frames) == 1
    with pytest.raises(ValueError):
        split(_scene({1: [(0, 0)]}), 0.7)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 40), st.floats(0.05, 0.95))
def test_split_preserves_samples(n, ratio):
    s = _scene({1: [(i, 0) for i in range(n)], 2: [(0, i) for i in range(n // 2 + 1)]})
    tr, te = split(s, ratio)
    assert tr.sample_count + te.sample_count == s.sample_count
    assert not set(tr.frames) & set(te.frames)


def test_corridor_constant_spacing():
    s = synth_corridor(lanes=2, agents_per_lane=3, speed=1.0)
    for f in s.frames:
        ids, pos = s.at(f)
        for lane in range(2):
            p = pos[lane * 3:(lane + 1) * 3]
            d = np.hypot(*(p[1:] - p[:-1]).T)
            d0 = np.hypot(*(s.at(0)[1][lane * 3 + 1:(lane + 1) * 3] - s.at(0)[1][lane * 3:lane * 3 + 2]).T)
            np.testing.assert_allclose(d, d0, atol=1e-9)
        v = s.velocities[f]
        np.testing.assert_allclose(v[:3], np.broadcast_to(v[0], (3, 2)), atol=1e-9)


def test_corridor_directions_and_jitter():
    s = synth_corridor(lanes=2, agents_per_lane=4)
    v = s.velocities[5]
    assert np.all(v[:4, 0] > 0) and np.all(v[4:, 0] < 0)
    y = s.at(0)[1][:, 1]
    assert np.all(np.abs(y[:4]) < 0.05) and np.all(np.abs(y[4:] - 1.2) < 0.05)


def test_corridor_single_agent_straight_line():
    s = synth_corridor(lanes=1, agents_per_lane=1, speed=1.0, frame_rate=10)
    pos = np.array([s.at(f)[1][0] for f in s.frames])
    np.testing.assert_allclose(np.diff(pos[:, 0]), 0.1, atol=1e-9)
    np.testing.assert_allclose(pos[:, 1], pos[0, 1])


def test_corridor_deterministic():
    a, b = synth_corridor(seed=3, sway=0.1), synth_corridor(seed=3, sway=0.1)
    for f in a.frames:
        assert a.at(f)[1].tobytes() == b.at(f)[1].tobytes()


def test_corridor_rejects_bad_params():
    with pytest.raises(ValueError):
        synth_corridor(speed=0)
    with pytest.raises(ValueError):
        synth_corridor(sway=-1)


def test_random_walk_stays_in_box():
    s = synth_random_walk(n_agents=6, extent=4, n_frames=200, seed=2)
    for f in s.frames:
        p = s.at(f)[1]
        assert np.all(p >= 0) and np.all(p <= 4)
