import math

import pytest

from crowdimpute.config import (ConfigError, RunConfig, dump_config, load_config, parse_config,
                                with_overrides)


def test_defaults():
    c = RunConfig()
    assert (c.r_max, c.t_c, c.eps_l, c.eps_theta_deg) == (5.0, 1.0, 0.5, 45.0)
    assert (c.alpha, c.beta, c.eps_s, c.r_s, c.r_nav) == (0.2, 0.1, 0.5, 2.0, 4.0)
    assert c.tie_params().eps_theta == pytest.approx(math.pi / 4)
    assert c.bin_geometry().shape == (20, 36)
    assert c.lidar().n_rays == 720
    assert c.tracker().history_len == 10
    assert c.imputation().max_virtual == 20


def test_parse_with_comments_and_types():
    c = parse_config("# run\nseed = 7\nr_nav=3.5  # closer\npcf_gp_smoothing = yes\nrobot_agent = 4\n")
    assert c.seed == 7 and c.r_nav == 3.5 and c.pcf_gp_smoothing is True and c.robot_agent == "4"


@pytest.mark.parametrize("text", ["bogus = 1", "seed = x", "eps_s = 1.5", "r_max = 0",
                                  "just words", "padding = 2", "train_ratio = 1",
                                  "pcf_gp_smoothing = maybe"])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_overrides_and_round_trip(tmp_path):
    c = with_overrides(RunConfig(), {"seed": 3, "kde_sigma": "0.4"})
    assert c.seed == 3 and c.kde_sigma == 0.4
    (tmp_path / "c.txt").write_text(dump_config(c))
    assert load_config(tmp_path / "c.txt") == c
