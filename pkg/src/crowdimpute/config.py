"""Run configuration: flat ``key = value`` files, overridable from the CLI."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

from .baselines import GPModel
from .communities import MahalanobisParams
from .imputation import ImputationParams
from .sensor import LidarSpec
from .ties import BinGeometry, TieParams
from .tracking import TrackerParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # tie classification and histograms
    r_max: float = 5.0
    t_c: float = 1.0
    eps_l: float = 0.5
    eps_theta_deg: float = 45.0
    hist_radial: float = 0.25
    hist_angular_deg: float = 10.0
    padding: float = 1.0
    # territories
    alpha: float = 0.2
    beta: float = 0.1
    # imputation
    eps_s: float = 0.5
    r_s: float = 2.0
    r_nav: float = 4.0
    max_virtual: int = 20
    hypotheses: int = 5
    # maps
    grid_resolution: float = 8.0
    map_half_extent: float = 8.0
    kde_sigma: float = 0.5
    # sensor
    lidar_resolution_deg: float = 0.5
    lidar_min_range: float = 0.05
    lidar_max_range: float = 8.0
    body_radius: float = 0.3
    visibility_fraction: float = 0.5
    noise_sigma: float = 0.05
    # tracker
    gate: float = 1.0
    max_misses: int = 5
    jerk: float = 0.5
    warmup_frames: int = 10
    # PCF baseline
    pcf_points: int = 50
    pcf_bandwidth: float = 0.25
    pcf_max_trials: int = 100
    pcf_tolerance: float = 1e-3
    pcf_gp_smoothing: bool = False
    gp_signal_var: float = 0.01
    gp_length_scale: float = 0.5
    gp_noise_var: float = 0.001
    # data and run
    frame_rate: float = 10.0
    train_ratio: float = 0.7
    robot_agent: str = "random"
    seed: int = 0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool) or isinstance(v, str):
                continue
            if f.name in ("seed", "warmup_frames"):
                if v < 0:
                    raise ConfigError(f"{f.name} must be >= 0")
            elif not v > 0:
                raise ConfigError(f"{f.name} must be positive")
        if not 0 < self.eps_s <= 1:
            raise ConfigError("eps_s must lie in (0, 1]")
        if not 0 < self.train_ratio < 1:
            raise ConfigError("train_ratio must lie in (0, 1)")
        if self.padding != 1.0:
            raise ConfigError("only padding = 1 (neutral out-of-range factor) is supported")

    # --- component parameter views -------------------------------------------

    def tie_params(self) -> TieParams:
        return TieParams(self.r_max, self.t_c, self.eps_l, math.radians(self.eps_theta_deg))

    def bin_geometry(self) -> BinGeometry:
        return BinGeometry(self.r_max, self.hist_radial, self.hist_angular_deg)

    def lidar(self) -> LidarSpec:
        return LidarSpec(self.lidar_resolution_deg, self.lidar_min_range, self.lidar_max_range,
                         self.body_radius, self.noise_sigma, self.visibility_fraction)

    def tracker(self) -> TrackerParams:
        return TrackerParams(self.gate, self.max_misses, self.jerk, self.noise_sigma,
                             r_max=self.r_max, history_len=self.tie_params().window(self.frame_rate))

    def imputation(self) -> ImputationParams:
        return ImputationParams(self.eps_s, self.r_s, self.r_nav, self.max_virtual,
                                self.hypotheses, self.noise_sigma)

    def mahalanobis(self) -> MahalanobisParams:
        return MahalanobisParams(self.alpha, self.beta)

    def gp(self, prior) -> GPModel:
        return GPModel.from_curve(prior, signal_var=self.gp_signal_var,
                                  length_scale=self.gp_length_scale, noise_var=self.gp_noise_var)

    def to_dict(self) -> dict:
        return asdict(self)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _TYPES[key]
    raw = raw.strip()
    try:
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def with_overrides(config: RunConfig, overrides: dict) -> RunConfig:
    clean = {}
    for key, value in overrides.items():
        if key not in _TYPES:
            raise ConfigError(f"unknown config key: {key}")
        clean[key] = _coerce(key, value) if isinstance(value, str) else value
    return replace(config, **clean)


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        values[key.strip()] = value.strip()
    return with_overrides(base or RunConfig(), values)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(config: RunConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in config.to_dict().items())
