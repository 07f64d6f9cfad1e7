"""Social ties: pairwise displacements in the first agent's heading frame.

A tie between two agents that stayed within ``r_max`` of each other over the
last ``t_c`` seconds is *strong* when their distance barely changed and
their headings agreed, *absent* otherwise. Strong and absent tie vectors are
accumulated into two polar histograms (0.25 m x 10 deg bins by default).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .kernels import _bin_np
from .trajectory import AnnotatedScene


class TieType(enum.Enum):
    STRONG = "strong"
    ABSENT = "absent"


class InsufficientHistory(ValueError):
    pass


@dataclass(frozen=True)
class TieParams:
    r_max: float = 5.0
    t_c: float = 1.0
    eps_l: float = 0.5
    eps_theta: float = math.radians(45.0)

    def __post_init__(self):
        for name in ("r_max", "t_c", "eps_l", "eps_theta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def window(self, frame_rate: float) -> int:
        """Samples per classification window."""
        return max(2, math.ceil(self.t_c * frame_rate - 1e-9))


@dataclass(frozen=True)
class BinGeometry:
    r_max: float = 5.0
    radial_width: float = 0.25
    angular_width_deg: float = 10.0

    @property
    def n_r(self) -> int:
        return int(round(self.r_max / self.radial_width))

    @property
    def n_theta(self) -> int:
        return int(round(360.0 / self.angular_width_deg))

    @property
    def angular_width(self) -> float:
        return math.radians(self.angular_width_deg)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_r, self.n_theta

    def bin_of(self, delta) -> tuple[int, int] | None:
        """Bin of a tie vector; ``None`` beyond ``r_max``."""
        dx = np.asarray(delta[0], dtype=float)
        dy = np.asarray(delta[1], dtype=float)
        r, ri, ti = _bin_np(dx, dy, self.radial_width, self.angular_width, self.n_r, self.n_theta)
        if r > self.r_max:
            return None
        return int(ri), int(ti)

    def areas(self) -> np.ndarray:
        edges = np.arange(self.n_r + 1) * self.radial_width
        ring = 0.5 * self.angular_width * (edges[1:] ** 2 - edges[:-1] ** 2)
        return np.repeat(ring[:, None], self.n_theta, axis=1)

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        r = (np.arange(self.n_r) + 0.5) * self.radial_width
        t = -math.pi + (np.arange(self.n_theta) + 0.5) * self.angular_width
        return r, t


@dataclass(frozen=True)
class TieHistogram:
    geometry: BinGeometry
    pmf: np.ndarray
    n_observations: int = 0

    @classmethod
    def from_counts(cls, geometry: BinGeometry, counts) -> "TieHistogram":
        counts = np.asarray(counts, dtype=float)
        smoothed = counts + 1.0
        return cls(geometry, smoothed / smoothed.sum(), int(counts.sum()))

    def calibrated(self) -> np.ndarray:
        """Per-bin likelihood factors scaled so the largest is 1."""
        return self.pmf / self.pmf.max()


@dataclass(frozen=True)
class TieModel:
    strong: TieHistogram
    absent: TieHistogram
    params: TieParams = TieParams()
    metadata: dict = field(default_factory=dict)

    @property
    def geometry(self) -> BinGeometry:
        return self.strong.geometry

    def histogram(self, tau: TieType) -> TieHistogram:
        return self.strong if tau is TieType.STRONG else self.absent

    def tables(self) -> tuple[np.ndarray, np.ndarray]:
        return self.strong.calibrated(), self.absent.calibrated()


def tie_vector(heading: float, origin, target) -> np.ndarray:
    """Displacement ``target - origin`` rotated into the frame of ``heading``."""
    c, s = math.cos(heading), math.sin(heading)
    ex = float(target[0]) - float(origin[0])
    ey = float(target[1]) - float(origin[1])
    return np.array([c * ex + s * ey, -s * ex + c * ey])


def _heading_gap(a, b) -> np.ndarray:
    d = np.mod(np.asarray(a) - np.asarray(b) + math.pi, 2.0 * math.pi) - math.pi
    return np.abs(d)


def classify(relative, heading_i, heading_j, params: TieParams) -> TieType | None:
    """Classify one pair from its recent history.

    ``relative`` holds the pair displacement at each sample of the window,
    ``heading_i`` / ``heading_j`` the two headings at the same samples.
    """
    rel = np.asarray(relative, dtype=float).reshape(-1, 2)
    if len(rel) < 2:
        raise InsufficientHistory("need at least 2 samples in the window")
    dist = np.hypot(rel[:, 0], rel[:, 1])
    if np.any(dist > params.r_max):
        return None
    steady = dist.max() - dist.min() <= params.eps_l
    aligned = np.all(_heading_gap(heading_i, heading_j) <= params.eps_theta)
    return TieType.STRONG if steady and aligned else TieType.ABSENT


def classify_history(history, params: TieParams) -> TieType | None:
    """``classify`` on a tracker pair history of ``(rel, h_i, h_j)`` tuples."""
    if len(history) < 2:
        raise InsufficientHistory("need at least 2 samples in the window")
    rel = np.array([h[0] for h in history])
    return classify(rel, [h[1] for h in history], [h[2] for h in history], params)


def learn(train: AnnotatedScene, params: TieParams = TieParams(),
          geometry: BinGeometry | None = None, dataset_id: str = "") -> TieModel:
    """Accumulate classified tie vectors over every frame and ordered pair."""
    geometry = geometry or BinGeometry(r_max=params.r_max)
    counts = {TieType.STRONG: np.zeros(geometry.shape, dtype=np.int64),
              TieType.ABSENT: np.zeros(geometry.shape, dtype=np.int64)}
    w = params.window(train.frame_rate)
    frames = train.frames
    for k in range(w - 1, len(frames)):
        window = frames[k - w + 1:k + 1]
        common = None
        for f in window:
            ids = train.data[f][0]
            common = ids if common is None else np.intersect1d(common, ids)
        if common is None or len(common) < 2:
            continue
        pos = np.empty((w, len(common), 2))
        head = np.empty((w, len(common)))
        for m, f in enumerate(window):
            ids, p = train.data[f]
            idx = np.searchsorted(ids, common)
            pos[m] = p[idx]
            head[m] = train.headings[f][idx]

        diff = pos[:, None, :, :] - pos[:, :, None, :]  # [m, i, j] = x_j - x_i
        dist = np.hypot(diff[..., 0], diff[..., 1])
        near = np.all(dist <= params.r_max, axis=0)
        steady = dist.max(axis=0) - dist.min(axis=0) <= params.eps_l
        aligned = np.all(_heading_gap(head[:, :, None], head[:, None, :]) <= params.eps_theta, axis=0)
        np.fill_diagonal(near, False)
        strong = near & steady & aligned
        absent = near & ~strong

        c, s = np.cos(head[-1])[:, None], np.sin(head[-1])[:, None]
        ex, ey = diff[-1, ..., 0], diff[-1, ..., 1]
        dx = c * ex + s * ey
        dy = -s * ex + c * ey
        _, ri, ti = _bin_np(dx, dy, geometry.radial_width, geometry.angular_width,
                            geometry.n_r, geometry.n_theta)
        for tau, mask in ((TieType.STRONG, strong), (TieType.ABSENT, absent)):
            np.add.at(counts[tau], (ri[mask], ti[mask]), 1)

    strong_h = TieHistogram.from_counts(geometry, counts[TieType.STRONG])
    absent_h = TieHistogram.from_counts(geometry, counts[TieType.ABSENT])
    warnings = [f"{h} histogram has no observations"
                for h, hist in (("strong", strong_h), ("absent", absent_h))
                if hist.n_observations == 0]
    meta = {"dataset": dataset_id, "strong_observations": strong_h.n_observations,
            "absent_observations": absent_h.n_observations, "warnings": warnings,
            "prefilter_sigma": 0.0}
    return TieModel(strong_h, absent_h, params, meta)


def likelihood(model: TieModel, tau: TieType, delta) -> float:
    """Calibrated tie factor in (0, 1]; exactly 1 beyond ``r_max``."""
    b = model.geometry.bin_of(delta)
    if b is None:
        return 1.0
    return float(model.histogram(tau).calibrated()[b])


# --- pre-filtering -----------------------------------------------------------

PREFILTER_STEP = 0.02  # m, dense resampling pitch
_SUB = 5  # sub-samples per bin and axis when folding back


def _dense_field(hist: TieHistogram, step: float):
    g = hist.geometry
    n = int(math.ceil(2 * g.r_max / step))
    axis = -g.r_max + (np.arange(n) + 0.5) * step
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    r, ri, ti = _bin_np(gx, gy, g.radial_width, g.angular_width, g.n_r, g.n_theta)
    inside = r <= g.r_max
    values = np.where(inside, hist.pmf[ri, ti], 0.0)
    return axis, values, inside.astype(float)


def smooth_field(hist: TieHistogram, sigma: float, step: float = PREFILTER_STEP):
    """Mask-normalised Gaussian blur of the histogram painted on a dense grid.

    Returns ``(axis, blurred)``; ``blurred[i, j]`` is the value at
    ``(axis[i], axis[j])``.
    """
    axis, values, mask = _dense_field(hist, step)
    s = sigma / step
    num = ndimage.gaussian_filter(values * mask, s, mode="constant", cval=0.0)
    den = ndimage.gaussian_filter(mask, s, mode="constant", cval=0.0)
    blurred = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return axis, blurred


def _fold_back(hist: TieHistogram, axis: np.ndarray, blurred: np.ndarray, step: float) -> np.ndarray:
    g = hist.geometry
    fr = (np.arange(_SUB) + 0.5) / _SUB
    r_sub = (np.arange(g.n_r)[:, None] + fr[None, :]) * g.radial_width  # (n_r, SUB)
    t_sub = -math.pi + (np.arange(g.n_theta)[:, None] + fr[None, :]) * g.angular_width
    rr = r_sub[:, None, :, None]
    tt = t_sub[None, :, None, :]
    x = rr * np.cos(tt)
    y = rr * np.sin(tt)
    ci = (x - axis[0]) / step
    cj = (y - axis[0]) / step
    vals = ndimage.map_coordinates(blurred, [ci.ravel(), cj.ravel()], order=1, mode="nearest")
    vals = vals.reshape(x.shape)
    weights = np.broadcast_to(rr, x.shape)
    return (vals * weights).sum(axis=(2, 3)) / weights.sum(axis=(2, 3))


def prefilter_histogram(hist: TieHistogram, sigma: float, step: float = PREFILTER_STEP) -> TieHistogram:
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return hist
    axis, blurred = smooth_field(hist, sigma, step)
    folded = _fold_back(hist, axis, blurred, step)
    return replace(hist, pmf=folded / folded.sum())


def prefilter(model: TieModel, sensor_sigma: float) -> TieModel:
    """Fold a Gaussian sensor error of ``sensor_sigma`` into both histograms."""
    meta = dict(model.metadata, prefilter_sigma=float(sensor_sigma))
    return TieModel(prefilter_histogram(model.strong, sensor_sigma),
                    prefilter_histogram(model.absent, sensor_sigma), model.params, meta)


def entropy(hist: TieHistogram) -> float:
    """Area-corrected entropy divided by log of the disk area.

    Not clamped: concentrated pmfs on bins smaller than 1 m^2 give negative
    values.
    """
    areas = hist.geometry.areas()
    p = hist.pmf
    nz = p > 0
    h = -np.sum(p[nz] * np.log(p[nz] / areas[nz]))
    return float(h / math.log(areas.sum()))


# --- serialization ---------------------------------------------------------

_MAGIC = "# crowdimpute tie model v1"


def save_model(model: TieModel, path) -> None:
    g, p, m = model.geometry, model.params, model.metadata
    lines = [_MAGIC,
             f"r_max {p.r_max!r}", f"t_c {p.t_c!r}", f"eps_l {p.eps_l!r}",
             f"eps_theta {p.eps_theta!r}",
             f"radial_width {g.radial_width!r}", f"angular_width_deg {g.angular_width_deg!r}",
             f"n_r {g.n_r}", f"n_theta {g.n_theta}",
             f"dataset {m.get('dataset', '') or '-'}",
             f"strong_observations {model.strong.n_observations}",
             f"absent_observations {model.absent.n_observations}",
             f"prefilter_sigma {float(m.get('prefilter_sigma', 0.0))!r}",
             "warnings " + ("|".join(m.get("warnings", [])) or "-")]
    for name, hist in (("strong", model.strong), ("absent", model.absent)):
        lines.append(f"histogram {name}")
        for i in range(g.n_r):
            for j in range(g.n_theta):
                lines.append(f"{i} {j} {float(hist.pmf[i, j])!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> TieModel:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != _MAGIC:
        raise ValueError(f"{path}: not a tie model file")
    header: dict[str, str] = {}
    k = 1
    while k < len(lines) and not lines[k].startswith("histogram "):
        key, _, value = lines[k].partition(" ")
        header[key] = value
        k += 1
    params = TieParams(float(header["r_max"]), float(header["t_c"]),
                       float(header["eps_l"]), float(header["eps_theta"]))
    geom = BinGeometry(params.r_max, float(header["radial_width"]),
                       float(header["angular_width_deg"]))
    if (geom.n_r, geom.n_theta) != (int(header["n_r"]), int(header["n_theta"])):
        raise ValueError(f"{path}: inconsistent bin geometry")
    pmfs = {}
    while k < len(lines):
        name = lines[k].split()[1]
        pmf = np.zeros(geom.shape)
        for line in lines[k + 1:k + 1 + geom.n_r * geom.n_theta]:
            i, j, v = line.split()
            pmf[int(i), int(j)] = float(v)
        pmfs[name] = pmf
        k += 1 + geom.n_r * geom.n_theta
    warnings = [] if header["warnings"] == "-" else header["warnings"].split("|")
    meta = {"dataset": "" if header["dataset"] == "-" else header["dataset"],
            "strong_observations": int(header["strong_observations"]),
            "absent_observations": int(header["absent_observations"]),
            "warnings": warnings, "prefilter_sigma": float(header["prefilter_sigma"])}
    return TieModel(TieHistogram(geom, pmfs["strong"], meta["strong_observations"]),
                    TieHistogram(geom, pmfs["absent"], meta["absent_observations"]),
                    params, meta)
