"""Comparison baselines.

* vanilla: the tracked detections as they are.
* PCF: dart throwing that keeps a candidate point only if the pair-distance
  density of the augmented set does not move away from a target curve.
* GP regression over PCF curves with a squared-exponential kernel, usable to
  smooth the target curve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.spatial.distance import pdist

from .communities import Community, TerritoryField
from .geometry import Vec2
from .imputation import Crowd, Hypothesis, VirtualAgent


class SingularSystemError(np.linalg.LinAlgError):
    pass


def vanilla(detections: Crowd) -> Hypothesis:
    return Hypothesis(detections, [])


# --- pair correlation ------------------------------------------------------

@dataclass(frozen=True)
class PCFCurve:
    radii: np.ndarray
    values: np.ndarray
    bandwidth: float

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.shape != v.shape or np.any(np.diff(r) <= 0):
            raise ValueError("radii must be strictly increasing and match values")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("PCF values must be finite and non-negative")
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "values", v)


def radius_grid(r_max: float = 5.0, n: int = 50) -> np.ndarray:
    return np.linspace(0.0, r_max, n)


def _pcf_values(points: np.ndarray, radii: np.ndarray, bandwidth: float) -> np.ndarray:
    if len(points) < 2:
        return np.zeros_like(radii)
    d = np.sort(pdist(points))
    z = (radii[:, None] - d[None, :]) / bandwidth
    dens = np.exp(-0.5 * z * z) / (math.sqrt(2.0 * math.pi) * bandwidth)
    return dens.sum(axis=1) / len(d)


def pcf_estimate(points, radii=None, bandwidth: float = 0.25) -> PCFCurve:
    """Gaussian KDE of all unordered pair distances, normalised by pair count."""
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    radii = radius_grid() if radii is None else np.asarray(radii, dtype=float)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return PCFCurve(radii, _pcf_values(pts, radii, bandwidth), bandwidth)


def mean_pcf(frames_points, radii=None, bandwidth: float = 0.25) -> PCFCurve:
    """Average PCF over several point sets (sets with < 2 points skipped)."""
    radii = radius_grid() if radii is None else np.asarray(radii, dtype=float)
    curves = [_pcf_values(np.asarray(p, dtype=float).reshape(-1, 2), radii, bandwidth)
              for p in frames_points if len(p) >= 2]
    values = np.mean(curves, axis=0) if curves else np.zeros_like(radii)
    return PCFCurve(radii, values, bandwidth)


def pcf_error(points: np.ndarray, target: PCFCurve) -> float:
    """L2 distance between the PCF of ``points`` and ``target``."""
    diff = _pcf_values(points, target.radii, target.bandwidth) - target.values
    step = target.radii[1] - target.radii[0] if len(target.radii) > 1 else 1.0
    return float(math.sqrt(np.sum(diff * diff) * step))


def dart_throw(observed, target: PCFCurve, domain, rng: np.random.Generator,
               max_trials: int = 100, tolerance: float = 1e-3, max_points: int = 20):
    """Accept uniform candidates from ``domain`` while the PCF error does not grow.

    Returns ``(accepted points, error after each acceptance)``; the first
    error entry is that of ``observed`` alone.
    """
    pts = np.asarray(observed, dtype=float).reshape(-1, 2)
    domain = np.asarray(domain, dtype=float).reshape(-1, 2)
    err = pcf_error(pts, target)
    errors = [err]
    accepted: list[np.ndarray] = []
    rejections = 0
    while err >= tolerance and rejections < max_trials and len(accepted) < max_points and len(domain):
        cand = domain[int(rng.integers(len(domain)))]
        trial = np.vstack([pts, cand])
        new = pcf_error(trial, target)
        if new <= err:
            pts, err = trial, new
            accepted.append(cand.copy())
            errors.append(err)
            rejections = 0
        else:
            rejections += 1
    return np.array(accepted, dtype=float).reshape(-1, 2), errors


def pcf_synthesize(observed: Crowd, target: PCFCurve, domain, rng: np.random.Generator,
                   territory: TerritoryField | None = None, communities: list[Community] | None = None,
                   max_trials: int = 100, tolerance: float = 1e-3, max_points: int = 20) -> Hypothesis:
    """PCF dart throwing; accepted points become virtual agents of the local territory."""
    if not np.any(target.values > 0):
        raise ValueError("target PCF is identically zero")
    added, _ = dart_throw(observed.positions, target, domain, rng, max_trials, tolerance, max_points)
    vel = {c.id: np.asarray(c.velocity, dtype=float) for c in (communities or [])}
    virtual = []
    for p in added:
        k = territory.label_at(p) if territory is not None else -1
        k = -1 if k is None else k
        v = vel.get(k, np.zeros(2))
        virtual.append(VirtualAgent(Vec2(float(p[0]), float(p[1])), k, Vec2(float(v[0]), float(v[1]))))
    return Hypothesis(observed, virtual)


def write_pcf(curve: PCFCurve, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# bandwidth {float(curve.bandwidth)!r}\n")
        for r, v in zip(curve.radii, curve.values):
            fh.write(f"{float(r)!r} {float(v)!r}\n")


def read_pcf(path) -> PCFCurve:
    bandwidth = 0.25
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "#":
                if len(parts) >= 3 and parts[1] == "bandwidth":
                    bandwidth = float(parts[2])
                continue
            rows.append((float(parts[0]), float(parts[1])))
    arr = np.array(rows, dtype=float).reshape(-1, 2)
    return PCFCurve(arr[:, 0], arr[:, 1], bandwidth)


# --- Gaussian process over PCF curves ----------------------------------------

@dataclass(frozen=True)
class GPModel:
    """Prior mean curve plus squared-exponential kernel.

    ``signal_var`` scales the kernel, ``noise_var`` is the observation noise.
    """

    prior_radii: np.ndarray
    prior_values: np.ndarray
    signal_var: float = 1.0
    length_scale: float = 0.5
    noise_var: float = 0.01

    def __post_init__(self):
        if not self.signal_var > 0 or not self.length_scale > 0 or self.noise_var < 0:
            raise ValueError("need signal_var > 0, length_scale > 0, noise_var >= 0")

    @classmethod
    def from_curve(cls, prior: PCFCurve, **kw) -> "GPModel":
        return cls(prior.radii, prior.values, **kw)

    def mean(self, r) -> np.ndarray:
        return np.interp(np.asarray(r, dtype=float), self.prior_radii, self.prior_values)

    def kernel(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=float)[:, None]
        b = np.asarray(b, dtype=float)[None, :]
        return self.signal_var * np.exp(-((a - b) ** 2) / (2.0 * self.length_scale ** 2))


def gp_posterior(model: GPModel, obs_r, obs_p, queries):
    """Posterior mean and variance of the curve at ``queries``."""
    r = np.asarray(obs_r, dtype=float).reshape(-1)
    p = np.asarray(obs_p, dtype=float).reshape(-1)
    q = np.asarray(queries, dtype=float).reshape(-1)
    prior_q = model.mean(q)
    c = np.full(len(q), model.signal_var)
    if len(r) == 0:
        return prior_q, c
    if model.noise_var == 0 and len(np.unique(r)) < len(r):
        raise SingularSystemError("duplicate inputs with zero observation noise")
    K = model.kernel(r, r) + model.noise_var * np.eye(len(r))
    try:
        factor = linalg.cho_factor(K, lower=True)
    except linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from None
    k = model.kernel(r, q)  # (n, m)
    alpha = linalg.cho_solve(factor, p - model.mean(r))
    mu = prior_q + k.T @ alpha
    v = linalg.cho_solve(factor, k)
    var = c - np.sum(k * v, axis=0)
    return mu, np.maximum(var, 0.0)


def gp_smooth(curve: PCFCurve, model: GPModel) -> PCFCurve:
    """Replace a curve by the GP posterior mean given its own samples."""
    mu, _ = gp_posterior(model, curve.radii, curve.values, curve.radii)
    return PCFCurve(curve.radii, np.maximum(mu, 0.0), curve.bandwidth)
