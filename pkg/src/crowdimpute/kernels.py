"""Hot inner loops, each in a numba flavour and a pure-numpy flavour.

The public names at the bottom (``ray_hits``, ``shadow_mask``, ...) dispatch
to one flavour according to :data:`crowdimpute._accel.BACKEND`. Both flavours
are importable directly (``*_nb`` / ``*_np``) so tests and the benchmark can
compare them.

All kernels take plain float64/int64 arrays; no Python objects cross the
boundary.
"""
from __future__ import annotations

import math

import numpy as np

from ._accel import BACKEND, njit

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# polar binning shared by tie histograms and the tie-product grid


@njit
def _bin_nb(dx, dy, dr, dth, nr, nt):
    r = math.sqrt(dx * dx + dy * dy)
    ri = int(r / dr)
    if ri >= nr:
        ri = nr - 1
    th = math.atan2(dy, dx) if r > 0.0 else 0.0
    ti = int(math.floor((th + math.pi) / dth))
    if ti >= nt:
        ti -= nt
    elif ti < 0:
        ti = 0
    return r, ri, ti


def _bin_np(dx, dy, dr, dth, nr, nt):
    r = np.sqrt(dx * dx + dy * dy)
    ri = np.minimum((r / dr).astype(np.int64), nr - 1)
    th = np.where(r > 0.0, np.arctan2(dy, dx), 0.0)
    ti = np.floor((th + math.pi) / dth).astype(np.int64)
    ti = np.where(ti >= nt, ti - nt, ti)
    ti = np.maximum(ti, 0)
    return r, ri, ti


# ---------------------------------------------------------------------------
# ray casting against disks


@njit
def ray_hits_nb(ox, oy, bearings, agents, radius, max_range):
    n_rays = bearings.shape[0]
    n = agents.shape[0]
    first_dist = np.full(n_rays, np.inf)
    first_idx = np.full(n_rays, -1, dtype=np.int64)
    subtend = np.zeros(n, dtype=np.int64)
    visible = np.zeros(n, dtype=np.int64)
    r2 = radius * radius
    for k in range(n_rays):
        ux = math.cos(bearings[k])
        uy = math.sin(bearings[k])
        best = np.inf
        best_i = -1
        for a in range(n):
            dx = agents[a, 0] - ox
            dy = agents[a, 1] - oy
            tc = dx * ux + dy * uy
            perp2 = dx * dx + dy * dy - tc * tc
            if perp2 > r2:
                continue
            half = math.sqrt(r2 - perp2)
            if tc + half <= 0.0:
                continue
            t = tc - half
            if t < 0.0:
                t = 0.0
            subtend[a] += 1
            if t < best:
                best = t
                best_i = a
        first_dist[k] = best
        first_idx[k] = best_i
        if best_i >= 0 and best <= max_range:
            visible[best_i] += 1
    return first_dist, first_idx, subtend, visible


def ray_hits_np(ox, oy, bearings, agents, radius, max_range):
    n_rays = bearings.shape[0]
    n = agents.shape[0]
    if n == 0:
        return (np.full(n_rays, np.inf), np.full(n_rays, -1, dtype=np.int64),
                np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))
    ux = np.cos(bearings)[:, None]
    uy = np.sin(bearings)[:, None]
    dx = (agents[:, 0] - ox)[None, :]
    dy = (agents[:, 1] - oy)[None, :]
    tc = dx * ux + dy * uy
    perp2 = dx * dx + dy * dy - tc * tc
    r2 = radius * radius
    half = np.sqrt(np.maximum(r2 - perp2, 0.0))
    hit = (perp2 <= r2) & (tc + half > 0.0)
    t = np.where(hit, np.maximum(tc - half, 0.0), np.inf)
    first_idx = np.argmin(t, axis=1)
    first_dist = t[np.arange(n_rays), first_idx]
    first_idx = np.where(np.isfinite(first_dist), first_idx, -1).astype(np.int64)
    subtend = hit.sum(axis=0).astype(np.int64)
    seen = (first_idx >= 0) & (first_dist <= max_range)
    visible = np.bincount(first_idx[seen], minlength=n).astype(np.int64)
    return first_dist, first_idx, subtend, visible


# ---------------------------------------------------------------------------
# shadow cones behind disks


@njit
def shadow_mask_nb(cells, ox, oy, agents, radius):
    c = cells.shape[0]
    n = agents.shape[0]
    out = np.zeros(c, dtype=np.bool_)
    dist = np.empty(n)
    half = np.empty(n)
    ba = np.empty(n)
    for a in range(n):
        ax = agents[a, 0] - ox
        ay = agents[a, 1] - oy
        dist[a] = math.sqrt(ax * ax + ay * ay)
        ratio = radius / dist[a] if dist[a] > 0.0 else 1.0
        half[a] = math.asin(min(ratio, 1.0))
        ba[a] = math.atan2(ay, ax)
    for i in range(c):
        cx = cells[i, 0] - ox
        cy = cells[i, 1] - oy
        rc = math.sqrt(cx * cx + cy * cy)
        bc = math.atan2(cy, cx)
        for a in range(n):
            if rc <= dist[a]:
                continue
            diff = (bc - ba[a] + math.pi) % TWO_PI - math.pi
            if abs(diff) <= half[a]:
                out[i] = True
                break
    return out


def shadow_mask_np(cells, ox, oy, agents, radius):
    out = np.zeros(cells.shape[0], dtype=bool)
    if agents.shape[0] == 0:
        return out
    cx = cells[:, 0] - ox
    cy = cells[:, 1] - oy
    rc = np.sqrt(cx * cx + cy * cy)
    bc = np.arctan2(cy, cx)
    for a in range(agents.shape[0]):
        ax = agents[a, 0] - ox
        ay = agents[a, 1] - oy
        d = math.sqrt(ax * ax + ay * ay)
        half = math.asin(min(radius / d, 1.0)) if d > 0.0 else math.pi / 2
        diff = (bc - math.atan2(ay, ax) + math.pi) % TWO_PI - math.pi
        out |= (rc > d) & (np.abs(diff) <= half)
    return out


# ---------------------------------------------------------------------------
# tie-likelihood product over agents, multiplied into q in place


@njit
def tie_product_into_nb(q, cells, labels, agents, headings, comms,
                        strong, absent, r_max, dr, dth):
    nr = strong.shape[0]
    nt = strong.shape[1]
    for a in range(agents.shape[0]):
        c = math.cos(headings[a])
        s = math.sin(headings[a])
        zx = agents[a, 0]
        zy = agents[a, 1]
        k = comms[a]
        for i in range(cells.shape[0]):
            ex = cells[i, 0] - zx
            ey = cells[i, 1] - zy
            dx = c * ex + s * ey
            dy = -s * ex + c * ey
            r, ri, ti = _bin_nb(dx, dy, dr, dth, nr, nt)
            if r > r_max:
                continue
            if labels[i] == k:
                q[i] *= strong[ri, ti]
            else:
                q[i] *= absent[ri, ti]
    return q


def tie_product_into_np(q, cells, labels, agents, headings, comms,
                        strong, absent, r_max, dr, dth):
    nr, nt = strong.shape
    for a in range(agents.shape[0]):
        c = math.cos(headings[a])
        s = math.sin(headings[a])
        ex = cells[:, 0] - agents[a, 0]
        ey = cells[:, 1] - agents[a, 1]
        dx = c * ex + s * ey
        dy = -s * ex + c * ey
        r, ri, ti = _bin_np(dx, dy, dr, dth, nr, nt)
        f = np.where(labels == comms[a], strong[ri, ti], absent[ri, ti])
        q *= np.where(r > r_max, 1.0, f)
    return q


# ---------------------------------------------------------------------------
# isotropic Gaussian KDE at cell centres


@njit
def kde_nb(cells, agents, sigma):
    out = np.zeros(cells.shape[0])
    norm = 1.0 / (2.0 * math.pi * sigma * sigma)
    inv = 1.0 / (2.0 * sigma * sigma)
    for a in range(agents.shape[0]):
        for i in range(cells.shape[0]):
            dx = cells[i, 0] - agents[a, 0]
            dy = cells[i, 1] - agents[a, 1]
            out[i] += norm * math.exp(-(dx * dx + dy * dy) * inv)
    return out


def kde_np(cells, agents, sigma):
    out = np.zeros(cells.shape[0])
    norm = 1.0 / (2.0 * math.pi * sigma * sigma)
    inv = 1.0 / (2.0 * sigma * sigma)
    for a in range(agents.shape[0]):
        dx = cells[:, 0] - agents[a, 0]
        dy = cells[:, 1] - agents[a, 1]
        out += norm * np.exp(-(dx * dx + dy * dy) * inv)
    return out


# ---------------------------------------------------------------------------
# Mahalanobis 1-NN territory labels
# members must be sorted by community id so strict '<' breaks ties low


@njit
def territory_nb(cells, members, velocities, comms, alpha, beta):
    c = cells.shape[0]
    labels = np.empty(c, dtype=np.int64)
    best = np.full(c, np.inf)
    for m in range(members.shape[0]):
        vx = velocities[m, 0]
        vy = velocities[m, 1]
        speed = math.sqrt(vx * vx + vy * vy)
        if speed < 1e-6:
            ux, uy = 1.0, 0.0
        else:
            ux, uy = vx / speed, vy / speed
        l1 = alpha * speed + beta
        for i in range(c):
            ex = cells[i, 0] - members[m, 0]
            ey = cells[i, 1] - members[m, 1]
            along = ex * ux + ey * uy
            across = -ex * uy + ey * ux
            d = along * along / l1 + across * across / beta
            if d < best[i]:
                best[i] = d
                labels[i] = comms[m]
    return labels


def territory_np(cells, members, velocities, comms, alpha, beta):
    c = cells.shape[0]
    labels = np.empty(c, dtype=np.int64)
    best = np.full(c, np.inf)
    for m in range(members.shape[0]):
        vx, vy = velocities[m]
        speed = math.sqrt(vx * vx + vy * vy)
        if speed < 1e-6:
            ux, uy = 1.0, 0.0
        else:
            ux, uy = vx / speed, vy / speed
        l1 = alpha * speed + beta
        ex = cells[:, 0] - members[m, 0]
        ey = cells[:, 1] - members[m, 1]
        along = ex * ux + ey * uy
        across = -ex * uy + ey * ux
        d = along * along / l1 + across * across / beta
        better = d < best
        best[better] = d[better]
        labels[better] = comms[m]
    return labels


# ---------------------------------------------------------------------------
# dispatch

if BACKEND == "numba":
    ray_hits = ray_hits_nb
    shadow_mask = shadow_mask_nb
    tie_product_into = tie_product_into_nb
    kde = kde_nb
    territory_labels = territory_nb
else:
    ray_hits = ray_hits_np
    shadow_mask = shadow_mask_np
    tie_product_into = tie_product_into_np
    kde = kde_np
    territory_labels = territory_np
