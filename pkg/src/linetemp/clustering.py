"""K-means grouping of line segments with similar surroundings.

Segments in one cluster share a single set of cooling-rate parameters.  The
feature vector holds position, ambient temperature, wind speed, wind
direction, line axis and conductor type; angles enter as (sin, cos) pairs so
359 and 1 degree sit next to each other.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .oracle import fmt

FEATURES = ("lat", "lon", "ambient_temp", "wind_speed", "wind_direction", "azimuth", "conductor")


class TooFewSegments(UserWarning):
    """More clusters requested than segments; k is reduced to the segment count."""


@dataclass(frozen=True)
class ClusterSpec:
    k: int = 500
    weights: dict = field(default_factory=dict)
    max_iterations: int = 100
    seed: int = 0
    # one degree of latitude/longitude counts as much as this many degrees C of ambient spread
    geo_degree_equiv: float = 2.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        unknown = set(self.weights) - set(FEATURES)
        if unknown:
            raise ValueError(f"unknown feature weights {sorted(unknown)}")
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("feature weights must be >= 0")

    def weight(self, name):
        return float(self.weights.get(name, 1.0))


@dataclass
class ClusterResult:
    assignments: np.ndarray
    centroids: np.ndarray
    representatives: np.ndarray  # member index closest to each centroid
    inertia_history: list
    k: int
    iterations: int
    warnings: list = field(default_factory=list)

    @property
    def inertia(self):
        return self.inertia_history[-1]


def _zscore(x):
    sd = x.std()
    return (x - x.mean()) / (sd if sd > 0 else 1.0)


def _angle_pair(deg, period=360.0):
    a = 2 * np.pi * np.asarray(deg, dtype=float) / period
    s, c = np.sin(a), np.cos(a)
    # one pooled scale keeps the pair on a circle
    sd = np.sqrt(s.var() + c.var())
    sd = sd if sd > 1e-12 else 1.0
    return np.column_stack([(s - s.mean()) / sd, (c - c.mean()) / sd])


def segment_features(lat, lon, ambient_temp, wind_speed, wind_direction, azimuth, conductor_names,
                     spec: ClusterSpec = ClusterSpec()):
    """Scaled, weighted feature matrix (n, d).

    Wind direction is periodic over 360 degrees and the line axis over 180, so
    the axis angle is doubled before embedding.
    """
    lat, lon, ta = (np.asarray(x, dtype=float) for x in (lat, lon, ambient_temp))
    ta_sd = ta.std() if ta.std() > 0 else 1.0
    geo = spec.geo_degree_equiv / ta_sd
    cols = [
        spec.weight("lat") * geo * (lat - lat.mean())[:, None],
        spec.weight("lon") * geo * (lon - lon.mean())[:, None],
        spec.weight("ambient_temp") * _zscore(ta)[:, None],
        spec.weight("wind_speed") * _zscore(np.asarray(wind_speed, dtype=float))[:, None],
        spec.weight("wind_direction") * _angle_pair(wind_direction, 360.0),
        spec.weight("azimuth") * _angle_pair(azimuth, 180.0),
    ]
    names = np.asarray(conductor_names)
    kinds = np.unique(names)
    if kinds.size > 1:
        cols.append(spec.weight("conductor") * (names[:, None] == kinds[None, :]).astype(float))
    return np.hstack(cols)


def _sq_dist(x, c, chunk=4096):
    out = np.empty((x.shape[0], c.shape[0]))
    for s in range(0, x.shape[0], chunk):
        d = x[s:s + chunk, None, :] - c[None, :, :]
        out[s:s + chunk] = np.einsum("ijk,ijk->ij", d, d)
    return out


def _nearest(x, c):
    """Index of the nearest centroid (lowest index on ties) and its squared distance."""
    cc = np.einsum("ij,ij->i", c, c)
    idx = np.empty(x.shape[0], dtype=int)
    for s in range(0, x.shape[0], 4096):
        xs = x[s:s + 4096]
        # |x|^2 is constant per row, so it does not change the argmin
        idx[s:s + 4096] = np.argmin(cc[None, :] - 2.0 * xs @ c.T, axis=1)
    d = x - c[idx]
    return idx, np.einsum("ij,ij->i", d, d)


def kmeans_pp_init(x, k, rng):
    n = x.shape[0]
    centers = [int(rng.integers(n))]
    d2 = _sq_dist(x, x[centers])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            # every point already coincides with a centre
            remaining = np.setdiff1d(np.arange(n), centers)
            nxt = int(remaining[0])
        else:
            nxt = int(rng.choice(n, p=d2 / total))
        centers.append(nxt)
        d2 = np.minimum(d2, _sq_dist(x, x[[nxt]])[:, 0])
    return x[centers].copy()


def kmeans(x, k, seed=0, max_iterations=100) -> ClusterResult:
    """Lloyd iterations from k-means++ seeds; deterministic for a given seed."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    notes = []
    if n == 0:
        raise ValueError("no points to cluster")
    if not np.all(np.isfinite(x)):
        raise ValueError("features must be finite")
    if k > n:
        msg = f"k = {k} exceeds {n} segments; using k = {n}"
        warnings.warn(msg, TooFewSegments, stacklevel=2)
        notes.append(msg)
        k = n
    rng = np.random.default_rng(seed)
    cent = kmeans_pp_init(x, k, rng)
    assign, d2 = _nearest(x, cent)
    history = [float(d2.sum())]
    it = 0
    for it in range(1, max_iterations + 1):
        counts = np.bincount(assign, minlength=k)
        sums = np.zeros_like(cent)
        np.add.at(sums, assign, x)
        # an emptied cluster keeps its old centre
        cent = np.where(counts[:, None] > 0, sums / np.maximum(counts, 1)[:, None], cent)
        new, d2 = _nearest(x, cent)
        history.append(float(d2.sum()))
        if np.array_equal(new, assign):
            break
        assign = new
    reps = np.full(k, -1)
    for j in range(k):
        members = np.nonzero(assign == j)[0]
        if members.size:
            reps[j] = members[np.argmin(_sq_dist(x[members], cent[[j]])[:, 0])]
    return ClusterResult(assign, cent, reps, history, k, it, notes)


def cluster_segments(features, spec: ClusterSpec = ClusterSpec()) -> ClusterResult:
    return kmeans(features, spec.k, spec.seed, spec.max_iterations)


@dataclass
class ClusterQuality:
    ambient_spread: np.ndarray
    wind_speed_spread: np.ndarray
    wind_direction_spread: np.ndarray
    limits: tuple = (2.0, 2.0, 10.0)

    @property
    def violating(self):
        """Clusters exceeding any of the (ambient, speed, direction) spread targets."""
        lt, lv, ld = self.limits
        bad = (self.ambient_spread > lt) | (self.wind_speed_spread > lv) | (self.wind_direction_spread > ld)
        return np.nonzero(bad)[0]

    def summary(self):
        k = self.ambient_spread.size
        return {
            "clusters": int(k),
            "violating": int(self.violating.size),
            "max_ambient_spread": float(self.ambient_spread.max(initial=0.0)),
            "max_wind_speed_spread": float(self.wind_speed_spread.max(initial=0.0)),
            "max_wind_direction_spread": float(self.wind_direction_spread.max(initial=0.0)),
        }


def circular_spread(deg):
    """Largest pairwise angular distance (degrees) within a set of bearings."""
    a = np.sort(np.mod(np.asarray(deg, dtype=float), 360.0))
    if a.size < 2:
        return 0.0
    gaps = np.diff(np.concatenate([a, [a[0] + 360.0]]))
    arc = 360.0 - gaps.max()
    if arc <= 180.0:
        return float(arc)
    d = np.abs(a[:, None] - a[None, :])
    return float(np.minimum(d, 360.0 - d).max())


def cluster_quality(assignments, ambient_temp, wind_speed, wind_direction, k=None, limits=(2.0, 2.0, 10.0)):
    assignments = np.asarray(assignments)
    k = int(assignments.max()) + 1 if k is None else k
    ta, ws, wd = (np.asarray(v, dtype=float) for v in (ambient_temp, wind_speed, wind_direction))
    spreads = np.zeros((3, k))
    order = np.argsort(assignments, kind="stable")
    bounds = np.searchsorted(assignments[order], np.arange(k + 1))
    for j in range(k):
        m = order[bounds[j]:bounds[j + 1]]
        if m.size:
            spreads[0, j] = np.ptp(ta[m])
            spreads[1, j] = np.ptp(ws[m])
            spreads[2, j] = circular_spread(wd[m])
    return ClusterQuality(spreads[0], spreads[1], spreads[2], tuple(limits))


def write_clusters_csv(path, segment_ids, result: ClusterResult):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["segment_id", "cluster_id"])
        for sid, c in zip(segment_ids, result.assignments):
            w.writerow([sid, int(c)])
    cpath = path.with_name(path.stem + "_centroids.csv")
    with cpath.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster_id", "representative"] + [f"f{i}" for i in range(result.centroids.shape[1])])
        for j, row in enumerate(result.centroids):
            rep = segment_ids[result.representatives[j]] if result.representatives[j] >= 0 else ""
            w.writerow([j, rep] + [fmt(v) for v in row])
    return path, cpath


def read_clusters_csv(path):
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [r["segment_id"] for r in rows], np.array([int(r["cluster_id"]) for r in rows])
