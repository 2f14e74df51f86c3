"""Dataset curation: K-means clustering, elbow diagnostics, convex envelope.

Records are placed in the plane (log10 PGA [g], log10 peak displacement [cm]).
Records whose peak displacement exceeds the boundary threshold are held out
for prediction; inside the boundary, the convex-hull records and the record
nearest each centroid form the training set.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, PartitionError

LABELS = ("training", "validation", "prediction")


@dataclass(frozen=True)
class FeaturePoint:
    record_id: str
    pga: float  # g
    peak_disp: float  # cm

    def __post_init__(self):
        if not (self.pga > 0 and self.peak_disp > 0):
            raise DomainError(f"{self.record_id}: PGA and peak displacement must be positive")
        if not (np.isfinite(self.pga) and np.isfinite(self.peak_disp)):
            raise DomainError(f"{self.record_id}: coordinates must be finite")

    @property
    def coords(self):
        return (np.log10(self.pga), np.log10(self.peak_disp))


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray
    labels: np.ndarray
    distortion: float
    iterations: int = 0


def _assign(points, centroids):
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(len(points)), labels]


def _plus_plus(points, k, rng):
    n = len(points)
    centroids = [points[rng.integers(n)]]
    for _ in range(1, k):
        d2 = np.min(((points[:, None, :] - np.array(centroids)[None]) ** 2).sum(axis=2), axis=1)
        total = d2.sum()
        if total == 0:
            centroids.append(points[rng.integers(n)])
        else:
            centroids.append(points[rng.choice(n, p=d2 / total)])
    return np.array(centroids)


def lloyd(points, init, max_iters=300) -> ClusterModel:
    """Lloyd iterations from explicit initial centroids."""
    points = np.asarray(points, dtype=np.float64)
    centroids = np.array(init, dtype=np.float64)
    k = len(centroids)
    labels = None
    it = 0
    for it in range(1, max_iters + 1):
        new_labels, d2 = _assign(points, centroids)
        # empty cluster: move its centroid onto the worst-served point
        for c in range(k):
            if not np.any(new_labels == c):
                far = int(np.argmax(d2))
                centroids[c] = points[far]
                new_labels, d2 = _assign(points, centroids)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        centroids = np.array([points[labels == c].mean(axis=0) for c in range(k)])
    labels, d2 = _assign(points, centroids)
    return ClusterModel(k, centroids, labels, float(d2.sum()), it)


def kmeans(points, k, seed=0, max_iters=300, restarts=1) -> ClusterModel:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or len(points) == 0:
        raise DomainError("points must be a non-empty [N, d] array")
    if not (1 <= k <= len(points)):
        raise DomainError(f"k={k} must be in [1, {len(points)}]")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, restarts)):
        model = lloyd(points, _plus_plus(points, k, rng), max_iters)
        if best is None or model.distortion < best.distortion:
            best = model
    return best


def elbow_distortions(points, k_range, seed=0, restarts=5, max_iters=300):
    """Best-of-restarts distortion for each k.

    Each k also tries the best (k-1) solution extended by the worst-served
    point, so the returned curve can never increase with k.
    """
    points = np.asarray(points, dtype=np.float64)
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ConfigError("empty k range")
    if ks[0] < 1 or ks[-1] > len(points):
        raise ConfigError(f"k range must lie within [1, {len(points)}]")
    rng = np.random.default_rng(seed)
    out = []
    prev = None
    for k in range(1, ks[-1] + 1):
        best = None
        for _ in range(restarts):
            model = lloyd(points, _plus_plus(points, k, rng), max_iters)
            if best is None or model.distortion < best.distortion:
                best = model
        if prev is not None:
            _, d2 = _assign(points, prev.centroids)
            nested = lloyd(points, np.vstack([prev.centroids, points[int(np.argmax(d2))]]), max_iters)
            if nested.distortion < best.distortion:
                best = nested
        prev = best
        if k in ks:
            out.append((k, best.distortion))
    return out


def elbow_knee(curve):
    """k just before the smallest relative improvement flattens out.

    Picks the k maximizing the drop-ratio (D[k-1]-D[k]) / (D[k]-D[k+1]).
    """
    ks = [k for k, _ in curve]
    d = [v for _, v in curve]
    best_k, best_score = ks[0], -np.inf
    for i in range(1, len(d) - 1):
        before = d[i - 1] - d[i]
        after = d[i] - d[i + 1]
        score = before / after if after > 0 else np.inf
        if score > best_score:
            best_k, best_score = ks[i], score
    return best_k


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull_indices(points) -> list:
    """Counter-clockwise hull vertex indices (monotone chain), collinear points dropped."""
    pts = np.asarray(points, dtype=np.float64)
    order = sorted(range(len(pts)), key=lambda i: (pts[i, 0], pts[i, 1]))
    # drop exact duplicates, keeping the first index
    uniq = []
    for i in order:
        if not uniq or not np.array_equal(pts[i], pts[uniq[-1]]):
            uniq.append(i)
    if len(uniq) <= 2:
        return uniq
    lower, upper = [], []
    for i in uniq:
        while len(lower) >= 2 and _cross(pts[lower[-2]], pts[lower[-1]], pts[i]) <= 0:
            lower.pop()
        lower.append(i)
    for i in reversed(uniq):
        while len(upper) >= 2 and _cross(pts[upper[-2]], pts[upper[-1]], pts[i]) <= 0:
            upper.pop()
        upper.append(i)
    return lower[:-1] + upper[:-1]


def convex_hull(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    return pts[convex_hull_indices(pts)]


@dataclass
class PartitionManifest:
    labels: dict  # record id -> label
    rationale: dict  # record id -> tag
    boundary: list  # hull polygon in (log10 PGA, log10 disp)
    clusters: dict = field(default_factory=dict)  # record id -> cluster index
    k: int = 0
    elbow: list = field(default_factory=list)

    def ids(self, label):
        return sorted(r for r, lab in self.labels.items() if lab == label)

    def counts(self):
        return {lab: len(self.ids(lab)) for lab in LABELS}

    def to_json(self) -> str:
        doc = {
            "labels": dict(sorted(self.labels.items())),
            "rationale": dict(sorted(self.rationale.items())),
            "boundary": [[float(a), float(b)] for a, b in self.boundary],
            "clusters": dict(sorted(self.clusters.items())),
            "k": self.k,
            "elbow": [[int(k), float(d)] for k, d in self.elbow],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "PartitionManifest":
        doc = json.loads(text)
        return cls(doc["labels"], doc["rationale"], [tuple(p) for p in doc["boundary"]],
                   {k: int(v) for k, v in doc.get("clusters", {}).items()}, int(doc.get("k", 0)),
                   [tuple(e) for e in doc.get("elbow", [])])


def select_partition(features, k=4, n_validation=4, boundary_threshold=1.0, seed=0,
                     restarts=10) -> PartitionManifest:
    """Split records into training / validation / prediction sets.

    ``boundary_threshold`` is a peak displacement in cm; records above it are
    prediction-only. ``k`` is clamped to the number of in-boundary records.
    """
    features = sorted(features, key=lambda f: f.record_id)
    if not features:
        raise PartitionError("no records to partition")
    labels, rationale, clusters = {}, {}, {}
    inside = []
    for f in features:
        if f.peak_disp > boundary_threshold:
            labels[f.record_id] = "prediction"
            rationale[f.record_id] = "out-of-boundary"
        else:
            inside.append(f)
    if not inside:
        raise PartitionError("every record lies outside the boundary of interest")

    raw = np.array([f.coords for f in inside])
    std = raw.std(axis=0)
    z = (raw - raw.mean(axis=0)) / np.where(std > 0, std, 1.0)
    hull = convex_hull_indices(z)
    k = min(k, len(inside))
    model = kmeans(z, k, seed=seed, restarts=restarts)

    training = set()
    for i in hull:
        training.add(i)
        rationale[inside[i].record_id] = "hull-point"
    for c in range(k):
        members = np.flatnonzero(model.labels == c)
        d2 = ((z[members] - model.centroids[c]) ** 2).sum(axis=1)
        i = int(members[np.argmin(d2)])
        if i not in training:
            training.add(i)
            rationale[inside[i].record_id] = "centroid-nearest"
    for i, f in enumerate(inside):
        clusters[f.record_id] = int(model.labels[i])
        if i in training:
            labels[f.record_id] = "training"

    # validation: one at a time from whichever cluster has most candidates left
    rng = np.random.default_rng(seed)
    pool = {c: [i for i in np.flatnonzero(model.labels == c) if i not in training] for c in range(k)}
    for _ in range(n_validation):
        c = max(range(k), key=lambda c: (len(pool[c]), -c))
        if not pool[c]:
            break
        i = pool[c].pop(int(rng.integers(len(pool[c]))))
        labels[inside[i].record_id] = "validation"
        rationale[inside[i].record_id] = "cluster-sampled"
    for f in inside:
        if f.record_id not in labels:
            labels[f.record_id] = "prediction"
            rationale[f.record_id] = "remainder"

    boundary = [tuple(raw[i]) for i in hull]
    return PartitionManifest(labels, rationale, boundary, clusters, k)


def random_partition(record_ids, n_train, n_validation=0, seed=0) -> PartitionManifest:
    """Uniformly random split, as used for the synthetic benchmarks."""
    ids = sorted(record_ids)
    if n_train + n_validation > len(ids):
        raise PartitionError(f"cannot draw {n_train}+{n_validation} records from {len(ids)}")
    perm = np.random.default_rng(seed).permutation(len(ids))
    labels, rationale = {}, {}
    for rank, i in enumerate(perm):
        rid = ids[i]
        if rank < n_train:
            labels[rid], rationale[rid] = "training", "random"
        elif rank < n_train + n_validation:
            labels[rid], rationale[rid] = "validation", "random"
        else:
            labels[rid], rationale[rid] = "prediction", "random"
    return PartitionManifest(labels, rationale, [])
