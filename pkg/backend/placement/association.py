"""
UAV-CS association by K-Means over the CS horizontal positions.

The common UAV altitude adds the same H^2 to every squared distance, so
clustering in the horizontal plane gives the same assignment as clustering
with 3D distances.
"""
import logging
from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np
from sklearn.cluster import KMeans

logger = logging.getLogger(__name__)


@dataclass
class Association:
    clusters: tuple         # per UAV: sorted CS indices
    centroids: np.ndarray   # (U, 2)
    owner: np.ndarray       # (K,) serving UAV index
    inertia_trace: list = field(default_factory=list)
    iterations: int = 0

    @property
    def U(self):
        return len(self.clusters)

    @property
    def K(self):
        return len(self.owner)

    def to_dict(self):
        return {
            'clusters': [[int(k) for k in c] for c in self.clusters],
            'centroids': self.centroids.tolist(),
            'iterations': self.iterations,
        }


def within_cluster_ss(points, labels, centroids=None):
    """Sum of squared distances of every point to its cluster mean (or given centroid)."""
    points = np.asarray(points, dtype=float)
    total = 0.0
    for label in np.unique(labels):
        members = points[labels == label]
        center = members.mean(axis=0) if centroids is None else centroids[label]
        total += float(np.sum((members - center) ** 2))
    return total


def nearest_centroid(points, centroids):
    """Index of the closest centroid; equal distances go to the lowest index."""
    d2 = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
    return np.argmin(d2, axis=1)


def repair_empty_clusters(points, labels, centroids):
    """Move the CS farthest from its centroid into each empty cluster."""
    labels = labels.copy()
    centroids = centroids.copy()
    U = len(centroids)
    for _ in range(U):
        counts = np.bincount(labels, minlength=U)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            break
        target = int(empty[0])
        d2 = np.sum((points - centroids[labels]) ** 2, axis=1)
        movable = counts[labels] > 1
        d2[~movable] = -np.inf
        k = int(np.argmax(d2))
        logger.debug('cluster %d empty, moving CS %d into it', target, k)
        source = labels[k]
        labels[k] = target
        centroids[target] = points[k]
        centroids[source] = points[labels == source].mean(axis=0)
    return labels, centroids


def _lloyd(points, centroids, max_iter):
    """One-step KMeans fits until the centroids repeat; returns labels, centroids, inertia trace."""
    U = len(centroids)
    trace = []
    iterations = 0
    for iterations in range(1, max_iter + 1):
        model = KMeans(n_clusters=U, init=centroids, n_init=1, max_iter=1, algorithm='lloyd')
        model.fit(points)
        updated = model.cluster_centers_
        trace.append(float(model.inertia_))
        if np.allclose(updated, centroids, rtol=0.0, atol=1e-12):
            centroids = updated
            break
        centroids = updated

    labels = nearest_centroid(points, centroids)
    labels, centroids = repair_empty_clusters(points, labels, centroids)
    for u in range(U):
        centroids[u] = points[labels == u].mean(axis=0)
    return labels, centroids, trace, iterations


def kmeans_associate(cs_positions, U, seed=0, max_iter=100, init=None, restarts=20):
    """
    Cluster the CSs into U non-empty groups.

    Starts from ``init`` when given. Otherwise every choice of U distinct CS
    positions is tried when there are at most ``restarts`` of them, and
    ``restarts`` choices are drawn under ``seed`` when there are more. The
    partition with the smallest within-cluster sum of squares is kept
    (earliest on ties). Each start runs one Lloyd step at a time until the
    centroids repeat or ``max_iter`` steps.
    """
    points = np.asarray(cs_positions, dtype=float)
    K = len(points)
    if K < U:
        raise ValueError(f'cannot form {U} non-empty clusters from {K} CSs')
    if init is not None:
        starts = [np.asarray(init, dtype=float).reshape(U, 2)]
    else:
        restarts = max(restarts, 1)
        if comb(K, U) <= restarts:
            starts = [points[list(chosen)] for chosen in combinations(range(K), U)]
        else:
            rng = np.random.default_rng(seed)
            starts = [points[np.sort(rng.choice(K, size=U, replace=False))] for _ in range(restarts)]

    best = None
    for centroids in starts:
        labels, centroids, trace, iterations = _lloyd(points, centroids.copy(), max_iter)
        score = within_cluster_ss(points, labels, centroids)
        if best is None or score < best[0] - 1e-9:
            best = (score, labels, centroids, trace, iterations)
    _, labels, centroids, trace, iterations = best

    clusters = tuple(np.flatnonzero(labels == u) for u in range(U))
    return Association(
        clusters=clusters,
        centroids=centroids,
        owner=labels.astype(int),
        inertia_trace=trace,
        iterations=iterations,
    )


def association_from_clusters(clusters, cs_positions):
    """Build an Association from explicit clusters (centroids = cluster means)."""
    points = np.asarray(cs_positions, dtype=float)
    owner = np.full(len(points), -1, dtype=int)
    for u, cluster in enumerate(clusters):
        owner[list(cluster)] = u
    centroids = np.stack([points[list(c)].mean(axis=0) for c in clusters])
    return Association(
        clusters=tuple(np.array(sorted(c), dtype=int) for c in clusters),
        centroids=centroids,
        owner=owner,
    )
