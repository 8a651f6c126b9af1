"""Density-based clustering over a precomputed distance matrix."""

from __future__ import annotations

from collections import deque

import numpy as np

from .data import OUTLIER, ClusterAssignment
from .metric import DistanceMatrix


def dbscan(dist: DistanceMatrix, eps: float, min_pts: int) -> ClusterAssignment:
    """Cluster on precomputed distances.

    A core point has at least ``min_pts`` neighbors within ``eps`` (itself
    included).  Clusters are maximal density-connected sets; cluster IDs
    follow the order in which their first core point is met by an ascending
    index scan, and a border point reachable from several clusters goes to
    the one discovered first.  Unreachable non-core points are labeled -1.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if min_pts < 1:
        raise ValueError(f"min_pts must be >= 1, got {min_pts}")
    n = dist.num_instances
    within = dist.values <= eps
    core = within.sum(axis=1) >= min_pts

    labels = np.full(n, OUTLIER, dtype=np.int64)
    cluster_id = 0
    for start in range(n):
        if not core[start] or labels[start] != OUTLIER:
            continue
        labels[start] = cluster_id
        queue = deque([start])
        while queue:
            p = queue.popleft()
            for q in np.flatnonzero(within[p]):
                if labels[q] == OUTLIER:
                    labels[q] = cluster_id
                    if core[q]:
                        queue.append(q)
        cluster_id += 1
    return ClusterAssignment(labels=labels, num_clusters=cluster_id)


def filter_reliable(assignment: ClusterAssignment, min_cluster_size: int) -> ClusterAssignment:
    """Dissolve clusters smaller than ``min_cluster_size`` into outliers.

    Surviving cluster IDs are re-compacted to {0..Y-1} in ascending order of
    their old IDs; no instance moves to a different surviving cluster.
    """
    if min_cluster_size < 1:
        raise ValueError(f"min_cluster_size must be >= 1, got {min_cluster_size}")
    labels = assignment.labels.copy()
    if assignment.num_clusters == 0:
        return ClusterAssignment(labels=labels, num_clusters=0)
    sizes = np.bincount(labels[labels >= 0], minlength=assignment.num_clusters)
    keep = sizes >= min_cluster_size
    remap = np.full(assignment.num_clusters, OUTLIER, dtype=np.int64)
    remap[keep] = np.arange(int(keep.sum()))
    clustered = labels >= 0
    labels[clustered] = remap[labels[clustered]]
    return ClusterAssignment(labels=labels, num_clusters=int(keep.sum()))
