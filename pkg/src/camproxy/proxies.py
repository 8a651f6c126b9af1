"""Split camera-agnostic clusters into per-camera proxies and mine proxy sets.

A proxy is one populated (cluster, camera) pair.  Proxies are labeled
per camera, contiguously from 0 and ordered by ascending cluster ID; the
global proxy index of instance i is ``camera_offsets[c_i - 1] + z_i``.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .data import OUTLIER, ClusterAssignment, FeatureDataset, ProxyLabeling


def split_by_camera(assignment: ClusterAssignment, dataset: FeatureDataset) -> ProxyLabeling:
    """One proxy per populated (cluster, camera) pair; outliers keep -1."""
    n = assignment.num_instances
    if n != dataset.num_instances:
        raise ValueError(
            f"assignment covers {n} instances but dataset has {dataset.num_instances}"
        )
    labels = assignment.labels
    cams = dataset.camera_ids
    num_cams = dataset.num_cameras

    cluster_of_proxy: list[int] = []
    camera_of_proxy: list[int] = []
    per_camera_label: list[int] = []
    per_camera_counts = np.zeros(num_cams, dtype=np.int64)
    per_camera_image_counts = np.zeros(num_cams, dtype=np.int64)
    proxy_of_instance = np.full(n, OUTLIER, dtype=np.int64)

    clustered = labels >= 0
    next_global = 0
    offsets = np.zeros(num_cams, dtype=np.int64)
    for cam in range(1, num_cams + 1):
        offsets[cam - 1] = next_global
        in_cam = clustered & (cams == cam)
        per_camera_image_counts[cam - 1] = int(np.count_nonzero(in_cam))
        cam_clusters = np.unique(labels[in_cam])
        per_camera_counts[cam - 1] = cam_clusters.size
        for z, y in enumerate(cam_clusters):
            cluster_of_proxy.append(int(y))
            camera_of_proxy.append(cam)
            per_camera_label.append(z)
            proxy_of_instance[in_cam & (labels == y)] = next_global
            next_global += 1

    return ProxyLabeling(
        proxy_of_instance=proxy_of_instance,
        cluster_of_proxy=np.array(cluster_of_proxy, dtype=np.int64),
        camera_of_proxy=np.array(camera_of_proxy, dtype=np.int64),
        per_camera_label=np.array(per_camera_label, dtype=np.int64),
        camera_offsets=offsets,
        per_camera_counts=per_camera_counts,
        per_camera_image_counts=per_camera_image_counts,
    )


def cluster_labeling(assignment: ClusterAssignment) -> ProxyLabeling:
    """Degenerate single-camera labeling where each proxy is a whole cluster.

    Backs the cluster-level memory of the baseline pipeline (Z = Y).
    """
    y = assignment.num_clusters
    return ProxyLabeling(
        proxy_of_instance=assignment.labels.copy(),
        cluster_of_proxy=np.arange(y, dtype=np.int64),
        camera_of_proxy=np.ones(y, dtype=np.int64),
        per_camera_label=np.arange(y, dtype=np.int64),
        camera_offsets=np.zeros(1, dtype=np.int64),
        per_camera_counts=np.array([y], dtype=np.int64),
        per_camera_image_counts=np.array([assignment.num_clustered], dtype=np.int64),
    )


def positive_set(labeling: ProxyLabeling, instance: int) -> np.ndarray:
    """Proxies sharing the instance's cluster but living in other cameras.

    May be empty when the cluster spans a single camera; raises on outliers.
    """
    own = labeling.proxy_of_instance[instance]
    if own == OUTLIER:
        raise ValueError(f"instance {instance} is an outlier and has no positive set")
    cluster = labeling.cluster_of_proxy[own]
    camera = labeling.camera_of_proxy[own]
    mask = (labeling.cluster_of_proxy == cluster) & (labeling.camera_of_proxy != camera)
    return np.flatnonzero(mask)


def hard_negative_set(
    labeling: ProxyLabeling,
    memory,
    embedding: np.ndarray,
    instance: int,
    k: int,
) -> np.ndarray:
    """The k negative proxies most similar to the embedding, all cameras.

    Negatives are proxies of a different cluster; similarity is the inner
    product against the memory entries, ties broken by ascending proxy
    index.  Returns an ascending index array of size min(k, #negatives).
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    own = labeling.proxy_of_instance[instance]
    if own == OUTLIER:
        raise ValueError(f"instance {instance} is an outlier and has no negative set")
    cluster = labeling.cluster_of_proxy[own]
    negatives = np.flatnonzero(labeling.cluster_of_proxy != cluster)
    if k == 0 or negatives.size == 0:
        return np.empty(0, dtype=np.int64)
    sims = memory.entries[:, negatives].T @ np.asarray(embedding, dtype=np.float64)
    order = np.lexsort((negatives, -sims))
    return np.sort(negatives[order[:k]])


def save_labeling_csv(
    labeling: ProxyLabeling, dataset: FeatureDataset, assignment: ClusterAssignment, path: str | Path
) -> None:
    """Audit dump: one row per instance with cluster and proxy labels."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["key", "camera", "cluster", "proxy_global", "proxy_in_camera"])
        for i in range(dataset.num_instances):
            proxy = int(labeling.proxy_of_instance[i])
            in_cam = int(labeling.per_camera_label[proxy]) if proxy != OUTLIER else OUTLIER
            writer.writerow(
                [
                    dataset.instance_keys[i],
                    int(dataset.camera_ids[i]),
                    int(assignment.labels[i]),
                    proxy,
                    in_cam,
                ]
            )
