"""Shared test utilities: independent oracles, finite differences, small worlds."""

import math

import numpy as np

from camproxy.data import ClusterAssignment, FeatureDataset
from camproxy.memory import ProxyMemory
from camproxy.proxies import split_by_camera


def central_difference(fn, x, step=1e-5):
    """Central finite-difference gradient of scalar fn at x (in place probing)."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.ravel()
    gflat = grad.ravel()
    for t in range(flat.size):
        orig = flat[t]
        flat[t] = orig + step
        fp = fn(x)
        flat[t] = orig - step
        fm = fn(x)
        flat[t] = orig
        gflat[t] = (fp - fm) / (2.0 * step)
    return grad


def max_relative_error(analytic, numeric):
    """Infinity-norm relative error between two gradients."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-12)
    return float(np.abs(analytic - numeric).max() / scale)


def unit_rows(rng, count, dim):
    v = rng.standard_normal((count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def grid_world(rng, clusters=3, cameras=2, per_cell=2, dim=8, mu=0.2, tau=0.07):
    """Fully populated (cluster, camera) grid with a random unit memory.

    Returns (dataset, labeling, memory); every cell has ``per_cell``
    instances so Z = clusters * cameras.
    """
    labels = []
    cams = []
    for cam in range(1, cameras + 1):
        for y in range(clusters):
            labels += [y] * per_cell
            cams += [cam] * per_cell
    labels = np.array(labels)
    cams = np.array(cams)
    n = labels.size
    dataset = FeatureDataset(
        features=unit_rows(rng, n, dim),
        camera_ids=cams,
        instance_keys=tuple(f"i{t}" for t in range(n)),
    )
    assignment = ClusterAssignment(labels=labels, num_clusters=clusters)
    labeling = split_by_camera(assignment, dataset)
    entries = unit_rows(rng, labeling.num_proxies, dim).T
    memory = ProxyMemory(entries=entries, mu=mu, tau=tau)
    return dataset, labeling, memory


# ------------------------------------------------------------------ oracles
# Independent scalar/set-arithmetic references the implementations are
# checked against.  They deliberately avoid the library's code paths.

def euclidean_reference(x):
    n = x.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = math.sqrt(sum((x[i, t] - x[j, t]) ** 2 for t in range(x.shape[1])))
    return out


def knn_list_reference(dist, i, k):
    """Self first, then the k nearest others by (distance, index)."""
    n = dist.shape[0]
    others = sorted((dist[i, j], j) for j in range(n) if j != i)
    return [i] + [j for _, j in others[:k]]


def mutual_reference(dist, i, k):
    knn_i = knn_list_reference(dist, i, k)
    return sorted(j for j in knn_i if i in knn_list_reference(dist, j, k))


def expanded_reference(dist, i, k1):
    base = mutual_reference(dist, i, k1)
    base_set = set(base)
    out = set(base)
    for q in base:
        half = mutual_reference(dist, q, k1 // 2)
        if 3 * len(set(half) & base_set) >= 2 * len(half):
            out |= set(half)
    return out


def jaccard_reference(x, k1, k2):
    """Set-materialized evaluation of the min/max membership formula."""
    n = x.shape[0]
    dist = euclidean_reference(x)
    vectors = []
    for i in range(n):
        vectors.append({j: math.exp(-dist[i, j]) for j in expanded_reference(dist, i, k1)})
    expanded_vectors = []
    for i in range(n):
        neighborhood = knn_list_reference(dist, i, k2 - 1)[:k2]
        merged: dict[int, float] = {}
        for q in neighborhood:
            for key, val in vectors[q].items():
                merged[key] = merged.get(key, 0.0) + val / k2
        expanded_vectors.append(merged)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            keys = set(expanded_vectors[i]) | set(expanded_vectors[j])
            num = sum(min(expanded_vectors[i].get(t, 0.0), expanded_vectors[j].get(t, 0.0)) for t in keys)
            den = sum(max(expanded_vectors[i].get(t, 0.0), expanded_vectors[j].get(t, 0.0)) for t in keys)
            out[i, j] = 1.0 - num / den
    np.fill_diagonal(out, 0.0)
    return out


def dbscan_reference(dist, eps, min_pts):
    """Union-find over core-core edges; borders go to the earliest cluster."""
    n = dist.shape[0]
    within = dist <= eps
    core = within.sum(axis=1) >= min_pts
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        if not core[i]:
            continue
        for j in np.flatnonzero(within[i] & core):
            if j > i:
                parent[find(i)] = find(int(j))

    components: dict[int, list[int]] = {}
    for i in range(n):
        if core[i]:
            components.setdefault(find(i), []).append(i)
    ordered = sorted(components.values(), key=min)
    labels = np.full(n, -1, dtype=np.int64)
    for cid, members in enumerate(ordered):
        labels[members] = cid
    for i in range(n):
        if core[i] or labels[i] != -1:
            continue
        adjacent = labels[within[i] & core]
        if adjacent.size:
            labels[i] = adjacent.min()
    return labels, len(ordered)


def eval_reference(query, gallery, ks=(1, 5, 10)):
    """Scalar-loop CMC/mAP with the cross-camera exclusion protocol."""
    aps = []
    hits = {k: 0 for k in ks}
    for qi in range(query.num_instances):
        qf = query.features[qi] / np.linalg.norm(query.features[qi])
        sims = []
        for gi in range(gallery.num_instances):
            gf = gallery.features[gi] / np.linalg.norm(gallery.features[gi])
            sims.append(float(qf @ gf))
        order = sorted(range(gallery.num_instances), key=lambda j: (-sims[j], j))
        kept = [
            j
            for j in order
            if not (
                gallery.true_ids[j] == query.true_ids[qi]
                and gallery.camera_ids[j] == query.camera_ids[qi]
            )
        ]
        relevant = [gallery.true_ids[j] == query.true_ids[qi] for j in kept]
        if not any(relevant):
            continue
        found = 0
        precisions = []
        for rank, rel in enumerate(relevant, start=1):
            if rel:
                found += 1
                precisions.append(found / rank)
        aps.append(sum(precisions) / len(precisions))
        first = relevant.index(True)
        for k in ks:
            hits[k] += first < k
    return {
        "mAP": sum(aps) / len(aps),
        "rank": {k: hits[k] / len(aps) for k in ks},
        "count": len(aps),
    }
