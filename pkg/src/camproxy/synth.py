"""Synthetic camera-shifted feature generator with train/query/gallery splits.

Each identity has a center on a sphere of radius ``id_separation``; every
camera adds a fixed offset vector of magnitude ``camera_shift``; instances
are unit-normalized sums of center, offset, and Gaussian noise.  With
``camera_shift`` well above ``noise_sigma`` the instances of one identity
gather into per-camera sub-clusters, which is exactly the structure the
camera-aware proxy pipeline is built to absorb.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import FeatureDataset


@dataclass(frozen=True)
class SynthSpec:
    num_ids: int = 100
    num_cameras: int = 4
    images_per_id_per_camera: tuple[int, int] = (6, 10)
    d_in: int = 16
    id_separation: float = 1.0
    camera_shift: float = 0.7
    noise_sigma: float = 0.08
    missing_camera_prob: float | tuple[float, ...] = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.num_ids < 2:
            raise ValueError("need at least 2 identities")
        if self.num_cameras < 1:
            raise ValueError("need at least 1 camera")
        lo, hi = self.images_per_id_per_camera
        if lo < 1 or hi < lo:
            raise ValueError("images_per_id_per_camera must be a nonempty count range")
        if self.d_in < 2:
            raise ValueError("d_in must be >= 2")
        for name in ("id_separation", "camera_shift", "noise_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        probs = self.missing_prob_per_camera()
        if any(pr < 0 or pr > 1 for pr in probs):
            raise ValueError("missing_camera_prob values must lie in [0, 1]")

    def missing_prob_per_camera(self) -> tuple[float, ...]:
        """Cell-emptiness probability for each camera (scalar broadcasts)."""
        if isinstance(self.missing_camera_prob, (int, float)):
            return (float(self.missing_camera_prob),) * self.num_cameras
        probs = tuple(float(p) for p in self.missing_camera_prob)
        if len(probs) != self.num_cameras:
            raise ValueError("per-camera missing_camera_prob needs one value per camera")
        return probs


def _unit_rows(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    vecs = rng.standard_normal((count, dim))
    return vecs / np.linalg.norm(vecs, axis=1, keepdims=True)


def generate(spec: SynthSpec) -> tuple[FeatureDataset, FeatureDataset, FeatureDataset]:
    """Return disjoint (train, query, gallery) datasets with true IDs.

    Per populated (identity, camera) cell of size m: one instance goes to the
    query set (when the identity spans at least two cameras), max(1, m // 4)
    to the gallery, and the remainder to the training set.  Identities seen
    by a single camera contribute to the gallery only, never the query set.
    """
    rng = np.random.default_rng(spec.seed)
    centers = spec.id_separation * _unit_rows(rng, spec.num_ids, spec.d_in)
    offsets = spec.camera_shift * _unit_rows(rng, spec.num_cameras, spec.d_in)

    lo, hi = spec.images_per_id_per_camera
    missing = spec.missing_prob_per_camera()
    cells: dict[int, list[tuple[int, np.ndarray]]] = {}
    for ident in range(spec.num_ids):
        cams_present: list[tuple[int, np.ndarray]] = []
        for cam in range(spec.num_cameras):
            if missing[cam] > 0 and rng.random() < missing[cam]:
                continue
            count = int(rng.integers(lo, hi + 1))
            noise = spec.noise_sigma * rng.standard_normal((count, spec.d_in))
            raw = centers[ident] + offsets[cam] + noise
            feats = raw / np.linalg.norm(raw, axis=1, keepdims=True)
            cams_present.append((cam, feats))
        cells[ident] = cams_present

    splits = {name: {"f": [], "c": [], "k": [], "t": []} for name in ("train", "query", "gallery")}

    def push(split: str, ident: int, cam: int, local: int, vec: np.ndarray) -> None:
        bucket = splits[split]
        bucket["f"].append(vec)
        bucket["c"].append(cam + 1)
        bucket["k"].append(f"id{ident:04d}_c{cam + 1}_{local:02d}")
        bucket["t"].append(ident)

    for ident, cams_present in cells.items():
        multi_camera = len(cams_present) >= 2
        for cam, feats in cams_present:
            m = feats.shape[0]
            num_query = 1 if multi_camera and m >= 1 else 0
            num_gallery = max(1, m // 4) if m > num_query else 0
            for j in range(m):
                if j < num_query:
                    split = "query"
                elif j < num_query + num_gallery:
                    split = "gallery"
                else:
                    split = "train"
                push(split, ident, cam, j, feats[j])

    out = []
    for name in ("train", "query", "gallery"):
        bucket = splits[name]
        feats = (
            np.array(bucket["f"]) if bucket["f"] else np.empty((0, spec.d_in))
        )
        out.append(
            FeatureDataset(
                features=feats,
                camera_ids=np.array(bucket["c"], dtype=np.int64),
                instance_keys=tuple(bucket["k"]),
                true_ids=np.array(bucket["t"], dtype=np.int64),
            )
        )
    return out[0], out[1], out[2]
