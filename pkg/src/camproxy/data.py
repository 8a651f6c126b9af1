"""Core data model: feature datasets, label structures, and their on-disk formats.

Two interchangeable dataset formats are supported:

CSV
    Header ``key,camera,f0,f1,...,f{d-1}[,true_id]``, one instance per row,
    UTF-8, ``.`` decimal separator.

Binary
    Magic ``CAPD``, version u32, then N, d_in, C as u64 little-endian,
    row-major float64 features, camera IDs as i64, a one-byte true-ID
    presence flag followed by i64 true IDs when present, and finally the
    instance keys as length-prefixed UTF-8 strings.

Ground-truth IDs ride along for evaluation only; no training operation in
this package accepts them.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DATASET_MAGIC = b"CAPD"
BINARY_VERSION = 1

OUTLIER = -1


class LoadError(Exception):
    """A dataset file is malformed or fails validation."""


def l2_normalize_rows(m: np.ndarray) -> np.ndarray:
    """Scale every row of ``m`` to unit Euclidean norm.

    Raises ValueError naming the first zero-norm row.
    """
    m = np.asarray(m, dtype=np.float64)
    norms = np.linalg.norm(m, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValueError(f"row {zero[0]} has zero norm and cannot be normalized")
    return m / norms[:, None]


@dataclass(frozen=True)
class FeatureDataset:
    """N instance feature vectors with camera IDs and optional ground truth.

    ``camera_ids`` are 1-based; loaders re-index raw camera values to the
    contiguous range {1..C}. ``true_ids`` are evaluation-only metadata.
    """

    features: np.ndarray
    camera_ids: np.ndarray
    instance_keys: tuple[str, ...]
    true_ids: np.ndarray | None = None

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        cams = np.ascontiguousarray(self.camera_ids, dtype=np.int64)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "camera_ids", cams)
        object.__setattr__(self, "instance_keys", tuple(self.instance_keys))
        if self.true_ids is not None:
            tid = np.ascontiguousarray(self.true_ids, dtype=np.int64)
            object.__setattr__(self, "true_ids", tid)
        # N = 0 is allowed in memory (e.g. a degenerate split with no
        # feasible queries); the file loaders reject empty datasets.
        if feats.ndim != 2 or feats.shape[1] < 2:
            raise ValueError(f"features must be N x d with d>=2, got shape {feats.shape}")
        n = feats.shape[0]
        if not np.all(np.isfinite(feats)):
            raise ValueError("features contain non-finite values")
        if cams.shape != (n,):
            raise ValueError("camera_ids length does not match feature count")
        if cams.min(initial=1) < 1:
            raise ValueError("camera IDs must be >= 1")
        if len(self.instance_keys) != n:
            raise ValueError("instance_keys length does not match feature count")
        if self.true_ids is not None and self.true_ids.shape != (n,):
            raise ValueError("true_ids length does not match feature count")
        for arr in (feats, cams, self.true_ids):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def num_instances(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_cameras(self) -> int:
        return int(self.camera_ids.max()) if self.camera_ids.size else 0

    def equals(self, other: "FeatureDataset") -> bool:
        """Field-for-field equality (exact array comparison)."""
        if self.instance_keys != other.instance_keys:
            return False
        if not np.array_equal(self.features, other.features):
            return False
        if not np.array_equal(self.camera_ids, other.camera_ids):
            return False
        if (self.true_ids is None) != (other.true_ids is None):
            return False
        if self.true_ids is not None and not np.array_equal(self.true_ids, other.true_ids):
            return False
        return True


@dataclass(frozen=True)
class ClusterAssignment:
    """Camera-agnostic pseudo labels; -1 marks an outlier."""

    labels: np.ndarray
    num_clusters: int

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        y = self.num_clusters
        if labels.ndim != 1:
            raise ValueError("labels must be a 1-D array")
        if labels.min(initial=0) < OUTLIER or (labels.size and labels.max() >= y):
            raise ValueError("labels must lie in {-1} U {0..num_clusters-1}")
        present = np.unique(labels[labels >= 0])
        if present.size != y:
            raise ValueError("every cluster ID in {0..Y-1} must appear at least once")
        labels.setflags(write=False)

    @property
    def num_instances(self) -> int:
        return self.labels.shape[0]

    @property
    def num_clustered(self) -> int:
        return int(np.count_nonzero(self.labels >= 0))

    @property
    def num_outliers(self) -> int:
        return int(np.count_nonzero(self.labels == OUTLIER))


@dataclass(frozen=True)
class ProxyLabeling:
    """Camera-aware proxy labels: one proxy per populated (cluster, camera) pair.

    The global index of instance i is ``camera_offsets[c_i - 1] + per-camera
    label of i``; outliers carry -1.  ``per_camera_image_counts`` counts the
    clustered instances of each camera.
    """

    proxy_of_instance: np.ndarray
    cluster_of_proxy: np.ndarray
    camera_of_proxy: np.ndarray
    per_camera_label: np.ndarray
    camera_offsets: np.ndarray
    per_camera_counts: np.ndarray
    per_camera_image_counts: np.ndarray

    def __post_init__(self):
        for name in (
            "proxy_of_instance",
            "cluster_of_proxy",
            "camera_of_proxy",
            "per_camera_label",
            "camera_offsets",
            "per_camera_counts",
            "per_camera_image_counts",
        ):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        z = self.cluster_of_proxy.shape[0]
        if self.camera_of_proxy.shape[0] != z or self.per_camera_label.shape[0] != z:
            raise ValueError("per-proxy arrays must share length Z")
        c = self.camera_offsets.shape[0]
        if self.per_camera_counts.shape[0] != c or self.per_camera_image_counts.shape[0] != c:
            raise ValueError("per-camera arrays must share length C")
        if int(self.per_camera_counts.sum()) != z:
            raise ValueError("per-camera proxy counts must sum to Z")

    @property
    def num_instances(self) -> int:
        return self.proxy_of_instance.shape[0]

    @property
    def num_proxies(self) -> int:
        return self.cluster_of_proxy.shape[0]

    @property
    def num_cameras(self) -> int:
        return self.camera_offsets.shape[0]

    @property
    def num_clusters(self) -> int:
        return int(self.cluster_of_proxy.max()) + 1 if self.num_proxies else 0

    def proxy_members(self) -> list[np.ndarray]:
        """Instance indices of each proxy, ascending, one array per proxy."""
        order = np.argsort(self.proxy_of_instance, kind="stable")
        labels = self.proxy_of_instance[order]
        start = np.searchsorted(labels, 0)
        clustered = order[start:]
        bounds = np.searchsorted(labels[start:], np.arange(self.num_proxies + 1))
        return [np.sort(clustered[bounds[z]:bounds[z + 1]]) for z in range(self.num_proxies)]


def _reindex_cameras(raw: np.ndarray) -> np.ndarray:
    """Map raw camera values to contiguous {1..C} preserving value order."""
    uniq = np.unique(raw)
    return np.searchsorted(uniq, raw) + 1


def save_dataset(dataset: FeatureDataset, path: str | Path, format: str = "csv") -> None:
    if format == "csv":
        _save_csv(dataset, Path(path))
    elif format == "binary":
        _save_binary(dataset, Path(path))
    else:
        raise ValueError(f"unknown dataset format {format!r}")


def load_dataset(path: str | Path, format: str = "csv") -> FeatureDataset:
    """Load and validate a dataset; camera IDs are re-indexed to {1..C}."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if format == "csv":
        return _load_csv(path)
    if format == "binary":
        return _load_binary(path)
    raise ValueError(f"unknown dataset format {format!r}")


def _save_csv(dataset: FeatureDataset, path: Path) -> None:
    d = dataset.dim
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["key", "camera"] + [f"f{i}" for i in range(d)]
        if dataset.true_ids is not None:
            header.append("true_id")
        writer.writerow(header)
        for i in range(dataset.num_instances):
            row = [dataset.instance_keys[i], str(int(dataset.camera_ids[i]))]
            row += [repr(float(v)) for v in dataset.features[i]]
            if dataset.true_ids is not None:
                row.append(str(int(dataset.true_ids[i])))
            writer.writerow(row)


def _load_csv(path: Path) -> FeatureDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise LoadError("empty file: missing header") from None
        if len(header) < 4 or header[0] != "key" or header[1] != "camera":
            raise LoadError("header must start with key,camera,f0,...")
        has_true = header[-1] == "true_id"
        d = len(header) - 2 - (1 if has_true else 0)
        expected = [f"f{i}" for i in range(d)]
        if header[2:2 + d] != expected:
            raise LoadError("feature columns must be named f0..f{d-1} in order")

        keys: list[str] = []
        cams: list[int] = []
        feats: list[list[float]] = []
        tids: list[int] = []
        for idx, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise LoadError(f"row {idx}: expected {len(header)} fields, got {len(row)}")
            keys.append(row[0])
            try:
                cams.append(int(row[1]))
            except ValueError:
                raise LoadError(f"row {idx}: camera {row[1]!r} is not an integer") from None
            try:
                values = [float(v) for v in row[2:2 + d]]
            except ValueError:
                raise LoadError(f"row {idx}: malformed feature value") from None
            if not all(math.isfinite(v) for v in values):
                raise LoadError(f"row {idx}: non-finite feature value")
            feats.append(values)
            if has_true:
                try:
                    tids.append(int(row[-1]))
                except ValueError:
                    raise LoadError(f"row {idx}: true_id {row[-1]!r} is not an integer") from None
        if not keys:
            raise LoadError("file contains no data rows")
    return FeatureDataset(
        features=np.array(feats, dtype=np.float64),
        camera_ids=_reindex_cameras(np.array(cams, dtype=np.int64)),
        instance_keys=tuple(keys),
        true_ids=np.array(tids, dtype=np.int64) if has_true else None,
    )


def _save_binary(dataset: FeatureDataset, path: Path) -> None:
    n, d = dataset.features.shape
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(struct.pack("<I", BINARY_VERSION))
        fh.write(struct.pack("<QQQ", n, d, dataset.num_cameras))
        fh.write(dataset.features.astype("<f8").tobytes())
        fh.write(dataset.camera_ids.astype("<i8").tobytes())
        fh.write(struct.pack("<B", 1 if dataset.true_ids is not None else 0))
        if dataset.true_ids is not None:
            fh.write(dataset.true_ids.astype("<i8").tobytes())
        for key in dataset.instance_keys:
            raw = key.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)


def _read_exact(fh, count: int, what: str) -> bytes:
    raw = fh.read(count)
    if len(raw) != count:
        raise LoadError(f"truncated file while reading {what}")
    return raw


def _load_binary(path: Path) -> FeatureDataset:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != DATASET_MAGIC:
            raise LoadError("bad magic: not a CAPD dataset file")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != BINARY_VERSION:
            raise LoadError(f"unsupported CAPD version {version}")
        n, d, _c = struct.unpack("<QQQ", _read_exact(fh, 24, "dimensions"))
        feats = np.frombuffer(_read_exact(fh, 8 * n * d, "features"), dtype="<f8").reshape(n, d)
        cams = np.frombuffer(_read_exact(fh, 8 * n, "camera IDs"), dtype="<i8")
        (has_true,) = struct.unpack("<B", _read_exact(fh, 1, "true-ID flag"))
        tids = None
        if has_true:
            tids = np.frombuffer(_read_exact(fh, 8 * n, "true IDs"), dtype="<i8")
        keys = []
        for i in range(n):
            (klen,) = struct.unpack("<I", _read_exact(fh, 4, f"key length {i}"))
            keys.append(_read_exact(fh, klen, f"key {i}").decode("utf-8"))
    bad = np.flatnonzero(~np.all(np.isfinite(feats), axis=1))
    if bad.size:
        raise LoadError(f"row {bad[0] + 1}: non-finite feature value")
    return FeatureDataset(
        features=feats.copy(),
        camera_ids=_reindex_cameras(cams.copy()),
        instance_keys=tuple(keys),
        true_ids=tids.copy() if tids is not None else None,
    )
