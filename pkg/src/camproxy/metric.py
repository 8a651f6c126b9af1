"""Pairwise distances and the mutual-neighbor Jaccard distance fed to clustering.

The Jaccard distance is computed from Gaussian-weighted membership vectors
over expanded mutual-kNN sets, with local query expansion over the k2
nearest neighbors.  All neighbor lists order ties by ascending index, and
each instance is always a member of its own kNN list.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import LoadError, _read_exact

MATRIX_MAGIC = b"CAPM"
MATRIX_VERSION = 1

_KINDS = ("euclidean", "jaccard")


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric nonnegative N x N distance matrix with a zero diagonal."""

    values: np.ndarray
    kind: str

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.kind not in _KINDS:
            raise ValueError(f"unknown distance kind {self.kind!r}")
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise ValueError("distance matrix must be square")

    @property
    def num_instances(self) -> int:
        return self.values.shape[0]

    def validate(self, atol: float = 1e-9) -> None:
        """Check symmetry, zero diagonal, bounds, and finiteness."""
        v = self.values
        if not np.all(np.isfinite(v)):
            raise ValueError("distance matrix contains non-finite entries")
        if v.size and v.min() < 0:
            raise ValueError("distance matrix contains negative entries")
        if np.abs(np.diag(v)).max(initial=0.0) > atol:
            raise ValueError("distance matrix diagonal is not zero")
        if np.abs(v - v.T).max(initial=0.0) > atol:
            raise ValueError("distance matrix is not symmetric")
        if self.kind == "jaccard" and v.size and v.max() > 1.0 + atol:
            raise ValueError("jaccard distances must be <= 1")


def pairwise_euclidean(features: np.ndarray, normalized: bool = False) -> DistanceMatrix:
    """All-pairs Euclidean distances.

    With ``normalized`` the rows are assumed unit-norm and the squared
    distances are taken as 2 - 2 cos.
    """
    x = np.asarray(features, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("features contain non-finite values")
    gram = x @ x.T
    if normalized:
        sq = 2.0 - 2.0 * gram
    else:
        norms = np.einsum("ij,ij->i", x, x)
        sq = norms[:, None] + norms[None, :] - 2.0 * gram
    np.maximum(sq, 0.0, out=sq)
    dist = np.sqrt(sq)
    dist = 0.5 * (dist + dist.T)
    np.fill_diagonal(dist, 0.0)
    return DistanceMatrix(values=dist, kind="euclidean")


def _ranked_neighbors(values: np.ndarray, m: int) -> np.ndarray:
    """Per-row indices of self followed by the m-1 nearest others.

    Ties are broken by ascending index, including ties that straddle the
    selection boundary; the own row always ranks first.
    """
    n = values.shape[0]
    work = values.copy()
    np.fill_diagonal(work, -1.0)  # forces self to the head of every list
    if m >= n:
        cols = np.broadcast_to(np.arange(n), (n, n))
    else:
        part = np.argpartition(work, m - 1, axis=1)[:, :m]
        boundary = np.take_along_axis(work, part, axis=1).max(axis=1, keepdims=True)
        below = work < boundary
        at = work == boundary
        slots = m - below.sum(axis=1, keepdims=True)
        selected = below | (at & (np.cumsum(at, axis=1) <= slots))
        cols = np.nonzero(selected)[1].reshape(n, m)
    vals = np.take_along_axis(work, cols, axis=1)
    order = np.lexsort((cols, vals), axis=1)[:, :m]
    return np.take_along_axis(cols, order, axis=1)


def _mutual_sets(ranked: np.ndarray, n: int) -> list[np.ndarray]:
    """R(i) = {j in kNN(i) : i in kNN(j)} from ranked neighbor lists."""
    member = np.zeros((n, n), dtype=bool)
    rows = np.repeat(np.arange(n), ranked.shape[1])
    member[rows, ranked.ravel()] = True
    return [row[member[row, i]] for i, row in enumerate(ranked)]


def k_reciprocal_sets(dist: DistanceMatrix, k1: int) -> list[np.ndarray]:
    """Expanded mutual-kNN sets R*(i, k1), one ascending index array per row.

    The base set R(i) keeps the mutual members of the (k1+1)-long kNN lists
    (self included).  R(i) is then expanded with R(q, floor(k1/2)) for every
    q in R(i) whose half-set overlaps R(i) in at least two thirds of its
    size.
    """
    n = dist.num_instances
    if not 1 <= k1 < n:
        raise ValueError(f"k1 must satisfy 1 <= k1 < N, got k1={k1}, N={n}")
    values = dist.values
    return _expanded_from_ranked(values, _ranked_neighbors(values, k1 + 1), k1)


def jaccard_distance(features: np.ndarray, k1: int = 30, k2: int = 6) -> DistanceMatrix:
    """Jaccard distance over expanded mutual-kNN membership vectors.

    Membership vectors carry weight exp(-d(i, j)) on R*(i, k1) and are
    averaged over each row's k2 nearest neighbors before the final
    d_J(i, j) = 1 - sum_k min(V_i, V_j) / sum_k max(V_i, V_j).
    """
    x = np.asarray(features, dtype=np.float64)
    n = x.shape[0]
    if not 1 <= k2 <= k1 < n:
        raise ValueError(f"need 1 <= k2 <= k1 < N, got k1={k1}, k2={k2}, N={n}")
    dist = pairwise_euclidean(x)
    values = dist.values
    ranked = _ranked_neighbors(values, max(k1 + 1, k2))
    sets = _expanded_from_ranked(values, ranked, k1)

    v = np.zeros((n, n))
    for i, idx in enumerate(sets):
        v[i, idx] = np.exp(-values[i, idx])
    if k2 > 1:
        acc = np.zeros_like(v)
        for t in range(k2):
            acc += v[ranked[:, t], :]
        v = acc / k2

    row_sums = v.sum(axis=1)
    min_sums = _pairwise_min_sums(v)
    denom = row_sums[:, None] + row_sums[None, :] - min_sums
    jac = 1.0 - min_sums / denom
    np.clip(jac, 0.0, 1.0, out=jac)
    jac = 0.5 * (jac + jac.T)
    np.fill_diagonal(jac, 0.0)
    return DistanceMatrix(values=jac, kind="jaccard")


def _expanded_from_ranked(values: np.ndarray, ranked: np.ndarray, k1: int) -> list[np.ndarray]:
    n = values.shape[0]
    base = _mutual_sets(ranked[:, :k1 + 1], n)
    half_sets = _mutual_sets(_ranked_neighbors(values, k1 // 2 + 1), n)
    out: list[np.ndarray] = []
    mask = np.zeros(n, dtype=bool)
    for i in range(n):
        r = base[i]
        mask[r] = True
        parts = [r]
        for q in r:
            hq = half_sets[q]
            if np.count_nonzero(mask[hq]) * 3 >= 2 * hq.size:
                parts.append(hq)
        mask[r] = False
        out.append(np.unique(np.concatenate(parts)))
    return out


def _pairwise_min_sums(v: np.ndarray) -> np.ndarray:
    """M[i, j] = sum_k min(v[i, k], v[j, k]) for sparse nonnegative rows.

    Accumulates one outer-min block per column over that column's nonzero
    rows; columns are visited in ascending order so the result is exactly
    reproducible.
    """
    n = v.shape[0]
    m = np.zeros((n, n))
    vt = np.ascontiguousarray(v.T)
    for c in range(n):
        rows = np.flatnonzero(vt[c])
        if rows.size == 0:
            continue
        col = vt[c, rows]
        m[np.ix_(rows, rows)] += np.minimum.outer(col, col)
    return m


def save_distance_matrix(dist: DistanceMatrix, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<I", MATRIX_VERSION))
        fh.write(struct.pack("<QB", dist.num_instances, _KINDS.index(dist.kind)))
        fh.write(dist.values.astype("<f8").tobytes())


def load_distance_matrix(path: str | Path) -> DistanceMatrix:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != MATRIX_MAGIC:
            raise LoadError("bad magic: not a CAPM matrix file")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != MATRIX_VERSION:
            raise LoadError(f"unsupported CAPM version {version}")
        n, kind = struct.unpack("<QB", _read_exact(fh, 9, "header"))
        vals = np.frombuffer(_read_exact(fh, 8 * n * n, "values"), dtype="<f8")
    return DistanceMatrix(values=vals.reshape(n, n).copy(), kind=_KINDS[kind])
