"""Retrieval evaluation: cross-camera CMC Rank-k and mAP, plus label quality.

Gallery entries sharing both the true ID and the camera of the query are
excluded before ranking, following the standard cross-camera protocol.
Queries with no valid cross-camera match are skipped and not counted.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import ClusterAssignment, FeatureDataset


@dataclass(frozen=True)
class EvalResult:
    rank_k: dict[int, float]
    mAP: float
    num_queries_evaluated: int

    def to_dict(self) -> dict:
        out = {f"rank_{k}": v for k, v in sorted(self.rank_k.items())}
        out["mAP"] = self.mAP
        out["num_queries_evaluated"] = self.num_queries_evaluated
        return out


def _average_precision(relevant: np.ndarray) -> float:
    """AP = mean of precision at each relevant rank of a 0/1 relevance list."""
    hits = np.flatnonzero(relevant)
    precision = (np.arange(hits.size) + 1.0) / (hits + 1.0)
    return float(precision.mean())


def per_query_ap(
    query: FeatureDataset, gallery: FeatureDataset, encoder, ranks: tuple[int, ...] = (1, 5, 10)
) -> tuple[np.ndarray, np.ndarray, dict[int, float]]:
    """Per-query AP, a per-query evaluated mask, and CMC hit rates."""
    if query.true_ids is None or gallery.true_ids is None:
        raise ValueError("both query and gallery must carry true IDs")
    q_emb, _ = encoder.forward(query.features)
    g_emb, _ = encoder.forward(gallery.features)
    sims = q_emb @ g_emb.T
    gallery_index = np.arange(gallery.num_instances)

    aps = np.zeros(query.num_instances)
    evaluated = np.zeros(query.num_instances, dtype=bool)
    hits = {k: 0 for k in ranks}
    for qi in range(query.num_instances):
        drop = (gallery.true_ids == query.true_ids[qi]) & (
            gallery.camera_ids == query.camera_ids[qi]
        )
        keep = ~drop
        if not np.any(keep):
            continue
        cand = gallery_index[keep]
        order = np.lexsort((cand, -sims[qi, keep]))
        relevant = gallery.true_ids[cand[order]] == query.true_ids[qi]
        if not np.any(relevant):
            continue
        evaluated[qi] = True
        aps[qi] = _average_precision(relevant)
        first = int(np.flatnonzero(relevant)[0])
        for k in ranks:
            if first < k:
                hits[k] += 1
    return aps, evaluated, hits


def evaluate(
    query: FeatureDataset, gallery: FeatureDataset, encoder, ranks: tuple[int, ...] = (1, 5, 10)
) -> EvalResult:
    """Rank the gallery per query by descending cosine similarity."""
    aps, evaluated, hits = per_query_ap(query, gallery, encoder, ranks)
    count = int(evaluated.sum())
    if count == 0:
        raise ValueError("no query has a valid cross-camera match in the gallery")
    rank_k = {k: hits[k] / count for k in ranks}
    return EvalResult(
        rank_k=rank_k,
        mAP=float(aps[evaluated].mean()),
        num_queries_evaluated=count,
    )


def _entropy(counts: np.ndarray, n: int) -> float:
    probs = counts[counts > 0] / n
    return float(-(probs * np.log(probs)).sum())


def label_quality(assignment: ClusterAssignment, true_ids: np.ndarray) -> tuple[float, float]:
    """(ARI, NMI) of the cluster labels against ground truth, outliers excluded."""
    if true_ids is None:
        raise ValueError("true IDs are required to score label quality")
    labels = assignment.labels
    mask = labels >= 0
    pred = labels[mask]
    true = np.asarray(true_ids)[mask]
    n = pred.size
    if n == 0:
        return 0.0, 0.0

    _, pred_idx = np.unique(pred, return_inverse=True)
    _, true_idx = np.unique(true, return_inverse=True)
    num_pred = pred_idx.max() + 1
    num_true = true_idx.max() + 1
    contingency = np.zeros((num_pred, num_true), dtype=np.int64)
    np.add.at(contingency, (pred_idx, true_idx), 1)
    a = contingency.sum(axis=1)
    b = contingency.sum(axis=0)

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_ij = comb2(contingency.astype(np.float64)).sum()
    sum_a = comb2(a.astype(np.float64)).sum()
    sum_b = comb2(b.astype(np.float64)).sum()
    total = comb2(float(n))
    expected = sum_a * sum_b / total if total > 0 else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    ari = 1.0 if max_index == expected else (sum_ij - expected) / (max_index - expected)

    h_pred = _entropy(a, n)
    h_true = _entropy(b, n)
    if h_pred == 0.0 and h_true == 0.0:
        nmi = 1.0
    else:
        nz = contingency > 0
        p_ij = contingency[nz] / n
        outer = (a[:, None] * b[None, :])[nz] / (n * n)
        mi = float((p_ij * np.log(p_ij / outer)).sum())
        nmi = mi / (0.5 * (h_pred + h_true))
    return float(ari), float(nmi)


def save_eval_json(result: EvalResult, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, indent=2)
        fh.write("\n")


def save_per_query_ap_csv(
    query: FeatureDataset, aps: np.ndarray, evaluated: np.ndarray, path: str | Path
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["key", "camera", "true_id", "evaluated", "ap"])
        for i in range(query.num_instances):
            writer.writerow(
                [
                    query.instance_keys[i],
                    int(query.camera_ids[i]),
                    int(query.true_ids[i]),
                    int(evaluated[i]),
                    repr(float(aps[i])) if evaluated[i] else "",
                ]
            )
