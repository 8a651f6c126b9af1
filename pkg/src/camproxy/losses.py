"""Contrastive losses over the proxy memory, with exact embedding gradients.

Every loss returns the scalar value together with the analytic gradient with
respect to the batch embeddings.  Gradients never flow into the memory
entries (those move only through the momentum rule) and the mined positive
and hard-negative index sets are treated as constants under differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ProxyLabeling
from .memory import ProxyMemory
from .proxies import hard_negative_set, positive_set


@dataclass
class LossOutput:
    """Scalar loss, per-embedding gradient, and per-sample terms."""

    value: float
    grad: np.ndarray
    contributing_count: int
    per_sample: np.ndarray


def _log_softmax(logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-stable (log_probs, probs)."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    log_probs = shifted - log_norm
    return log_probs, np.exp(log_probs)


def baseline_loss(memory: ProxyMemory, batch: np.ndarray, labels: np.ndarray) -> LossOutput:
    """Mean non-parametric softmax loss over all memory columns."""
    x = np.asarray(batch, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    b = x.shape[0]
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= memory.num_entries:
        raise ValueError("labels must be valid memory column indices")
    logits = (x @ memory.entries) / memory.tau
    log_probs, probs = _log_softmax(logits)
    terms = -log_probs[np.arange(b), labels]
    delta = probs
    delta[np.arange(b), labels] -= 1.0
    grad = (delta @ memory.entries.T) / (memory.tau * b)
    return LossOutput(
        value=float(terms.mean()),
        grad=grad,
        contributing_count=b,
        per_sample=terms,
    )


def intra_loss(
    memory: ProxyMemory,
    labeling: ProxyLabeling,
    batch: np.ndarray,
    cameras: np.ndarray,
    camera_labels: np.ndarray,
) -> LossOutput:
    """Per-camera softmax restricted to each sample's own camera block.

    Each sample's term targets column ``offset(c) + camera_label`` among the
    columns of camera c and is weighted by 1 over that camera's clustered
    image count; the batch value is the sum of the weighted terms.
    """
    x = np.asarray(batch, dtype=np.float64)
    cameras = np.asarray(cameras, dtype=np.int64)
    camera_labels = np.asarray(camera_labels, dtype=np.int64)
    b = x.shape[0]
    grad = np.zeros_like(x)
    per_sample = np.zeros(b)
    for cam in np.unique(cameras):
        rows = np.flatnonzero(cameras == cam)
        offset = int(labeling.camera_offsets[cam - 1])
        width = int(labeling.per_camera_counts[cam - 1])
        block = memory.entries[:, offset:offset + width]
        weight = 1.0 / float(labeling.per_camera_image_counts[cam - 1])
        logits = (x[rows] @ block) / memory.tau
        log_probs, probs = _log_softmax(logits)
        targets = camera_labels[rows]
        terms = -log_probs[np.arange(rows.size), targets]
        per_sample[rows] = weight * terms
        delta = probs
        delta[np.arange(rows.size), targets] -= 1.0
        grad[rows] = weight * (delta @ block.T) / memory.tau
    return LossOutput(
        value=float(per_sample.sum()),
        grad=grad,
        contributing_count=b,
        per_sample=per_sample,
    )


def mine_proxy_sets(
    memory: ProxyMemory,
    labeling: ProxyLabeling,
    batch: np.ndarray,
    instances: np.ndarray,
    k_hard: int,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-sample (positive, hard-negative) proxy index sets."""
    x = np.asarray(batch, dtype=np.float64)
    return [
        (
            positive_set(labeling, int(inst)),
            hard_negative_set(labeling, memory, x[i], int(inst), k_hard),
        )
        for i, inst in enumerate(instances)
    ]


def inter_loss(
    memory: ProxyMemory,
    labeling: ProxyLabeling,
    batch: np.ndarray,
    instances: np.ndarray,
    k_hard: int,
    proxy_sets: list[tuple[np.ndarray, np.ndarray]] | None = None,
) -> LossOutput:
    """Pull toward all cross-camera positive proxies, push from mined negatives.

    Samples whose positive set is empty contribute nothing; the value is the
    mean over contributing samples.  ``proxy_sets`` freezes the mined sets,
    e.g. for finite-difference checks.
    """
    if k_hard < 0:
        raise ValueError(f"k_hard must be >= 0, got {k_hard}")
    x = np.asarray(batch, dtype=np.float64)
    b = x.shape[0]
    if proxy_sets is None:
        proxy_sets = mine_proxy_sets(memory, labeling, x, instances, k_hard)
    grad = np.zeros_like(x)
    per_sample = np.zeros(b)
    contributing = 0
    for i, (pos, neg) in enumerate(proxy_sets):
        if pos.size == 0:
            continue
        contributing += 1
        idx = np.concatenate([pos, neg])
        cols = memory.entries[:, idx]
        logits = (cols.T @ x[i]) / memory.tau
        shift = logits.max()
        weights = np.exp(logits - shift)
        lse = shift + np.log(weights.sum())
        weights /= weights.sum()
        per_sample[i] = lse - logits[: pos.size].mean()
        grad[i] = (cols @ weights - memory.entries[:, pos].mean(axis=1)) / memory.tau
    if contributing:
        value = float(per_sample.sum() / contributing)
        grad /= contributing
    else:
        value = 0.0
    return LossOutput(
        value=value,
        grad=grad,
        contributing_count=contributing,
        per_sample=per_sample,
    )


def total_loss(intra: LossOutput, inter: LossOutput, weight: float) -> LossOutput:
    """Combined objective: intra plus ``weight`` times inter."""
    if intra.grad.shape != inter.grad.shape:
        raise ValueError(
            f"gradient shapes differ: {intra.grad.shape} vs {inter.grad.shape}"
        )
    return LossOutput(
        value=intra.value + weight * inter.value,
        grad=intra.grad + weight * inter.grad,
        contributing_count=max(intra.contributing_count, inter.contributing_count),
        per_sample=intra.per_sample + weight * inter.per_sample,
    )
