"""Mini-batch planning: proxy-balanced P x K batches plus ablation strategies.

``proxy_balanced`` cycles a seeded permutation of all proxies so per-epoch
usage counts differ by at most one; an epoch is ceil(Z / P) batches.  Within
a proxy, samples are drawn without replacement from a seeded shuffle until
the proxy is exhausted, then with replacement, so every batch keeps the
exact P x K shape even for small proxies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import OUTLIER, ProxyLabeling

STRATEGIES = ("proxy_balanced", "class_balanced", "random")


@dataclass(frozen=True)
class BatchPlan:
    """Ordered instance-index batches for one epoch."""

    batches: tuple[tuple[int, ...], ...]
    P: int
    K: int
    strategy: str

    @property
    def num_batches(self) -> int:
        return len(self.batches)


class _GroupPool:
    """Draw from a shuffled group without replacement, then with replacement."""

    def __init__(self, members: np.ndarray, rng: np.random.Generator):
        self.members = members
        self.order = rng.permutation(members)
        self.pos = 0

    def draw(self, count: int, rng: np.random.Generator) -> list[int]:
        out: list[int] = []
        while count > 0 and self.pos < self.order.size:
            out.append(int(self.order[self.pos]))
            self.pos += 1
            count -= 1
        if count > 0:
            out.extend(int(v) for v in rng.choice(self.members, size=count, replace=True))
        return out


def _cycled_group_plan(
    groups: list[np.ndarray], p: int, k: int, strategy: str, rng: np.random.Generator
) -> tuple[tuple[int, ...], ...]:
    num_groups = len(groups)
    perm = rng.permutation(num_groups)
    num_batches = -(-num_groups // p)
    pools = {}
    batches = []
    slot = 0
    for _ in range(num_batches):
        batch: list[int] = []
        for _ in range(p):
            g = int(perm[slot % num_groups])
            slot += 1
            if g not in pools:
                pools[g] = _GroupPool(groups[g], rng)
            batch.extend(pools[g].draw(k, rng))
        batches.append(tuple(batch))
    return tuple(batches)


def plan_epoch(
    labeling: ProxyLabeling, p: int, k: int, strategy: str, seed: int
) -> BatchPlan:
    """Build one epoch's batches; identical inputs yield an identical plan."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown sampling strategy {strategy!r}")
    if k < 1:
        raise ValueError(f"K must be >= 1, got {k}")
    if p < 1:
        raise ValueError(f"P must be >= 1, got {p}")
    rng = np.random.default_rng(seed)

    if strategy == "proxy_balanced":
        z = labeling.num_proxies
        if p > z:
            raise ValueError(f"P={p} exceeds the number of proxies Z={z}")
        batches = _cycled_group_plan(labeling.proxy_members(), p, k, strategy, rng)
    elif strategy == "class_balanced":
        num_clusters = labeling.num_clusters
        if p > num_clusters:
            raise ValueError(f"P={p} exceeds the number of clusters Y={num_clusters}")
        proxy_cluster = labeling.cluster_of_proxy[
            np.maximum(labeling.proxy_of_instance, 0)
        ]
        cluster_of_instance = np.where(
            labeling.proxy_of_instance == OUTLIER, OUTLIER, proxy_cluster
        )
        groups = [
            np.flatnonzero(cluster_of_instance == y) for y in range(num_clusters)
        ]
        batches = _cycled_group_plan(groups, p, k, strategy, rng)
    else:
        clustered = np.flatnonzero(labeling.proxy_of_instance != OUTLIER)
        size = p * k
        perm = rng.permutation(clustered)
        num_batches = -(-clustered.size // size)
        batches = []
        for b in range(num_batches):
            chunk = perm[b * size:(b + 1) * size]
            if chunk.size < size:
                extra = rng.choice(clustered, size=size - chunk.size, replace=True)
                chunk = np.concatenate([chunk, extra])
            batches.append(tuple(int(v) for v in chunk))
        batches = tuple(batches)

    return BatchPlan(batches=batches, P=p, K=k, strategy=strategy)


def proxy_usage_counts(plan: BatchPlan, labeling: ProxyLabeling) -> np.ndarray:
    """How many batch slots used each proxy across the epoch."""
    counts = np.zeros(labeling.num_proxies, dtype=np.int64)
    for batch in plan.batches:
        for start in range(0, len(batch), plan.K):
            proxy = labeling.proxy_of_instance[batch[start]]
            counts[proxy] += 1
    return counts


def save_plan_json(plan: BatchPlan, path: str | Path) -> None:
    payload = {
        "strategy": plan.strategy,
        "P": plan.P,
        "K": plan.K,
        "batches": [list(batch) for batch in plan.batches],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
