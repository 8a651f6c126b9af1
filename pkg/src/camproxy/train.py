"""The end-to-end training loop: re-cluster, rebuild memory, update the model.

Every epoch embeds the full dataset, recomputes the mutual-neighbor Jaccard
distance, re-clusters, splits clusters into camera-aware proxies, rebuilds
the proxy memory from scratch, and then runs one pass of mini-batches.  For
each batch the parameters move first and the memory entries are refreshed
afterwards with the batch embeddings.  The first ``intra_only_epochs`` train
on the intra-camera loss alone.

``mode="baseline"`` switches to the cluster-level variant: one memory column
per camera-agnostic cluster, the plain non-parametric softmax loss, and
class-balanced sampling.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .clustering import dbscan, filter_reliable
from .data import FeatureDataset
from .encoder import AffineEncoder, TanhEncoder
from .evaluate import label_quality
from .losses import baseline_loss, inter_loss, intra_loss, total_loss
from .memory import init_memory, update_entry
from .metric import jaccard_distance
from .optim import make_optimizer, optimizer_step
from .proxies import cluster_labeling, split_by_camera
from .sampler import plan_epoch

MODES = ("cap", "baseline")
ENCODERS = ("affine", "tanh")
OPTIMIZERS = ("adam", "sgd")


@dataclass(frozen=True)
class TrainConfig:
    """All knobs of the training loop; defaults follow the operating values."""

    epochs: int = 50
    intra_only_epochs: int = 5
    warmup_epochs: int = 10
    lr: float = 0.00035
    lr_decay_every: int = 20
    lr_decay_factor: float = 0.1
    mu: float = 0.2
    tau: float = 0.07
    inter_weight: float = 0.5
    k_hard: int = 50
    eps_dbscan: float = 0.5
    min_pts: int = 4
    min_cluster_size: int = 2
    k1: int = 30
    k2: int = 6
    batch_p: int = 8
    batch_k: int = 4
    seed: int = 0
    optimizer: str = "adam"
    mode: str = "cap"
    sampling: str | None = None
    encoder: str = "affine"
    embed_dim: int | None = None
    hidden_dim: int = 64
    jitter_sigma: float = 0.0
    renormalize_memory: bool = True

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not 0 <= self.intra_only_epochs:
            raise ValueError("intra_only_epochs must be >= 0")
        if self.epochs > 0 and self.intra_only_epochs > self.epochs:
            raise ValueError("intra_only_epochs cannot exceed epochs")
        if self.warmup_epochs < 0:
            raise ValueError("warmup_epochs must be >= 0")
        for name in ("lr", "lr_decay_factor", "tau", "eps_dbscan"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.lr_decay_every < 1:
            raise ValueError("lr_decay_every must be >= 1")
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError("mu must lie in [0, 1]")
        if self.inter_weight < 0:
            raise ValueError("inter_weight must be >= 0")
        if self.k_hard < 0:
            raise ValueError("k_hard must be >= 0")
        for name in ("min_pts", "min_cluster_size", "k1", "k2", "batch_p", "batch_k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.k2 > self.k1:
            raise ValueError("k2 cannot exceed k1")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.encoder not in ENCODERS:
            raise ValueError(f"encoder must be one of {ENCODERS}")
        if self.sampling is not None and self.sampling not in (
            "proxy_balanced", "class_balanced", "random"
        ):
            raise ValueError(f"unknown sampling strategy {self.sampling!r}")

    @property
    def effective_sampling(self) -> str:
        if self.sampling is not None:
            return self.sampling
        return "proxy_balanced" if self.mode == "cap" else "class_balanced"


def config_to_json(config: TrainConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(asdict(config), fh, indent=2)
        fh.write("\n")


def config_from_json(path: str | Path, **overrides) -> TrainConfig:
    """Load a config file; keyword overrides win over file values."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    unknown = set(payload) - set(TrainConfig.__dataclass_fields__)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    payload.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig(**payload)


def lr_at(config: TrainConfig, epoch: int) -> float:
    """Linear warmup to the base rate, then step decay every decay period."""
    if not 0 <= epoch < max(config.epochs, 1):
        raise ValueError(f"epoch {epoch} outside [0, {config.epochs})")
    if epoch < config.warmup_epochs:
        return config.lr * (epoch + 1) / config.warmup_epochs
    return config.lr * config.lr_decay_factor ** (epoch // config.lr_decay_every)


@dataclass(frozen=True)
class EpochRecord:
    """Per-epoch state summary.

    ``intra_loss`` and ``inter_loss`` are the full-dataset objective values
    at epoch start (current embeddings against the freshly built memory),
    so they are deterministic and free of batch-sampling noise;
    ``inter_loss`` is zero while that term is inactive.
    """

    epoch: int
    num_clusters: int
    num_proxies: int
    num_outliers: int
    intra_loss: float
    inter_loss: float
    lr: float
    ari: float | None
    nmi: float | None
    wall_time: float


@dataclass
class TrainReport:
    records: list[EpochRecord] = field(default_factory=list)

    @property
    def num_epochs(self) -> int:
        return len(self.records)

    def to_csv(self, path: str | Path) -> None:
        """Deterministic per-epoch CSV; wall time goes to the JSON summary."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["epoch", "clusters", "proxies", "outliers",
                 "intra_loss", "inter_loss", "lr", "ari", "nmi"]
            )
            for r in self.records:
                writer.writerow(
                    [
                        r.epoch, r.num_clusters, r.num_proxies, r.num_outliers,
                        repr(r.intra_loss), repr(r.inter_loss), repr(r.lr),
                        repr(r.ari) if r.ari is not None else "",
                        repr(r.nmi) if r.nmi is not None else "",
                    ]
                )

    def to_summary_json(self, path: str | Path, config: TrainConfig) -> None:
        last = self.records[-1] if self.records else None
        payload = {
            "epochs_completed": self.num_epochs,
            "total_wall_time": sum(r.wall_time for r in self.records),
            "per_epoch_wall_time": [r.wall_time for r in self.records],
            "final": None if last is None else {
                "clusters": last.num_clusters,
                "proxies": last.num_proxies,
                "outliers": last.num_outliers,
                "intra_loss": last.intra_loss,
                "inter_loss": last.inter_loss,
                "ari": last.ari,
                "nmi": last.nmi,
            },
            "config": asdict(config),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")


def build_encoder(config: TrainConfig, d_in: int):
    """Fresh encoder for a dataset of input dimension ``d_in``.

    The affine encoder starts at the identity map when the embedding
    dimension matches the input, so epoch zero sees the raw features.
    """
    d_out = config.embed_dim if config.embed_dim is not None else d_in
    if config.encoder == "affine":
        if d_out == d_in:
            return AffineEncoder.identity(d_in)
        return AffineEncoder.random(d_in, d_out, config.seed)
    return TanhEncoder.random(d_in, config.hidden_dim, d_out, config.seed)


def _epoch_labeling(dataset, assignment, config):
    if config.mode == "cap":
        return split_by_camera(assignment, dataset)
    return cluster_labeling(assignment)


def run_training(dataset: FeatureDataset, config: TrainConfig):
    """Run the full loop and return (encoder, TrainReport)."""
    encoder = build_encoder(config, dataset.dim)
    optimizer = make_optimizer(config.optimizer, encoder.params)
    report = TrainReport()
    seed_seq = np.random.SeedSequence(config.seed)
    epoch_seeds = seed_seq.spawn(max(config.epochs, 1))
    jitter_rng = np.random.default_rng(seed_seq.spawn(1)[0])

    for epoch in range(config.epochs):
        started = time.perf_counter()
        lr = lr_at(config, epoch)

        embeddings, _ = encoder.forward(dataset.features)
        dist = jaccard_distance(embeddings, k1=config.k1, k2=config.k2)
        assignment = filter_reliable(
            dbscan(dist, eps=config.eps_dbscan, min_pts=config.min_pts),
            config.min_cluster_size,
        )
        if assignment.num_clusters == 0:
            raise RuntimeError(f"degenerate clustering at epoch {epoch}: no clusters survive")
        labeling = _epoch_labeling(dataset, assignment, config)
        memory = init_memory(
            embeddings, labeling, mu=config.mu, tau=config.tau,
            renormalize=config.renormalize_memory,
        )
        plan_seed = int(epoch_seeds[epoch].generate_state(1, np.uint64)[0])
        plan = plan_epoch(
            labeling, config.batch_p, config.batch_k, config.effective_sampling, plan_seed
        )

        use_inter = config.mode == "cap" and epoch >= config.intra_only_epochs
        epoch_intra, epoch_inter = _epoch_start_losses(
            embeddings, labeling, memory, dataset, config, use_inter
        )
        for batch in plan.batches:
            idx = np.asarray(batch, dtype=np.int64)
            x = dataset.features[idx]
            if config.jitter_sigma > 0:
                x = x + config.jitter_sigma * jitter_rng.standard_normal(x.shape)
            emb, cache = encoder.forward(x)

            if config.mode == "cap":
                cams = dataset.camera_ids[idx]
                proxies = labeling.proxy_of_instance[idx]
                zlabels = labeling.per_camera_label[proxies]
                part_intra = intra_loss(memory, labeling, emb, cams, zlabels)
                if use_inter:
                    part_inter = inter_loss(memory, labeling, emb, idx, config.k_hard)
                    loss = total_loss(part_intra, part_inter, config.inter_weight)
                else:
                    loss = part_intra
            else:
                labels = labeling.proxy_of_instance[idx]
                loss = baseline_loss(memory, emb, labels)

            if not np.isfinite(loss.value):
                raise RuntimeError(
                    f"non-finite loss {loss.value} at epoch {epoch}; aborting"
                )
            grads, _ = encoder.backward(cache, loss.grad)
            optimizer_step(optimizer, encoder.params, grads, lr)
            for row, inst in enumerate(idx):
                update_entry(memory, int(labeling.proxy_of_instance[inst]), emb[row])

        ari = nmi = None
        if dataset.true_ids is not None:
            ari, nmi = label_quality(assignment, dataset.true_ids)
        report.records.append(
            EpochRecord(
                epoch=epoch,
                num_clusters=assignment.num_clusters,
                num_proxies=labeling.num_proxies,
                num_outliers=assignment.num_outliers,
                intra_loss=epoch_intra,
                inter_loss=epoch_inter,
                lr=lr,
                ari=ari,
                nmi=nmi,
                wall_time=time.perf_counter() - started,
            )
        )
    return encoder, report


def _epoch_start_losses(embeddings, labeling, memory, dataset, config, use_inter):
    """Objective values over all clustered instances before any batch update."""
    clustered = np.flatnonzero(labeling.proxy_of_instance >= 0)
    if config.mode == "baseline":
        value = baseline_loss(
            memory, embeddings[clustered], labeling.proxy_of_instance[clustered]
        ).value
        return value, 0.0
    proxies = labeling.proxy_of_instance[clustered]
    value = intra_loss(
        memory,
        labeling,
        embeddings[clustered],
        dataset.camera_ids[clustered],
        labeling.per_camera_label[proxies],
    ).value
    inter_value = 0.0
    if use_inter:
        inter_value = inter_loss(
            memory, labeling, embeddings[clustered], clustered, config.k_hard
        ).value
    return value, inter_value
