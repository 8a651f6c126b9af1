"""Proxy-level memory bank with momentum updates and similarity logits.

One unit-norm column per proxy.  Entries move by ``mu * entry +
(1 - mu) * feature`` followed by re-normalization, so logits stay bounded
by 1/tau.  The baseline pipeline reuses the same type with one column per
cluster.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import LoadError, ProxyLabeling, _read_exact

MEMORY_MAGIC = b"CAPK"
MEMORY_VERSION = 1

_UNIT_TOL = 1e-6


@dataclass
class ProxyMemory:
    """d x Z matrix of proxy representatives (column per proxy)."""

    entries: np.ndarray
    mu: float
    tau: float
    renormalize: bool = True

    def __post_init__(self):
        self.entries = np.ascontiguousarray(self.entries, dtype=np.float64)
        if self.entries.ndim != 2:
            raise ValueError("entries must be a d x Z matrix")
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError(f"mu must lie in [0, 1], got {self.mu}")
        if self.tau <= 0.0:
            raise ValueError(f"tau must be positive, got {self.tau}")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def num_entries(self) -> int:
        return self.entries.shape[1]


def init_memory(
    features: np.ndarray,
    labeling: ProxyLabeling,
    mu: float = 0.2,
    tau: float = 0.07,
    renormalize: bool = True,
) -> ProxyMemory:
    """Entry z = L2-normalized mean of the member features of proxy z."""
    x = np.asarray(features, dtype=np.float64)
    z = labeling.num_proxies
    entries = np.empty((x.shape[1], z))
    for proxy, members in enumerate(labeling.proxy_members()):
        if members.size == 0:
            raise ValueError(f"proxy {proxy} has no members")
        mean = x[members].mean(axis=0)
        norm = np.linalg.norm(mean)
        if norm == 0.0:
            raise ValueError(f"proxy {proxy} has a zero-norm mean feature")
        entries[:, proxy] = mean / norm
    return ProxyMemory(entries=entries, mu=mu, tau=tau, renormalize=renormalize)


def update_entry(memory: ProxyMemory, proxy: int, feature: np.ndarray) -> ProxyMemory:
    """Momentum update of one column: mu * entry + (1 - mu) * feature.

    The blended column is re-normalized to unit norm (unless the memory was
    built with ``renormalize=False``).  The feature must be unit-norm within
    1e-6.  Mutates and returns the memory; all other columns are untouched.
    """
    if not 0 <= proxy < memory.num_entries:
        raise ValueError(f"proxy index {proxy} out of range [0, {memory.num_entries})")
    f = np.asarray(feature, dtype=np.float64)
    norm = np.linalg.norm(f)
    if abs(norm - 1.0) > _UNIT_TOL:
        raise ValueError(f"feature norm {norm} deviates from 1 beyond {_UNIT_TOL}")
    blended = memory.mu * memory.entries[:, proxy] + (1.0 - memory.mu) * f
    if memory.renormalize:
        bnorm = np.linalg.norm(blended)
        if bnorm == 0.0:
            raise ValueError(f"update of proxy {proxy} produced a zero-norm entry")
        blended = blended / bnorm
    memory.entries[:, proxy] = blended
    return memory


def scores(memory: ProxyMemory, embedding: np.ndarray) -> np.ndarray:
    """Pre-exponential logits entry_k . embedding / tau for all entries."""
    f = np.asarray(embedding, dtype=np.float64)
    return (memory.entries.T @ f) / memory.tau


def save_memory(memory: ProxyMemory, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(MEMORY_MAGIC)
        fh.write(struct.pack("<I", MEMORY_VERSION))
        fh.write(struct.pack("<QQddB", memory.dim, memory.num_entries,
                             memory.mu, memory.tau, int(memory.renormalize)))
        fh.write(memory.entries.astype("<f8").tobytes())


def load_memory(path: str | Path) -> ProxyMemory:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != MEMORY_MAGIC:
            raise LoadError("bad magic: not a CAPK memory file")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != MEMORY_VERSION:
            raise LoadError(f"unsupported CAPK version {version}")
        d, z, mu, tau, renorm = struct.unpack("<QQddB", _read_exact(fh, 33, "header"))
        entries = np.frombuffer(_read_exact(fh, 8 * d * z, "entries"), dtype="<f8")
    return ProxyMemory(entries=entries.reshape(d, z).copy(), mu=mu, tau=tau,
                       renormalize=bool(renorm))
