"""Small differentiable encoders mapping input features to unit-norm embeddings.

The default is an affine map followed by L2 normalization; a one-hidden-layer
tanh variant is available for harder synthetic tasks.  Both expose exact
forward/backward passes so composed gradients can be verified against finite
differences.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .data import LoadError, _read_exact

ENCODER_MAGIC = b"CAPE"
ENCODER_VERSION = 1

_KIND_AFFINE = 0
_KIND_TANH = 1


def _normalize_rows(pre: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(pre, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValueError(f"row {zero[0]} has zero norm before normalization")
    return pre / norms[:, None]


def _normalization_backward(pre: np.ndarray, out: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Apply the per-row Jacobian (I - u u^T) / ||v|| of u = v / ||v||."""
    norms = np.linalg.norm(pre, axis=1, keepdims=True)
    radial = np.einsum("ij,ij->i", grad_out, out)[:, None]
    return (grad_out - radial * out) / norms


class AffineEncoder:
    """out = normalize(x @ weights + bias)."""

    kind = "affine"

    def __init__(self, weights: np.ndarray, bias: np.ndarray):
        self.weights = np.array(weights, dtype=np.float64)
        self.bias = np.array(bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[1],):
            raise ValueError("weights must be d_in x d and bias length d")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValueError("encoder parameters must be finite")

    @classmethod
    def identity(cls, dim: int) -> "AffineEncoder":
        return cls(np.eye(dim), np.zeros(dim))

    @classmethod
    def random(cls, d_in: int, d_out: int, seed: int) -> "AffineEncoder":
        rng = np.random.default_rng(seed)
        q, _ = np.linalg.qr(rng.standard_normal((d_in, d_in)))
        return cls(q[:, :d_out], np.zeros(d_out))

    @property
    def dim_in(self) -> int:
        return self.weights.shape[0]

    @property
    def dim_out(self) -> int:
        return self.weights.shape[1]

    @property
    def params(self) -> list[np.ndarray]:
        return [self.weights, self.bias]

    def forward(self, x: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        pre = x @ self.weights + self.bias
        out = _normalize_rows(pre)
        return out, (x, pre, out)

    def backward(self, cache, grad_out: np.ndarray):
        x, pre, out = cache
        grad_pre = _normalization_backward(pre, out, grad_out)
        grad_w = x.T @ grad_pre
        grad_b = grad_pre.sum(axis=0)
        grad_in = grad_pre @ self.weights.T
        return [grad_w, grad_b], grad_in


class TanhEncoder:
    """out = normalize(tanh(x @ w1 + b1) @ w2 + b2)."""

    kind = "tanh"

    def __init__(self, w1: np.ndarray, b1: np.ndarray, w2: np.ndarray, b2: np.ndarray):
        self.w1 = np.array(w1, dtype=np.float64)
        self.b1 = np.array(b1, dtype=np.float64)
        self.w2 = np.array(w2, dtype=np.float64)
        self.b2 = np.array(b2, dtype=np.float64)
        if self.w1.shape[1] != self.w2.shape[0]:
            raise ValueError("hidden dimensions of w1 and w2 do not match")

    @classmethod
    def random(cls, d_in: int, hidden: int, d_out: int, seed: int) -> "TanhEncoder":
        rng = np.random.default_rng(seed)
        w1 = rng.standard_normal((d_in, hidden)) / np.sqrt(d_in)
        w2 = rng.standard_normal((hidden, d_out)) / np.sqrt(hidden)
        return cls(w1, np.zeros(hidden), w2, np.zeros(d_out))

    @property
    def dim_in(self) -> int:
        return self.w1.shape[0]

    @property
    def dim_out(self) -> int:
        return self.w2.shape[1]

    @property
    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]

    def forward(self, x: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        hidden = np.tanh(x @ self.w1 + self.b1)
        pre = hidden @ self.w2 + self.b2
        out = _normalize_rows(pre)
        return out, (x, hidden, pre, out)

    def backward(self, cache, grad_out: np.ndarray):
        x, hidden, pre, out = cache
        grad_pre = _normalization_backward(pre, out, grad_out)
        grad_w2 = hidden.T @ grad_pre
        grad_b2 = grad_pre.sum(axis=0)
        grad_hidden = grad_pre @ self.w2.T
        grad_act = grad_hidden * (1.0 - hidden * hidden)
        grad_w1 = x.T @ grad_act
        grad_b1 = grad_act.sum(axis=0)
        grad_in = grad_act @ self.w1.T
        return [grad_w1, grad_b1, grad_w2, grad_b2], grad_in


def encoder_forward(encoder, batch: np.ndarray):
    """Unit-norm embeddings plus the cache needed for the backward pass."""
    return encoder.forward(batch)


def encoder_backward(encoder, cache, grad_out: np.ndarray):
    """Parameter gradients and the input gradient for a cached forward."""
    return encoder.backward(cache, grad_out)


def save_encoder(encoder, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(ENCODER_MAGIC)
        fh.write(struct.pack("<I", ENCODER_VERSION))
        if encoder.kind == "affine":
            fh.write(struct.pack("<B", _KIND_AFFINE))
            fh.write(struct.pack("<QQ", encoder.dim_in, encoder.dim_out))
        else:
            fh.write(struct.pack("<B", _KIND_TANH))
            fh.write(struct.pack("<QQQ", encoder.dim_in, encoder.w1.shape[1], encoder.dim_out))
        for p in encoder.params:
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_encoder(path: str | Path):
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != ENCODER_MAGIC:
            raise LoadError("bad magic: not a CAPE encoder file")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != ENCODER_VERSION:
            raise LoadError(f"unsupported CAPE version {version}")
        (kind,) = struct.unpack("<B", _read_exact(fh, 1, "kind"))
        if kind == _KIND_AFFINE:
            d_in, d_out = struct.unpack("<QQ", _read_exact(fh, 16, "dims"))
            w = np.frombuffer(_read_exact(fh, 8 * d_in * d_out, "weights"), dtype="<f8")
            b = np.frombuffer(_read_exact(fh, 8 * d_out, "bias"), dtype="<f8")
            return AffineEncoder(w.reshape(d_in, d_out).copy(), b.copy())
        if kind == _KIND_TANH:
            d_in, hidden, d_out = struct.unpack("<QQQ", _read_exact(fh, 24, "dims"))
            w1 = np.frombuffer(_read_exact(fh, 8 * d_in * hidden, "w1"), dtype="<f8")
            b1 = np.frombuffer(_read_exact(fh, 8 * hidden, "b1"), dtype="<f8")
            w2 = np.frombuffer(_read_exact(fh, 8 * hidden * d_out, "w2"), dtype="<f8")
            b2 = np.frombuffer(_read_exact(fh, 8 * d_out, "b2"), dtype="<f8")
            return TanhEncoder(
                w1.reshape(d_in, hidden).copy(), b1.copy(),
                w2.reshape(hidden, d_out).copy(), b2.copy(),
            )
    raise LoadError(f"unknown encoder kind {kind}")
