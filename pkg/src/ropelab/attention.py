"""Causal multi-head attention with logit scaling and per-row entropy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _backend
from ._fallback import MASK_SENTINEL
from .errors import ValidationError
from .rope import RopeConfig, rotation_tables
from .scaling import ScalingPolicy, logit_scale_row

NORMALIZATION_TOL = 1e-9


class TraceMode(str, Enum):
    NONE = "none"
    ENTROPY = "entropy"
    FULL = "full"


@dataclass
class AttentionTrace:
    """Per-head attention of one layer.

    ``entropy`` has shape ``(heads, n)``; ``probs`` is ``(heads, n, n)`` in
    full mode and ``None`` otherwise.
    """

    entropy: np.ndarray
    probs: np.ndarray | None = None

    @property
    def mean_entropy(self) -> np.ndarray:
        """Head-averaged entropy per query position."""
        return self.entropy.mean(axis=0)


def attention_entropy(p) -> float:
    """Shannon entropy ``-sum p ln p`` of one attention row (0 ln 0 = 0)."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError("expected a non-empty probability vector")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValidationError("probabilities must be finite and non-negative")
    total = math.fsum(p)
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise ValidationError(f"probabilities sum to {total!r}, not 1")
    nz = p[p > 0]
    return float(max(-np.dot(nz, np.log(nz)), 0.0))


def softmax_entropy(z, t: float = 1.0) -> tuple[np.ndarray, float]:
    """Softmax of ``t * z`` and its entropy, without computing ``ln p``.

    With ``u = t z - max(t z)`` and ``S = sum exp(u)``, the entropy is
    ``ln S - sum p u``, which stays exact when some ``p`` underflow.
    """
    u = t * np.asarray(z, dtype=np.float64)
    u = u - u.max()
    e = np.exp(u)
    total = e.sum()
    p = e / total
    return p, float(math.log(total) - np.dot(p, u))


def _as_heads(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 2:
        a = a[None]
    if a.ndim != 3:
        raise ValidationError(f"{name} must have shape (n, d) or (heads, n, d)")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} contains NaN or Inf")
    return a


def _prepare(q, k, v, rope):
    q, k, v = _as_heads(q, "Q"), _as_heads(k, "K"), _as_heads(v, "V")
    if q.shape != k.shape or q.shape[:2] != v.shape[:2]:
        raise ValidationError(f"shape mismatch: Q{q.shape} K{k.shape} V{v.shape}")
    if q.shape[2] != rope.d:
        raise ValidationError(f"head dimension {q.shape[2]} does not match rope.d={rope.d}")
    if q.shape[1] < 1:
        raise ValidationError("need at least one token")
    return q, k, v


def _rotate_heads(x, cos_t, sin_t):
    out = np.empty_like(x)
    for h in range(x.shape[0]):
        _backend.rope_rotate(np.ascontiguousarray(x[h]), cos_t, sin_t, out[h])
    return out


def causal_logits(q, k, layer_index: int, rope: RopeConfig, policy: ScalingPolicy) -> np.ndarray:
    """Scaled, masked logits ``(heads, n, n)``; masked entries hold the sentinel."""
    q, k, _ = _prepare(q, k, k, rope)
    n = q.shape[1]
    cos_t, sin_t = (np.ascontiguousarray(a) for a in rotation_tables(np.arange(n), rope))
    qr, kr = _rotate_heads(q, cos_t, sin_t), _rotate_heads(k, cos_t, sin_t)
    scale = logit_scale_row(policy, layer_index, n) / math.sqrt(rope.d)
    logits = np.einsum("hmd,hnd->hmn", qr, kr) * scale[None, :, None]
    upper_rows, upper_cols = np.triu_indices(n, k=1)
    logits[:, upper_rows, upper_cols] = MASK_SENTINEL
    return logits


def attend(q, k, v, layer_index: int, rope: RopeConfig, policy: ScalingPolicy,
           trace: TraceMode | str = TraceMode.NONE):
    """Causal attention of every head.

    ``q``, ``k``, ``v`` are ``(n, d)`` or ``(heads, n, d)`` and are rotated
    here, query ``m`` at position ``m``. Row ``m`` of the logits is
    multiplied by ``t(layer_index, m) / sqrt(d)``. Returns the output in the
    input's layout and an :class:`AttentionTrace` (``None`` when tracing is
    off).
    """
    trace = TraceMode(trace)
    squeeze = np.ndim(q) == 2
    q, k, v = _prepare(q, k, v, rope)
    heads, n, d = q.shape
    cos_t, sin_t = (np.ascontiguousarray(a) for a in rotation_tables(np.arange(n), rope))
    row_scale = np.ascontiguousarray(logit_scale_row(policy, layer_index, n) / math.sqrt(d))

    out = np.empty((heads, n, v.shape[2]))
    entropy = np.empty((heads, n))
    probs = np.empty((heads, n, n)) if trace is TraceMode.FULL else None
    qr = np.empty((n, d))
    kr = np.empty((n, d))
    for h in range(heads):
        _backend.rope_rotate(np.ascontiguousarray(q[h]), cos_t, sin_t, qr)
        _backend.rope_rotate(np.ascontiguousarray(k[h]), cos_t, sin_t, kr)
        scores = probs[h] if probs is not None else np.empty((n, n))
        np.matmul(qr, kr.T, out=scores)
        _backend.causal_softmax_entropy(scores, row_scale, entropy[h])
        np.matmul(scores, v[h], out=out[h])

    result = out[0] if squeeze else out
    if trace is TraceMode.NONE:
        return result, None
    return result, AttentionTrace(entropy=entropy, probs=probs)
