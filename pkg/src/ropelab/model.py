"""Deterministic desk-scale decoder-only transformer.

Pre-norm blocks: RMS-norm, multi-head causal attention with a pluggable
rope method and logit-scaling policy, residual add, RMS-norm, a two-matrix
SiLU MLP of width ``4 * d_model``, residual add. The output head is tied to
the token embedding.

Weights come from one SplitMix64 stream seeded with ``ModelSpec.seed``;
each 64-bit draw ``z`` becomes ``low + (high - low) * (z >> 11) / 2**53``
with ``[low, high) = [-init_scale, init_scale)``. Draw order: embedding,
then for each layer Q, K, V, O, MLP-in, MLP-out, all row-major. Norm gains
are ones and consume no draws.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _backend
from .attention import AttentionTrace, TraceMode, attend
from .errors import ValidationError
from .rope import RopeConfig
from .scaling import ScalingPolicy

RMS_EPS = 1e-6
MLP_RATIO = 4
WEIGHT_MAGIC = "TTW1"


@dataclass(frozen=True)
class ModelSpec:
    n_layers: int = 4
    n_heads: int = 8
    d_head: int = 32
    vocab_size: int = 32000
    max_positions: int = 4096
    seed: int = 0
    init_scale: float = 0.02

    def __post_init__(self):
        if self.n_layers < 1 or self.n_heads < 1:
            raise ValidationError("n_layers and n_heads must be >= 1")
        if self.d_head < 2 or self.d_head % 2:
            raise ValidationError(f"d_head must be even and >= 2, got {self.d_head}")
        if self.vocab_size < 2:
            raise ValidationError(f"vocab_size must be >= 2, got {self.vocab_size}")
        if self.max_positions < 1:
            raise ValidationError("max_positions must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValidationError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if not self.init_scale > 0:
            raise ValidationError("init_scale must be positive")

    @property
    def d_model(self) -> int:
        return self.n_heads * self.d_head


@dataclass
class LayerWeights:
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    w_in: np.ndarray
    w_out: np.ndarray
    attn_norm: np.ndarray
    mlp_norm: np.ndarray

    def tensors(self):
        return [self.wq, self.wk, self.wv, self.wo, self.w_in, self.w_out,
                self.attn_norm, self.mlp_norm]


@dataclass
class ModelWeights:
    embedding: np.ndarray
    layers: list[LayerWeights]
    final_norm: np.ndarray

    def tensors(self):
        """All tensors in weight-file order."""
        out = [self.embedding]
        for layer in self.layers:
            out.extend(layer.tensors())
        out.append(self.final_norm)
        return out

    def with_zero_query(self) -> ModelWeights:
        """Copy with every query projection zeroed (forces uniform attention)."""
        layers = [dataclasses.replace(lw, wq=np.zeros_like(lw.wq)) for lw in self.layers]
        return dataclasses.replace(self, layers=layers)


def _layer_shapes(spec: ModelSpec):
    dm, dh = spec.d_model, MLP_RATIO * spec.d_model
    return [(dm, dm)] * 4 + [(dm, dh), (dh, dm)]


def init_weights(spec: ModelSpec) -> ModelWeights:
    lo, hi = -spec.init_scale, spec.init_scale
    cursor = 0

    def draw(shape):
        nonlocal cursor
        flat = np.empty(int(np.prod(shape)))
        cursor = _backend.splitmix64_fill(spec.seed, cursor, flat, lo, hi)
        return flat.reshape(shape)

    embedding = draw((spec.vocab_size, spec.d_model))
    layers = []
    for _ in range(spec.n_layers):
        mats = [draw(shape) for shape in _layer_shapes(spec)]
        layers.append(LayerWeights(*mats, np.ones(spec.d_model), np.ones(spec.d_model)))
    return ModelWeights(embedding, layers, np.ones(spec.d_model))


def save_weights(path, spec: ModelSpec, weights: ModelWeights):
    header = f"{WEIGHT_MAGIC} {spec.n_layers} {spec.n_heads} {spec.d_head} {spec.vocab_size}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for t in weights.tensors():
            fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())


def load_weights(path, spec: ModelSpec) -> ModelWeights:
    """Read a weight file; its header must match ``spec``'s shape fields."""
    data = Path(path).read_bytes()
    newline = data.find(b"\n")
    if newline < 0:
        raise ValidationError(f"{path}: missing header line")
    fields = data[:newline].decode("ascii", errors="replace").split()
    if len(fields) != 5 or fields[0] != WEIGHT_MAGIC:
        raise ValidationError(f"{path}: bad header {data[:newline]!r}")
    dims = tuple(int(x) for x in fields[1:])
    expected = (spec.n_layers, spec.n_heads, spec.d_head, spec.vocab_size)
    if dims != expected:
        raise ValidationError(f"{path}: header dims {dims} do not match model {expected}")
    values = np.frombuffer(data, dtype="<f8", offset=newline + 1).astype(np.float64)

    dm = spec.d_model
    shapes = [(spec.vocab_size, dm)]
    for _ in range(spec.n_layers):
        shapes += _layer_shapes(spec) + [(dm,), (dm,)]
    shapes.append((dm,))
    total = sum(int(np.prod(s)) for s in shapes)
    if values.size != total:
        raise ValidationError(f"{path}: expected {total} floats, found {values.size}")
    if not np.all(np.isfinite(values)):
        raise ValidationError(f"{path}: non-finite weights")

    tensors, offset = [], 0
    for shape in shapes:
        size = int(np.prod(shape))
        tensors.append(values[offset:offset + size].reshape(shape).copy())
        offset += size
    layers = [LayerWeights(*tensors[1 + 8 * i: 9 + 8 * i]) for i in range(spec.n_layers)]
    return ModelWeights(tensors[0], layers, tensors[-1])


def rms_norm(x, gain):
    return x / np.sqrt(np.mean(x * x, axis=-1, keepdims=True) + RMS_EPS) * gain


def silu(x):
    return x / (1.0 + np.exp(-x))


def forward(spec: ModelSpec, weights: ModelWeights, tokens, rope: RopeConfig,
            policy: ScalingPolicy, trace: TraceMode | str = TraceMode.NONE,
            compute_logits: bool = True):
    """Run the model over one token sequence.

    Returns ``(logits, traces)``: logits ``(n, vocab_size)`` (``None`` when
    ``compute_logits`` is false) and one :class:`AttentionTrace` per layer
    (an empty list when tracing is off).
    """
    tokens = np.asarray(tokens)
    if tokens.ndim != 1 or tokens.size == 0:
        raise ValidationError("tokens must be a non-empty 1-D sequence")
    if not np.issubdtype(tokens.dtype, np.integer):
        raise ValidationError("token ids must be integers")
    if tokens.min() < 0 or tokens.max() >= spec.vocab_size:
        raise ValidationError(f"token id outside vocabulary of size {spec.vocab_size}")
    n = tokens.size
    if n > spec.max_positions:
        raise ValidationError(f"sequence of {n} tokens exceeds max_positions={spec.max_positions}")
    if rope.d != spec.d_head:
        raise ValidationError(f"rope.d={rope.d} does not match d_head={spec.d_head}")
    trace = TraceMode(trace)

    H, dh = spec.n_heads, spec.d_head
    x = weights.embedding[tokens]
    traces: list[AttentionTrace] = []
    for index, lw in enumerate(weights.layers):
        h = rms_norm(x, lw.attn_norm)
        q = (h @ lw.wq).reshape(n, H, dh).transpose(1, 0, 2)
        k = (h @ lw.wk).reshape(n, H, dh).transpose(1, 0, 2)
        v = (h @ lw.wv).reshape(n, H, dh).transpose(1, 0, 2)
        out, layer_trace = attend(q, k, v, index, rope, policy, trace)
        x = x + out.transpose(1, 0, 2).reshape(n, H * dh) @ lw.wo
        h = rms_norm(x, lw.mlp_norm)
        x = x + silu(h @ lw.w_in) @ lw.w_out
        if layer_trace is not None:
            traces.append(layer_trace)

    logits = rms_norm(x, weights.final_norm) @ weights.embedding.T if compute_logits else None
    return logits, traces
