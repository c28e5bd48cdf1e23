"""Attention-logit multipliers ``t`` for the scaling schemes we compare.

Every policy maps ``(layer, position)`` to a positive multiplier applied to
the full logit row of the query at ``position``. ``position`` is 0-indexed;
the number of contextual tokens a causal query sees is ``position + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ValidationError

# ReRoPE's log_c(i) is 0 at i = 1; keep t strictly positive.
RE_ROPE_FLOOR = 1e-6


class ScalingKind(str, Enum):
    NONE = "None"
    CONSTANT = "Constant"
    YARN = "YaRN"
    CHIANG_LOG_N = "ChiangLogN"
    RE_ROPE = "ReRoPE"
    ENTROPY_AWARE = "EntropyAware"

    @classmethod
    def parse(cls, name: str | ScalingKind) -> ScalingKind:
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "").replace("_", "")
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        raise ValidationError(f"unknown scaling kind {name!r}")


def yarn_temperature(s: float) -> float:
    """YaRN's fitted logit multiplier ``0.1 ln s + 1``."""
    if s <= 0:
        raise ValidationError(f"scaling factor must be positive, got {s}")
    return 0.1 * math.log(s) + 1.0


@dataclass(frozen=True)
class ScalingPolicy:
    kind: ScalingKind = ScalingKind.NONE
    c: int = 4096
    s: float = 1.0
    n_train: int = 4096
    value: float = 1.0
    exempt_layers: frozenset[int] = field(default_factory=lambda: frozenset({0, 1}))

    def __post_init__(self):
        object.__setattr__(self, "kind", ScalingKind.parse(self.kind))
        object.__setattr__(self, "exempt_layers", frozenset(int(x) for x in self.exempt_layers))
        if self.c <= 1:
            raise ValidationError(f"scaling.c must exceed 1 (log base), got {self.c}")
        if self.s <= 0:
            raise ValidationError(f"scaling.s must be positive, got {self.s}")
        if self.n_train < 1:
            raise ValidationError(f"scaling.n_train must be positive, got {self.n_train}")
        if self.kind is ScalingKind.CONSTANT and not self.value > 0:
            raise ValidationError(f"constant scale must be positive, got {self.value}")
        if any(x < 0 for x in self.exempt_layers):
            raise ValidationError("exempt layer indices must be non-negative")

    @property
    def is_static(self) -> bool:
        """True when t depends on neither layer nor position."""
        return self.kind in (ScalingKind.NONE, ScalingKind.CONSTANT,
                             ScalingKind.YARN, ScalingKind.CHIANG_LOG_N)

    @property
    def label(self) -> str:
        if self.kind is ScalingKind.CONSTANT:
            return f"Constant({self.value!r})"
        return self.kind.value


def _check(layer, position):
    if layer < 0:
        raise ValidationError(f"layer must be >= 0, got {layer}")
    if position < 0:
        raise ValidationError(f"position must be >= 0, got {position}")


def logit_scale(policy: ScalingPolicy, layer: int, position: int) -> float:
    """Multiplier t for the query at ``position`` in ``layer``."""
    _check(layer, position)
    kind = policy.kind
    if kind is ScalingKind.NONE:
        return 1.0
    if kind is ScalingKind.CONSTANT:
        return float(policy.value)
    if kind is ScalingKind.YARN:
        return yarn_temperature(policy.s)
    if kind is ScalingKind.CHIANG_LOG_N:
        return math.log(policy.n_train)
    log_c = float(np.log(float(position + 1)) / np.log(float(policy.c)))
    if kind is ScalingKind.RE_ROPE:
        return max(log_c, RE_ROPE_FLOOR)
    if layer in policy.exempt_layers:
        return 1.0
    return max(log_c, 1.0)


def logit_scale_row(policy: ScalingPolicy, layer: int, n_tokens: int) -> np.ndarray:
    """Vector of t for query positions ``0 .. n_tokens-1``.

    Uses the same log routine as :func:`logit_scale`, so entries agree
    exactly.
    """
    if layer < 0:
        raise ValidationError(f"layer must be >= 0, got {layer}")
    kind = policy.kind
    if policy.is_static:
        return np.full(n_tokens, logit_scale(policy, layer, 0))
    if kind is ScalingKind.ENTROPY_AWARE and layer in policy.exempt_layers:
        return np.ones(n_tokens)
    i = np.arange(1, n_tokens + 1, dtype=np.float64)
    log_c = np.log(i) / np.log(float(policy.c))
    floor = RE_ROPE_FLOOR if kind is ScalingKind.RE_ROPE else 1.0
    return np.maximum(log_c, floor)


def scale_table(policy: ScalingPolicy, layers, positions) -> np.ndarray:
    """Grid of t with shape ``(len(layers), len(positions))``."""
    return np.array([[logit_scale(policy, layer, p) for p in positions] for layer in layers])
