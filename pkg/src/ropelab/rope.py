"""Rotary position embedding and its context-extension variants.

Every variant is expressed through three knobs: the effective position fed
to the rotation, the effective base that generates the per-pair
frequencies, and the attention-logit multiplier ``t``. The coefficient a
query/key pair ``j`` sees at position ``m`` is ``sqrt(t) * cos(m' theta_j)``
(and the matching sine), with pairs indexed ``j = 0 .. d/2 - 1`` so that
``theta_0 = 1`` for plain RoPE.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Iterable, TextIO

import numpy as np

from . import _backend
from .errors import ValidationError
from .scaling import ScalingKind, ScalingPolicy, yarn_temperature


class Method(str, Enum):
    ROPE = "RoPE"
    PI = "PI"
    NTK_AWARE = "NTK-Aware"
    NTK_BY_PARTS = "NTK-By-Parts"
    YARN = "YaRN"
    ABF = "ABF"
    ENTROPY_AWARE_ABF = "EntropyAwareABF"

    @classmethod
    def parse(cls, name: str | Method) -> Method:
        if isinstance(name, cls):
            return name
        key = _normalize(name)
        for method in cls:
            if _normalize(method.value) == key:
                return method
        raise ValidationError(f"unknown rope method {name!r}")


def _normalize(name) -> str:
    return "".join(ch for ch in str(name).lower() if ch.isalnum())


class NtkConvention(str, Enum):
    PAPER_LITERAL = "paper-literal"
    YARN_STYLE = "yarn-style"

    @classmethod
    def parse(cls, name: str | NtkConvention) -> NtkConvention:
        if isinstance(name, cls):
            return name
        key = _normalize(name)
        for conv in cls:
            if _normalize(conv.value) == key:
                return conv
        raise ValidationError(f"unknown ntk convention {name!r}")


_PART_METHODS = (Method.NTK_BY_PARTS, Method.YARN)
_ABF_METHODS = (Method.ABF, Method.ENTROPY_AWARE_ABF)


@dataclass(frozen=True)
class RopeConfig:
    """Immutable description of one position-encoding method.

    ``s`` is always derived as ``c_target / c``. ``c_target`` defaults to
    ``c`` (no extension).
    """

    method: Method = Method.ROPE
    d: int = 128
    b: float = 10000.0
    c: int = 4096
    c_target: int | None = None
    ntk_alpha: float = 1.0
    ntk_beta: float = 32.0
    ntk_convention: NtkConvention = NtkConvention.PAPER_LITERAL
    abf_base: float = 500000.0

    def __post_init__(self):
        object.__setattr__(self, "method", Method.parse(self.method))
        object.__setattr__(self, "ntk_convention", NtkConvention.parse(self.ntk_convention))
        if self.c_target is None:
            object.__setattr__(self, "c_target", self.c)
        if isinstance(self.d, bool) or int(self.d) != self.d or self.d < 2 or self.d % 2:
            raise ValidationError(f"head dimension d must be an even integer >= 2, got {self.d}")
        if not self.b > 0 or not math.isfinite(self.b):
            raise ValidationError(f"base b must be positive, got {self.b}")
        if not self.abf_base > 0 or not math.isfinite(self.abf_base):
            raise ValidationError(f"abf_base must be positive, got {self.abf_base}")
        if self.c < 1 or self.c_target < 1:
            raise ValidationError("context windows c and c_target must be positive")
        if not 0 < self.ntk_alpha < self.ntk_beta:
            raise ValidationError(
                f"need 0 < ntk_alpha < ntk_beta, got {self.ntk_alpha}, {self.ntk_beta}")

    @property
    def s(self) -> float:
        return self.c_target / self.c

    @property
    def label(self) -> str:
        return self.method.value


@dataclass(frozen=True)
class FrequencySpectrum:
    theta: np.ndarray

    def __len__(self):
        return len(self.theta)


@dataclass(frozen=True)
class EffectiveParams:
    position_map: Callable[[float], float]
    base_eff: float
    policy: ScalingPolicy


def base_eff(config: RopeConfig) -> float:
    method, b, d = config.method, config.b, config.d
    if method in _ABF_METHODS:
        return float(config.abf_base)
    if method is Method.NTK_AWARE:
        if config.ntk_convention is NtkConvention.YARN_STYLE:
            return b * config.s ** (d / (d - 2))
        return b ** (d / (d - 2))
    return float(b)


def rotations(j: int, config: RopeConfig) -> float:
    """Full turns pair ``j`` completes over the pretrained window."""
    wavelength = 2.0 * math.pi * config.b ** (2.0 * j / config.d)
    return config.c / wavelength


def gamma(j: int, config: RopeConfig) -> float:
    """Interpolation ramp for pair ``j``.

    In the paper-literal convention pairs that rotate more than
    ``ntk_beta`` times inside the window get 0 (fully interpolated), pairs
    below ``ntk_alpha`` get 1, with a linear ramp in between. The
    yarn-style convention flips that orientation.
    """
    if config.method not in _PART_METHODS:
        raise ValidationError(f"gamma is defined for NTK-By-Parts and YaRN, not {config.method.value}")
    if not 0 <= j < config.d // 2:
        raise ValidationError(f"pair index {j} outside 0..{config.d // 2 - 1}")
    r = rotations(j, config)
    alpha, beta = config.ntk_alpha, config.ntk_beta
    if r > beta:
        g = 0.0
    elif r < alpha:
        g = 1.0
    else:
        g = (beta - r) / (beta - alpha)
    if config.ntk_convention is NtkConvention.YARN_STYLE:
        return 1.0 - g
    return g


def part_factor(j: int, config: RopeConfig) -> float:
    g = gamma(j, config)
    return (1.0 - g) / config.s + g


@lru_cache(maxsize=256)
def _theta_cached(config: RopeConfig) -> np.ndarray:
    d = config.d
    j = np.arange(d // 2, dtype=np.float64)
    theta = base_eff(config) ** (-2.0 * j / d)
    if config.method in _PART_METHODS:
        theta = theta * np.array([part_factor(k, config) for k in range(d // 2)])
    theta.setflags(write=False)
    return theta


def compute_theta(config: RopeConfig) -> FrequencySpectrum:
    return FrequencySpectrum(_theta_cached(config))


def effective_position(m, config: RopeConfig):
    """Position fed to the rotation: ``m / s`` for PI, ``m`` otherwise."""
    if np.any(np.asarray(m) < 0):
        raise ValidationError("positions must be non-negative")
    if config.method is Method.PI:
        return np.asarray(m, dtype=np.float64) / config.s if np.ndim(m) else m / config.s
    return np.asarray(m, dtype=np.float64) if np.ndim(m) else m


def default_policy(config: RopeConfig) -> ScalingPolicy:
    """Logit scaling each method is published with."""
    if config.method is Method.YARN:
        return ScalingPolicy(ScalingKind.YARN, c=max(config.c, 2), s=config.s)
    if config.method is Method.ENTROPY_AWARE_ABF:
        return ScalingPolicy(ScalingKind.ENTROPY_AWARE, c=max(config.c, 2))
    return ScalingPolicy(ScalingKind.NONE, c=max(config.c, 2))


def effective_params(config: RopeConfig) -> EffectiveParams:
    return EffectiveParams(
        position_map=lambda m: effective_position(m, config),
        base_eff=base_eff(config),
        policy=default_policy(config),
    )


def method_logit_scale(config: RopeConfig) -> float:
    """Static ``t`` listed for the method; dynamic schemes report 1."""
    if config.method is Method.YARN:
        return yarn_temperature(config.s)
    return 1.0


def rotation_tables(positions, config: RopeConfig) -> tuple[np.ndarray, np.ndarray]:
    """``cos``/``sin`` of ``m' theta_j`` with shape ``(len(positions), d/2)``."""
    pos = effective_position(np.atleast_1d(np.asarray(positions)), config)
    angles = np.multiply.outer(pos, compute_theta(config).theta)
    return np.cos(angles), np.sin(angles)


def apply_rope(x, m, config: RopeConfig) -> np.ndarray:
    """Rotate ``x`` (shape ``(d,)`` or ``(n, d)``) to position(s) ``m``."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    rows = np.ascontiguousarray(x.reshape(1, -1) if single else x)
    if rows.shape[1] != config.d:
        raise ValidationError(f"vector length {rows.shape[1]} does not match d={config.d}")
    positions = np.atleast_1d(np.asarray(m))
    if positions.shape[0] != rows.shape[0]:
        raise ValidationError(f"{positions.shape[0]} positions for {rows.shape[0]} vectors")
    cos_t, sin_t = rotation_tables(positions, config)
    out = np.empty_like(rows)
    _backend.rope_rotate(rows, np.ascontiguousarray(cos_t), np.ascontiguousarray(sin_t), out)
    return out[0] if single else out


def coefficient_h(m, j: int, config: RopeConfig, t: float = 1.0) -> tuple[float, float]:
    if not t > 0:
        raise ValidationError(f"logit scale t must be positive, got {t}")
    if not 0 <= j < config.d // 2:
        raise ValidationError(f"pair index {j} outside 0..{config.d // 2 - 1}")
    angle = effective_position(m, config) * compute_theta(config).theta[j]
    root = math.sqrt(t)
    return root * math.cos(angle), root * math.sin(angle)


def coefficient_table(config: RopeConfig, positions: Iterable[int], t: float | None = None) -> list[tuple]:
    """Rows ``(method, j, theta, position, cos_coeff, sin_coeff)``.

    ``t`` defaults to the method's static multiplier.
    """
    if t is None:
        t = method_logit_scale(config)
    theta = compute_theta(config).theta
    rows = []
    for j in range(config.d // 2):
        for m in positions:
            cos_c, sin_c = coefficient_h(m, j, config, t)
            rows.append((config.label, j, float(theta[j]), int(m), cos_c, sin_c))
    return rows


COEFF_HEADER = ("method", "j", "theta", "position", "cos_coeff", "sin_coeff")


def write_coefficient_csv(stream: TextIO, configs: Iterable[RopeConfig], positions, t: float | None = None):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(COEFF_HEADER)
    for config in configs:
        for row in coefficient_table(config, positions, t):
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
