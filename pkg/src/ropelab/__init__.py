"""RoPE context-extension variants, attention-logit scaling and
attention-entropy profiling on a desk-scale transformer."""

from ._backend import BACKEND
from .attention import AttentionTrace, TraceMode, attend, attention_entropy, softmax_entropy
from .errors import ValidationError
from .model import ModelSpec, ModelWeights, forward, init_weights, load_weights, save_weights
from .profiler import (DocumentSet, EntropyReport, ModelInputs, compare_methods, load_documents,
                       profile)
from .rope import (FrequencySpectrum, Method, NtkConvention, RopeConfig, apply_rope,
                   coefficient_h, compute_theta, effective_position, gamma)
from .scaling import ScalingKind, ScalingPolicy, logit_scale

__all__ = [
    "BACKEND", "AttentionTrace", "TraceMode", "attend", "attention_entropy", "softmax_entropy",
    "ValidationError", "ModelSpec", "ModelWeights", "forward", "init_weights", "load_weights",
    "save_weights", "DocumentSet", "EntropyReport", "ModelInputs", "compare_methods",
    "load_documents", "profile", "FrequencySpectrum", "Method", "NtkConvention", "RopeConfig",
    "apply_rope", "coefficient_h", "compute_theta", "effective_position", "gamma",
    "ScalingKind", "ScalingPolicy", "logit_scale",
]
