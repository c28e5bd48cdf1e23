"""Run configuration files.

Line-oriented ``section.key = value`` text with ``#`` comments. Sections are
``model``, ``rope``, ``scaling`` and ``profiler``; list values are
comma-separated. Example::

    model.n_layers = 4
    rope.method = YaRN
    rope.c = 4096
    rope.c_target = 16384
    scaling.kind = EntropyAware
    scaling.exempt_layers = 0, 1
    profiler.positions = 1023, 2047
    profiler.documents = docs.txt
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

from .errors import ValidationError
from .model import ModelSpec
from .rope import RopeConfig, default_policy
from .scaling import ScalingKind, ScalingPolicy


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.replace(",", " ").split()]


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_MODEL_KEYS = {"n_layers": int, "n_heads": int, "d_head": int, "vocab_size": int,
               "max_positions": int, "seed": int, "init_scale": float, "weights": str}
_ROPE_KEYS = {"method": str, "d": int, "b": float, "c": int, "c_target": int, "s": float,
              "ntk_alpha": float, "ntk_beta": float, "ntk_convention": str, "abf_base": float}
_SCALING_KEYS = {"kind": str, "c": int, "s": float, "n_train": int, "value": float,
                 "exempt_layers": _int_list}
_PROFILER_KEYS = {"positions": _int_list, "documents": str, "limit": int, "output": str,
                  "verbose": _bool, "zero_q": _bool, "per_head": _bool, "workers": int}

SECTIONS = {"model": _MODEL_KEYS, "rope": _ROPE_KEYS, "scaling": _SCALING_KEYS,
            "profiler": _PROFILER_KEYS}


@dataclass
class ProfilerSettings:
    positions: list[int] | None = None
    documents: str | None = None
    limit: int | None = None
    output: str | None = None
    verbose: bool = False
    zero_q: bool = False
    per_head: bool = False
    workers: int = 1


@dataclass
class RunConfig:
    model: ModelSpec = field(default_factory=ModelSpec)
    rope: RopeConfig = field(default_factory=lambda: RopeConfig(d=ModelSpec().d_head))
    scaling: ScalingPolicy = field(default_factory=ScalingPolicy)
    profiler: ProfilerSettings = field(default_factory=ProfilerSettings)
    weights_path: str | None = None

    def with_seed(self, seed: int) -> RunConfig:
        return dataclasses.replace(self, model=dataclasses.replace(self.model, seed=seed))


def parse_text(text: str, source: str = "<config>") -> dict[str, dict[str, object]]:
    values: dict[str, dict[str, object]] = {name: {} for name in SECTIONS}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValidationError(f"{source}:{lineno}: expected 'section.key = value'")
        section, dot, name = key.strip().partition(".")
        if not dot or section not in SECTIONS:
            raise ValidationError(f"{source}:{lineno}: unknown section in {key.strip()!r}")
        if name not in SECTIONS[section]:
            raise ValidationError(f"{source}:{lineno}: unknown key {key.strip()!r}")
        try:
            values[section][name] = SECTIONS[section][name](value.strip())
        except ValueError as exc:
            raise ValidationError(f"{source}:{lineno}: bad value for {key.strip()}: {exc}") from None
    return values


def build(values: dict[str, dict[str, object]]) -> RunConfig:
    """Assemble a :class:`RunConfig` and re-check cross-field constraints."""
    model_vals = dict(values.get("model", {}))
    weights_path = model_vals.pop("weights", None)
    model = ModelSpec(**model_vals)

    rope_vals = dict(values.get("rope", {}))
    rope_vals.setdefault("d", model.d_head)
    if rope_vals["d"] != model.d_head:
        raise ValidationError(f"rope.d={rope_vals['d']} must equal model.d_head={model.d_head}")
    s = rope_vals.pop("s", None)
    c = rope_vals.get("c", RopeConfig.c)
    if s is not None:
        target = s * c
        if "c_target" in rope_vals:
            if not math.isclose(rope_vals["c_target"] / c, s, rel_tol=0, abs_tol=1e-12):
                raise ValidationError(
                    f"rope.s={s} disagrees with rope.c_target/rope.c={rope_vals['c_target'] / c}")
        elif abs(target - round(target)) > 1e-9:
            raise ValidationError(f"rope.s={s} times rope.c={c} is not an integer context window")
        else:
            rope_vals["c_target"] = int(round(target))
    rope = RopeConfig(**rope_vals)

    scaling_vals = dict(values.get("scaling", {}))
    if "kind" not in scaling_vals:
        scaling_vals["kind"] = default_policy(rope).kind
    scaling_vals["kind"] = ScalingKind.parse(scaling_vals["kind"])
    scaling_vals.setdefault("c", rope.c)
    scaling_vals.setdefault("s", rope.s)
    if "exempt_layers" in scaling_vals:
        scaling_vals["exempt_layers"] = frozenset(scaling_vals["exempt_layers"])
    scaling = ScalingPolicy(**scaling_vals)

    prof = ProfilerSettings(**values.get("profiler", {}))
    return RunConfig(model, rope, scaling, prof, weights_path)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return build(parse_text(text, str(path)))
