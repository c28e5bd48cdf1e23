"""Attention-entropy profiling over a document set.

For every document and requested query position the per-head entropy of
that query's attention row is averaged over heads, then mean and standard
deviation (population, ``ddof=0``) are taken across the documents long
enough to contain the position.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .attention import TraceMode
from .errors import ValidationError
from .model import ModelSpec, ModelWeights, forward
from .rope import RopeConfig
from .scaling import ScalingPolicy

logger = logging.getLogger(__name__)

REPORT_HEADER = ("label", "layer", "position", "mean_entropy", "std_entropy",
                 "uniform_baseline", "n_docs")


@dataclass
class DocumentSet:
    docs: list[np.ndarray]
    source_path: str = ""

    def __len__(self):
        return len(self.docs)


@dataclass(frozen=True)
class ModelInputs:
    spec: ModelSpec
    weights: ModelWeights = field(repr=False, compare=False)
    rope: RopeConfig
    policy: ScalingPolicy


@dataclass(frozen=True)
class EntropyRow:
    layer: int
    position: int
    mean_entropy: float
    std_entropy: float
    uniform_baseline: float
    n_docs: int


@dataclass
class EntropyReport:
    """Aggregated entropies indexed ``[layer, position_index]``.

    ``per_doc`` (``(docs, layers, positions)``, NaN where a document is too
    short) and ``per_head`` (``(layers, heads, positions)``) are filled
    only when requested.
    """

    label: str
    positions: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    n_docs: np.ndarray
    per_doc: np.ndarray | None = None
    per_head: np.ndarray | None = None

    @property
    def n_layers(self) -> int:
        return self.mean.shape[0]

    @property
    def uniform_baseline(self) -> np.ndarray:
        return np.log(self.positions + 1.0)

    def rows(self) -> list[EntropyRow]:
        base = self.uniform_baseline
        return [
            EntropyRow(layer, int(p), float(self.mean[layer, i]), float(self.std[layer, i]),
                       float(base[i]), int(self.n_docs[i]))
            for layer in range(self.n_layers)
            for i, p in enumerate(self.positions)
        ]


def default_positions(max_positions: int) -> list[int]:
    """``15, 31, 63, ...`` below ``max_positions``."""
    out, p = [], 16
    while p - 1 < max_positions:
        out.append(p - 1)
        p *= 2
    return out


def parse_document_line(line: str) -> np.ndarray:
    ids = [int(tok) for tok in line.split()]
    if not ids:
        raise ValueError("empty document")
    if min(ids) < 0:
        raise ValueError("negative token id")
    return np.asarray(ids, dtype=np.int64)


def load_documents(path, limit: int | None = None) -> DocumentSet:
    """Read one document per line of space-separated token ids.

    Malformed or empty lines are logged with their line number and skipped.
    Raises ``OSError`` if the file cannot be read and
    :class:`ValidationError` if no line parses.
    """
    if limit is not None and limit < 1:
        raise ValidationError(f"document limit must be positive, got {limit}")
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if limit is not None and len(docs) >= limit:
                break
            try:
                docs.append(parse_document_line(line))
            except ValueError as exc:
                logger.warning("%s:%d: skipped (%s)", path, lineno, exc)
    if not docs:
        raise ValidationError(f"{path}: no valid documents")
    return DocumentSet(docs, str(path))


def _check_positions(positions, spec: ModelSpec) -> np.ndarray:
    pos = np.asarray(list(positions), dtype=np.int64)
    if pos.ndim != 1 or pos.size == 0:
        raise ValidationError("need at least one position")
    if np.any(np.diff(pos) <= 0):
        raise ValidationError("positions must be strictly ascending")
    if pos[0] < 0 or pos[-1] >= spec.max_positions:
        raise ValidationError(f"positions must lie in [0, {spec.max_positions - 1}]")
    return pos


def _doc_entropies(model: ModelInputs, doc: np.ndarray, positions: np.ndarray):
    # causal rows <= max position do not depend on later tokens
    n = min(len(doc), int(positions[-1]) + 1)
    _, traces = forward(model.spec, model.weights, doc[:n], model.rope, model.policy,
                        trace=TraceMode.ENTROPY, compute_logits=False)
    valid = positions < n
    per_head = np.full((len(traces), model.spec.n_heads, len(positions)), np.nan)
    for layer, tr in enumerate(traces):
        per_head[layer][:, valid] = tr.entropy[:, positions[valid]]
    return per_head


def profile(model: ModelInputs, docs: DocumentSet, positions: Sequence[int], label: str = "",
            keep_per_doc: bool = False, per_head: bool = False, workers: int = 1) -> EntropyReport:
    pos = _check_positions(positions, model.spec)
    for d in docs.docs:
        if len(d) and d.max() >= model.spec.vocab_size:
            raise ValidationError(f"document token id {int(d.max())} outside vocabulary")
    longest = max(len(d) for d in docs.docs)
    if longest <= pos[-1]:
        raise ValidationError(
            f"no document long enough for position {int(pos[-1])} (longest has {longest} tokens)")

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda d: _doc_entropies(model, d, pos), docs.docs))
    else:
        results = [_doc_entropies(model, d, pos) for d in docs.docs]

    heads = np.stack(results)                       # (docs, layers, heads, positions)
    layer_values = heads.mean(axis=2)               # (docs, layers, positions)
    present = ~np.isnan(layer_values[:, 0, :])      # (docs, positions)
    counts = present.sum(axis=0)
    mean = _masked_mean(layer_values, present)
    std = _masked_std(layer_values, present, mean)
    return EntropyReport(
        label=label or model.rope.label,
        positions=pos,
        mean=mean,
        std=std,
        n_docs=counts,
        per_doc=layer_values if keep_per_doc else None,
        per_head=np.nanmean(heads, axis=0) if per_head else None,
    )


def _masked_mean(values, present):
    total = np.where(present[:, None, :], values, 0.0).sum(axis=0)
    counts = present.sum(axis=0)
    return np.divide(total, counts, out=np.full(total.shape, np.nan), where=counts > 0)


def _masked_std(values, present, mean):
    sq = np.where(present[:, None, :], (values - mean) ** 2, 0.0).sum(axis=0)
    counts = present.sum(axis=0)
    return np.sqrt(np.divide(sq, counts, out=np.full(sq.shape, np.nan), where=counts > 0))


def compare_methods(spec: ModelSpec, weights: ModelWeights,
                    runs: Iterable[tuple[str, RopeConfig, ScalingPolicy]], docs: DocumentSet,
                    positions: Sequence[int], **kwargs) -> dict[str, EntropyReport]:
    """Profile each ``(label, rope, policy)`` on the same model and documents."""
    runs = list(runs)
    labels = [label for label, _, _ in runs]
    dupes = sorted({x for x in labels if labels.count(x) > 1})
    if dupes:
        raise ValidationError(f"duplicate comparison labels: {', '.join(dupes)}")
    return {
        label: profile(ModelInputs(spec, weights, rope, policy), docs, positions, label=label, **kwargs)
        for label, rope, policy in runs
    }


def _fmt(x: float) -> str:
    return repr(float(x))


def write_report_csv(stream: TextIO, reports: Iterable[EntropyReport]):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    for report in reports:
        for row in report.rows():
            writer.writerow([report.label, row.layer, row.position, _fmt(row.mean_entropy),
                             _fmt(row.std_entropy), _fmt(row.uniform_baseline), row.n_docs])


def write_per_doc_csv(stream: TextIO, reports: Iterable[EntropyReport]):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("label", "doc", "layer", "position", "entropy"))
    for report in reports:
        if report.per_doc is None:
            continue
        for doc, layer, i in np.argwhere(~np.isnan(report.per_doc)):
            writer.writerow([report.label, int(doc), int(layer), int(report.positions[i]),
                             _fmt(report.per_doc[doc, layer, i])])


def write_per_head_csv(stream: TextIO, reports: Iterable[EntropyReport]):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("label", "layer", "head", "position", "mean_entropy"))
    for report in reports:
        if report.per_head is None:
            continue
        layers, heads, npos = report.per_head.shape
        for layer in range(layers):
            for head in range(heads):
                for i in range(npos):
                    writer.writerow([report.label, layer, head, int(report.positions[i]),
                                     _fmt(report.per_head[layer, head, i])])


def write_documents(path: str | Path, docs: Iterable[Sequence[int]]):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            fh.write(" ".join(str(int(t)) for t in doc) + "\n")
