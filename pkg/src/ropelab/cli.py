"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 validation error.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import logging
import sys

import numpy as np

from . import _backend
from .config import RunConfig, load_config
from .errors import ValidationError
from .model import init_weights, load_weights
from .profiler import (ModelInputs, compare_methods, default_positions, load_documents,
                       write_documents, write_per_doc_csv, write_per_head_csv,
                       write_report_csv)
from .rope import Method, default_policy, write_coefficient_csv
from .scaling import ScalingKind, ScalingPolicy, scale_table

logger = logging.getLogger("ropelab")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_VALIDATION = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text):
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="run configuration file")
    parser.add_argument("--output", default=default, help="output file (default: stdout)")
    parser.add_argument("--seed", type=_u64, default=default, help="override model.seed")
    parser.add_argument("--verbose", action="store_true",
                        default=argparse.SUPPRESS if suppress else False)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ropelab", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("dump-coeffs", parents=[common], help="write rope coefficient CSV")
    p.add_argument("--positions", type=_int_list, default=[0, 1, 1000])
    p.add_argument("--t", type=float, default=None,
                   help="logit scale folded into the coefficients (default: the method's static t)")

    for name, help_text in (("profile", "profile attention entropy"),
                            ("compare", "profile several methods on the same inputs")):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--documents", help="document file (overrides profiler.documents)")
        p.add_argument("--limit", type=int, help="maximum number of documents")
        p.add_argument("--positions", type=_int_list)
        p.add_argument("--zero-q", action="store_true", help="zero every query projection")
        p.add_argument("--per-head", action="store_true", help="also write per-head entropies")
        p.add_argument("--workers", type=int)
        if name == "compare":
            p.add_argument("--methods", required=True,
                           help="comma list of [label=]METHOD[/POLICY[:VALUE]] entries")

    p = sub.add_parser("scale-table", parents=[common], help="print the logit-scale grid")
    p.add_argument("--layers", type=_int_list, default=None)
    p.add_argument("--positions", type=_int_list, default=None)

    p = sub.add_parser("make-docs", parents=[common], help="write seeded random token documents")
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--length", type=int, default=2048)
    return parser


@contextlib.contextmanager
def _open_out(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def cmd_dump_coeffs(args, cfg: RunConfig):
    if any(p < 0 for p in args.positions):
        raise ValidationError("positions must be non-negative")
    if args.t is not None and not args.t > 0:
        raise ValidationError("--t must be positive")
    with _open_out(args.output) as out:
        write_coefficient_csv(out, [cfg.rope], args.positions, args.t)


def cmd_scale_table(args, cfg: RunConfig):
    layers = args.layers if args.layers is not None else list(range(cfg.model.n_layers))
    positions = args.positions if args.positions is not None else \
        [p for p in default_positions(4 * cfg.scaling.c)]
    if any(x < 0 for x in layers) or any(p < 0 for p in positions):
        raise ValidationError("layers and positions must be non-negative")
    grid = scale_table(cfg.scaling, layers, positions)
    if args.output:
        with _open_out(args.output) as out:
            out.write("layer,position,t\n")
            for i, layer in enumerate(layers):
                for j, p in enumerate(positions):
                    out.write(f"{layer},{p},{float(grid[i, j])!r}\n")
    width = max(10, max(len(str(p)) for p in positions) + 2)
    print(f"# policy={cfg.scaling.label} c={cfg.scaling.c}; columns are query positions (0-indexed)")
    print("layer".ljust(7) + "".join(str(p).rjust(width) for p in positions))
    for i, layer in enumerate(layers):
        print(str(layer).ljust(7) + "".join(f"{grid[i, j]:.6f}".rjust(width)
                                            for j in range(len(positions))))


def _model_inputs(cfg: RunConfig, zero_q: bool):
    weights = load_weights(cfg.weights_path, cfg.model) if cfg.weights_path else init_weights(cfg.model)
    if zero_q:
        weights = weights.with_zero_query()
    return weights


def _profile_settings(args, cfg: RunConfig):
    prof = cfg.profiler
    path = args.documents or prof.documents
    if not path:
        raise ValidationError("no document file: set profiler.documents or pass --documents")
    positions = args.positions or prof.positions or default_positions(cfg.model.max_positions)
    limit = args.limit if args.limit is not None else prof.limit
    output = args.output or prof.output
    return path, positions, limit, output


def parse_run(entry: str, cfg: RunConfig):
    """``[label=]METHOD[/POLICY[:VALUE]]`` -> ``(label, rope, policy)``."""
    label, eq, rest = entry.partition("=")
    if not eq:
        label, rest = "", entry
    method_text, slash, policy_text = rest.partition("/")
    rope = dataclasses.replace(cfg.rope, method=Method.parse(method_text.strip()))
    if slash:
        kind_text, colon, value = policy_text.partition(":")
        kind = ScalingKind.parse(kind_text.strip())
        policy = dataclasses.replace(cfg.scaling, kind=kind,
                                     value=float(value) if colon else cfg.scaling.value)
    else:
        policy = dataclasses.replace(default_policy(rope), c=cfg.scaling.c,
                                     exempt_layers=cfg.scaling.exempt_layers)
    if not label:
        label = rope.label if not slash else f"{rope.label}/{policy.label}"
    return label.strip(), rope, policy


def _summary(reports, stream):
    for report in reports:
        lo, hi = 0, len(report.positions) - 1
        base = report.uniform_baseline
        print(f"[{report.label}] positions {report.positions[lo]}..{report.positions[hi]}, "
              f"docs at max position: {int(report.n_docs[hi])}", file=stream)
        print(f"  {'layer':>5} {'H@min':>10} {'H@max':>10} {'uniform@min':>12} {'uniform@max':>12}",
              file=stream)
        for layer in range(report.n_layers):
            print(f"  {layer:>5} {report.mean[layer, lo]:>10.6f} {report.mean[layer, hi]:>10.6f} "
                  f"{base[lo]:>12.6f} {base[hi]:>12.6f}", file=stream)


def _run_profiles(args, cfg: RunConfig, runs):
    path, positions, limit, output = _profile_settings(args, cfg)
    zero_q = args.zero_q or cfg.profiler.zero_q
    per_head = args.per_head or cfg.profiler.per_head
    verbose = args.verbose or cfg.profiler.verbose
    workers = args.workers or cfg.profiler.workers
    try:
        docs = load_documents(path, limit)
    except OSError as exc:
        raise OSError(f"cannot read documents {path}: {exc.strerror or exc}") from None
    weights = _model_inputs(cfg, zero_q)
    logger.info("profiling %d documents at %d positions (backend=%s)",
                len(docs), len(positions), _backend.BACKEND)
    reports = compare_methods(cfg.model, weights, runs, docs, positions,
                              keep_per_doc=verbose, per_head=per_head, workers=workers)
    reports = list(reports.values())
    with _open_out(output) as out:
        write_report_csv(out, reports)
    if output and verbose:
        with _open_out(output + ".per_doc.csv") as out:
            write_per_doc_csv(out, reports)
    if output and per_head:
        with _open_out(output + ".per_head.csv") as out:
            write_per_head_csv(out, reports)
    _summary(reports, sys.stdout if output else sys.stderr)


def cmd_profile(args, cfg: RunConfig):
    _run_profiles(args, cfg, [(cfg.rope.label, cfg.rope, cfg.scaling)])


def cmd_compare(args, cfg: RunConfig):
    entries = [e for e in args.methods.split(",") if e.strip()]
    runs = [parse_run(e, cfg) for e in entries]
    _run_profiles(args, cfg, runs)


def cmd_make_docs(args, cfg: RunConfig):
    if args.count < 1 or args.length < 1:
        raise ValidationError("--count and --length must be positive")
    if not args.output:
        raise ValidationError("make-docs needs --output")
    rng = np.random.default_rng(cfg.model.seed)
    docs = rng.integers(0, cfg.model.vocab_size, size=(args.count, args.length))
    write_documents(args.output, docs)


COMMANDS = {
    "dump-coeffs": cmd_dump_coeffs,
    "profile": cmd_profile,
    "compare": cmd_compare,
    "scale-table": cmd_scale_table,
    "make-docs": cmd_make_docs,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = _load(args)
        COMMANDS[args.command](args, cfg)
    except ValidationError as exc:
        print(f"ropelab {args.command}: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"ropelab {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
