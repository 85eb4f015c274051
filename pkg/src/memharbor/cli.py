"""Command-line interface.

Exit codes: 0 on success, 2 for usage or input errors, 1 for anything else.
A run profile (``key=value`` file) may be given with ``--config`` or through
``$MEMHARBOR_CONFIG``; explicit flags win over profile values.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from .config import RunProfile, load_profile
from .embedding import make_provider
from .engine import RetrievalConfig, RetrievalResult, retrieve
from .errors import MemHarborError
from .evaluation.ablation import EvalConfig, SystemVariant, run_ablation, write_report
from .evaluation.dataset import generate_dataset, load_queries, write_dataset
from .graph import build_graph, write_graph
from .model import MemoryStore, load_store, parse_dimensions, save_store, sort_dimensions
from .query import QueryProcessor, RuleBook
from .scoring import DimensionWeights

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Bad user input detected by the CLI itself."""


def _processor(profile: RunProfile, dimension: int) -> QueryProcessor:
    rules = RuleBook.load(profile.rules_dir) if profile.rules_dir else None
    return QueryProcessor(rules, make_provider(profile.embedding, dimension))


def _weights(profile: RunProfile) -> DimensionWeights:
    return DimensionWeights.load(profile.weights) if profile.weights else DimensionWeights()


def _store_path(args, profile: RunProfile) -> Path:
    path = args.store or profile.store
    if path is None:
        raise InputError("no store given (use --store or set store= in the profile)")
    return Path(path)


def _retrieval_config(args, profile: RunProfile, store: MemoryStore) -> RetrievalConfig:
    top_k = args.top_k if args.top_k is not None else profile.top_k
    if top_k < 1:
        raise InputError("--top-k must be >= 1")
    return RetrievalConfig(top_k=top_k, threshold=profile.threshold, weights=_weights(profile),
                           processor=_processor(profile, store.dimension))


def result_to_json(result: RetrievalResult) -> dict:
    return {
        "query": result.query.text if result.query else None,
        "strategy": [d.value for d in sort_dimensions(result.strategy_used)],
        "variants_used": result.variants_used,
        "ranked": [
            {
                "id": sm.memory.id,
                "user_id": sm.memory.user_id,
                "text": sm.memory.text,
                "timestamp": sm.memory.timestamp,
                "total": sm.total,
                "scores": {d.value: v for d, v in sm.per_dimension.items()},
            }
            for sm in result.ranked
        ],
        "response": result.response_text,
    }


def result_to_text(result: RetrievalResult) -> str:
    lines = [f"strategy: {','.join(d.value for d in sort_dimensions(result.strategy_used))}",
             f"variants: {result.variants_used}"]
    for rank, sm in enumerate(result.ranked, start=1):
        scores = " ".join(f"{d.value}={v:.4f}" for d, v in sm.per_dimension.items())
        lines.append(f"{rank}. {sm.memory.id} total={sm.total:.4f} [{scores}] {sm.memory.text}")
    lines.append(f"response: {result.response_text}")
    return "\n".join(lines)


def cmd_gen_dataset(args, profile: RunProfile) -> int:
    if args.n < 1:
        raise InputError("--n must be >= 1")
    seed = args.seed if args.seed is not None else profile.seed
    data = generate_dataset(seed, args.n)
    dim = profile.embedding.dimension or 64
    try:
        paths = write_dataset(data, args.out, _processor(profile, dim))
    except OSError as exc:
        raise InputError(f"cannot write to {args.out}: {exc}") from None
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_ingest(args, profile: RunProfile) -> int:
    path = _store_path(args, profile)
    store = load_store(path) if path.exists() else MemoryStore(args.dim or profile.embedding.dimension or 64)
    proc = _processor(profile, store.dimension)
    record_id = args.id or f"m{len(store):06d}"
    store.ingest(proc.make_record(record_id, args.user, args.text, args.timestamp, tuple(args.marker)))
    try:
        save_store(store, path)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from None
    print(record_id)
    return EXIT_OK


def cmd_query(args, profile: RunProfile) -> int:
    store = load_store(_store_path(args, profile))
    dims = None
    if args.dims:
        try:
            dims = parse_dimensions(args.dims)
        except ValueError as exc:
            raise InputError(str(exc)) from None
    graph = build_graph(store) if len(store) else None
    result = retrieve(args.text, args.user, store, graph, _retrieval_config(args, profile, store),
                      dimensions=dims, now=args.now, context_markers=tuple(args.marker))
    if args.format == "json":
        print(json.dumps(result_to_json(result), ensure_ascii=False, indent=2))
    else:
        print(result_to_text(result))
    return EXIT_OK


def cmd_eval(args, profile: RunProfile) -> int:
    if args.variant.lower() == "all":
        variants = tuple(SystemVariant)
    else:
        try:
            variants = (SystemVariant.parse(args.variant),)
        except ValueError as exc:
            raise InputError(str(exc)) from None
    store = load_store(_store_path(args, profile))
    queries = load_queries(args.dataset)
    config = EvalConfig(_retrieval_config(args, profile, store), profile.real_tech_usage)
    report = run_ablation(queries, store, config, variants)
    try:
        paths = write_report(report, args.out)
    except OSError as exc:
        raise InputError(f"cannot write to {args.out}: {exc}") from None
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_graph(args, profile: RunProfile) -> int:
    store = load_store(_store_path(args, profile))
    graph = build_graph(store, args.threshold)
    if args.out:
        write_graph(graph, args.out)
    else:
        write_graph(graph, sys.stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="memharbor", description="Multi-dimensional memory retrieval.")
    parser.add_argument("--config", help="run profile file (default: $MEMHARBOR_CONFIG)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-dataset", help="generate a seeded evaluation dataset and its store")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("ingest", help="analyze one text and append it to a store")
    p.add_argument("--store")
    p.add_argument("--user", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--timestamp", type=int, default=0)
    p.add_argument("--id")
    p.add_argument("--marker", action="append", default=[])
    p.add_argument("--dim", type=int, help="embedding dimension for a new store")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("query", help="retrieve memories for one query")
    p.add_argument("--store")
    p.add_argument("--text", required=True)
    p.add_argument("--dims", help="comma-separated dimensions (overrides strategy selection)")
    p.add_argument("--user", help="restrict to one user (default: all users)")
    p.add_argument("--top-k", type=int)
    p.add_argument("--now", type=int, help="query time (default: newest candidate memory)")
    p.add_argument("--marker", action="append", default=[], help="context marker of the query")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", help="evaluate one variant or the full ablation")
    p.add_argument("--store")
    p.add_argument("--dataset", required=True)
    p.add_argument("--variant", required=True, help="variant name or 'all'")
    p.add_argument("--out", required=True)
    p.add_argument("--top-k", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("graph", help="resolve entities and export the co-occurrence graph")
    p.add_argument("--store")
    p.add_argument("--threshold", type=float, default=0.85)
    p.add_argument("--out")
    p.set_defaults(func=cmd_graph)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        profile = load_profile(args.config)
        profile.check_paths()
        return args.func(args, profile)
    except (InputError, MemHarborError, OSError, ValueError) as exc:
        print(f"memharbor: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - last-resort exit code contract
        print(f"memharbor: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
