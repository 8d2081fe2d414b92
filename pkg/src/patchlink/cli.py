"""Command-line entry points: train, evaluate, predict, fetch, serve."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from .embedding import (
    EmbeddingCache,
    EmbeddingError,
    EmbeddingProvider,
    FallbackProvider,
    RemoteProvider,
)
from .evaluation import (
    DEFAULT_KS,
    DEFAULT_WINDOWS,
    METHODS,
    EvalConfig,
    EvalError,
    build_training_pairs,
    run_evaluation,
)
from .forest import ForestError, TrainConfig, load_model, save_model, train
from .gerrit import GerritClient, GerritConfig, GerritError
from .pipeline import RankRequest, rank_candidates
from .records import (
    RecordError,
    WindowConfig,
    WindowMode,
    dump_changes_file,
    parse_changes_file,
    parse_links_file,
)
from .report import format_table, render_report_figures, write_report_jsonl
from .service import ServiceConfig
from .service import serve as run_service

logger = logging.getLogger(__name__)


class CliError(Exception):
    pass


def _csv_ints(value: str) -> tuple[int, ...]:
    return tuple(int(part) for part in value.split(",") if part.strip())


def _csv_strs(value: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in value.split(",") if part.strip())


def _when(value: str) -> datetime:
    dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).replace(microsecond=0)


def _provider_from_args(args: argparse.Namespace) -> EmbeddingProvider:
    url = args.embed_url or os.environ.get("EMBED_URL")
    if url:
        return RemoteProvider(url)
    return FallbackProvider()


def _gerrit_config(args: argparse.Namespace, required: bool) -> GerritConfig | None:
    base_url = args.gerrit_url or os.environ.get("GERRIT_URL")
    if not base_url:
        if required:
            raise CliError("--gerrit-url or the GERRIT_URL env var is required")
        return None
    return GerritConfig(
        base_url=base_url,
        username=os.environ.get("GERRIT_USER"),
        http_password=os.environ.get("GERRIT_HTTP_PASSWORD"),
    )


def _load_changes(path: str) -> list:
    with open(path, "rb") as fh:
        return parse_changes_file(fh)


def _load_links(path: str) -> list:
    with open(path, "rb") as fh:
        return parse_links_file(fh)


def cmd_train(args: argparse.Namespace) -> int:
    changes = _load_changes(args.changes)
    links = _load_links(args.links)
    provider = _provider_from_args(args)
    pairs = build_training_pairs(
        changes,
        links,
        provider,
        EmbeddingCache(),
        window_days=args.window_days,
        negatives_per_positive=args.negatives_per_positive,
        seed=args.seed,
    )
    config = TrainConfig(n_trees=args.trees, max_depth=args.max_depth, seed=args.seed)
    model = train(pairs, config)
    save_model(model, Path(args.out))
    n_pos = sum(label for _, label in pairs)
    print(
        f"trained {model.n_trees} trees on {len(pairs)} pairs"
        f" ({n_pos} positive, {len(pairs) - n_pos} negative) -> {args.out}"
    )
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    changes = _load_changes(args.changes)
    links = _load_links(args.links)
    methods = tuple(args.methods)
    model = None
    if "learned" in methods:
        if not args.model:
            raise CliError("--model is required when evaluating the learned method")
        model = load_model(Path(args.model))
    config = EvalConfig(
        windows=tuple(args.windows),
        ks=tuple(args.k),
        methods=methods,
        seed=args.seed,
        window_mode=WindowMode(args.window_mode),
    )
    report = run_evaluation(
        changes,
        links,
        model,
        _provider_from_args(args),
        config,
        same_project=not args.cross_project,
    )
    out = Path(args.out)
    write_report_jsonl(report, out)
    sys.stdout.write(format_table(report))
    print(f"report: {out}")
    if not args.no_figures:
        figures_dir = Path(args.figures_dir) if args.figures_dir else out.parent
        for figure in render_report_figures(report, figures_dir):
            print(f"figure: {figure}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    changes = _load_changes(args.changes)
    by_key = {c.change_key: c for c in changes}
    if args.target not in by_key:
        raise CliError(f"unknown change_key {args.target!r} in {args.changes}")
    model = load_model(Path(args.model))
    request = RankRequest(
        target=by_key[args.target],
        pool=tuple(changes),
        window=WindowConfig(days=args.window_days, mode=WindowMode(args.window_mode)),
        top_k=args.top_k,
    )
    predictions = rank_candidates(
        request,
        model,
        _provider_from_args(args),
        EmbeddingCache(),
        same_project=not args.cross_project,
    )
    for p in predictions:
        confidence = round(100 * p.score)
        print(f"{p.rank}\t{p.change_key}\t{p.score:.6f}\t{confidence}%\t{p.url}\t{p.subject}")
    if not predictions:
        logger.info("no candidates in the %d-day window", args.window_days)
    return 0


def cmd_fetch(args: argparse.Namespace) -> int:
    config = _gerrit_config(args, required=True)
    client = GerritClient(config)
    records = client.query_changes(args.project, args.since, args.until, limit=args.limit)
    with open(args.out, "w", encoding="utf-8") as fh:
        dump_changes_file(records, fh)
    print(f"fetched {len(records)} changes -> {args.out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    gerrit = _gerrit_config(args, required=False)
    if gerrit is None:
        logger.warning("no Gerrit configured; /api/v1/predict will return 502")
    config = ServiceConfig(
        model_path=Path(args.model),
        gerrit=gerrit,
        provider=_provider_from_args(args),
        listen_host=args.host,
        listen_port=args.port,
        allowed_origins=tuple(args.allowed_origin or ()),
        window_days=args.window_days,
        top_k=args.top_k,
        window_mode=WindowMode(args.window_mode),
        cross_project=args.cross_project,
    )
    run_service(config)
    return 0


def _add_embed_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--embed-url",
        default=None,
        help="embedding service base URL (default: EMBED_URL env var, else built-in fallback)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="patchlink",
        description="Detect linked patches on Gerrit: train, evaluate, predict, fetch, serve.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a ranking model from labeled links")
    p.add_argument("--changes", required=True, help="changes JSONL file")
    p.add_argument("--links", required=True, help="links JSONL file")
    p.add_argument("--out", required=True, help="model output path")
    p.add_argument("--window-days", type=int, default=14)
    p.add_argument("--negatives-per-positive", type=int, default=5)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--max-depth", type=int, default=16)
    _add_embed_flag(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("evaluate", help="rank link-participating changes and report metrics")
    p.add_argument("--changes", required=True)
    p.add_argument("--links", required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--windows", type=_csv_ints, default=DEFAULT_WINDOWS)
    p.add_argument("--k", type=_csv_ints, default=DEFAULT_KS)
    p.add_argument("--methods", type=_csv_strs, default=METHODS)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True, help="report JSONL output path")
    p.add_argument("--window-mode", choices=["symmetric", "lookback"], default="symmetric")
    p.add_argument("--figures-dir", default=None, help="figure directory (default: next to --out)")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--cross-project", action="store_true")
    _add_embed_flag(p)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("predict", help="rank candidates for one change, offline")
    p.add_argument("--changes", required=True)
    p.add_argument("--target", required=True, help="change_key of the target change")
    p.add_argument("--model", required=True)
    p.add_argument("--window-days", type=int, default=14)
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--window-mode", choices=["symmetric", "lookback"], default="symmetric")
    p.add_argument("--cross-project", action="store_true")
    _add_embed_flag(p)
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("fetch", help="download changes from Gerrit into a JSONL corpus")
    p.add_argument("--gerrit-url", default=None, help="Gerrit base URL (default: GERRIT_URL)")
    p.add_argument("--project", required=True)
    p.add_argument("--since", type=_when, required=True, help="ISO-8601 lower bound, inclusive")
    p.add_argument("--until", type=_when, required=True, help="ISO-8601 upper bound, inclusive")
    p.add_argument("--out", required=True)
    p.add_argument("--limit", type=int, default=500)
    p.set_defaults(handler=cmd_fetch)

    p = sub.add_parser("serve", help="run the local inference HTTP service")
    p.add_argument("--model", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--gerrit-url", default=None, help="Gerrit base URL (default: GERRIT_URL)")
    p.add_argument("--allowed-origin", action="append", default=[], metavar="ORIGIN")
    p.add_argument("--window-days", type=int, default=14)
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--window-mode", choices=["symmetric", "lookback"], default="lookback")
    p.add_argument("--cross-project", action="store_true")
    _add_embed_flag(p)
    p.set_defaults(handler=cmd_serve)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except (CliError, RecordError, ForestError, EvalError, EmbeddingError, GerritError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
