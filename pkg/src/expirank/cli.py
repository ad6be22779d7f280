"""Command-line front end.

Subcommands: extract (focused chunks for a query), infer (expiration
verdict), eval (offline ranking comparison), cache-build (precompute
thresholds), serve (HTTP service).

Exit codes: 0 success, 1 usage or configuration error, 2 corpus format
violations, 3 reasoning backend unreachable.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .config import EngineConfig
from .corpus import load_documents, load_queries
from .errors import (
    BackendError,
    ConfigError,
    CorpusFormatError,
    ExpirankError,
)
from .evaluation import generate_corpus, run_offline_eval
from .extraction import decay_rate
from .pipeline import compute_verdict
from .service import ExpiryService, build_server
from .signal import get_threshold
from .timepoint import TimePoint

__all__ = ["main", "build_arg_parser"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CORPUS = 2
EXIT_BACKEND = 3


class _ArgumentParser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; this tool reserves 2
    # for corpus problems, so usage errors exit 1.
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_arg_parser() -> _ArgumentParser:
    parser = _ArgumentParser(
        prog="expirank",
        description="Query-aware content-expiration engine.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: _ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--backend", choices=("oracle", "http"))
        p.add_argument("--endpoint", help="HTTP backend endpoint URL")
        p.add_argument("--seed", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--tau", type=float)
        p.add_argument("--window", type=int)
        p.add_argument("--out", help="write output here instead of stdout")

    p_extract = sub.add_parser("extract", parents=[], help="focused chunks for a query")
    add_common(p_extract)
    p_extract.add_argument("--query", required=True)
    p_extract.add_argument("--corpus", required=True, help="documents JSONL")
    p_extract.add_argument("--search-time", required=True, help="YYYY[-MM[-DD]]")

    p_infer = sub.add_parser("infer", help="expiration verdict for a query")
    add_common(p_infer)
    p_infer.add_argument("--query", required=True)
    p_infer.add_argument("--corpus", required=True, help="documents JSONL")
    p_infer.add_argument("--search-time", required=True, help="YYYY[-MM[-DD]]")
    p_infer.add_argument("--samples", type=int)
    p_infer.add_argument("--trajectory", action="store_true",
                         help="include forward reasoning steps in the output")

    p_eval = sub.add_parser("eval", help="offline ranking comparison")
    add_common(p_eval)
    p_eval.add_argument("--corpus", help="documents JSONL (with --queries-file)")
    p_eval.add_argument("--queries-file", help="queries JSONL (with --corpus)")
    p_eval.add_argument("--queries", type=int,
                        help="generate this many synthetic queries instead")
    p_eval.add_argument("--force-breaker-open", action="store_true",
                        help="run with the breaker forced open (degradation check)")
    p_eval.add_argument("--format", choices=("json", "text"), default="json")
    p_eval.add_argument("--dump-corpus", metavar="PREFIX",
                        help="also write PREFIX.queries.jsonl / PREFIX.docs.jsonl")

    p_cache = sub.add_parser("cache-build", help="precompute thresholds into a cache file")
    add_common(p_cache)
    p_cache.add_argument("--corpus", required=True, help="documents JSONL")
    p_cache.add_argument("--queries-file", required=True, help="queries JSONL")
    p_cache.add_argument("--cache", required=True, help="cache file to build")

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    add_common(p_serve)
    p_serve.add_argument("--corpus", help="documents JSONL used as evidence")
    p_serve.add_argument("--host")
    p_serve.add_argument("--port", type=int)

    return parser


def _load_config(args: argparse.Namespace) -> EngineConfig:
    config = EngineConfig.from_json(args.config) if args.config else EngineConfig()
    config = config.with_env_overrides()
    overrides = {}
    for flag, field in (
        ("backend", "backend"),
        ("endpoint", "endpoint"),
        ("seed", "seed"),
        ("alpha", "alpha"),
        ("tau", "tau"),
        ("window", "window"),
        ("samples", "samples"),
        ("host", "host"),
        ("port", "port"),
        ("queries", "eval_queries"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field] = value
    return dataclasses.replace(config, **overrides) if overrides else config


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dumps(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _cmd_extract(args: argparse.Namespace, config: EngineConfig) -> int:
    from .extraction import build_focus, extract_query_anchor

    docs = load_documents(args.corpus)
    search_time = TimePoint.parse_canonical(args.search_time)
    parser = config.make_parser()
    anchor = extract_query_anchor(args.query, search_time, parser)
    focus = build_focus(
        anchor, docs, search_time, parser=parser,
        window=config.window, alpha=config.alpha, tau=config.tau,
        decay_per_day=decay_rate(config.half_life_days),
        stopwords=config.make_stopwords(),
    )
    payload = {
        "query": args.query,
        "keywords": list(anchor.keywords),
        "query_times": [t.render() for t in anchor.temporal_entities],
        "fallback_used": focus.fallback_used,
        "chunks": [
            {
                "source_id": c.source_id,
                "span": list(c.span),
                "is_fallback": c.is_fallback,
                "rel_k": c.rel_k,
                "rel_t": c.rel_t,
                "s_rel": c.s_rel,
                "anchor_times": [t.render() for t in c.anchor_times],
                "text": c.text(),
            }
            for c in focus.chunks
        ],
    }
    _emit(_dumps(payload), args.out)
    return EXIT_OK


def _cmd_infer(args: argparse.Namespace, config: EngineConfig) -> int:
    docs = load_documents(args.corpus)
    search_time = TimePoint.parse_canonical(args.search_time)
    rule_table = config.make_rule_table()
    parser = config.make_parser()
    result = compute_verdict(
        args.query, docs, search_time,
        backend=config.make_backend(rule_table, parser),
        rule_table=rule_table,
        parser=parser,
        samples=config.samples,
        window=config.window,
        alpha=config.alpha,
        tau=config.tau,
        decay_per_day=decay_rate(config.half_life_days),
        h_norm=config.h_norm_days,
        lambda1=config.lambda1,
        lambda2=config.lambda2,
        max_candidate_docs=config.max_candidate_docs,
        stopwords=config.make_stopwords(),
    )
    verdict = result.verdict
    payload = {
        "query": args.query,
        "search_time": search_time.render(),
        "t_exp": verdict.t_exp.render(),
        "s_self": verdict.s_self,
        "tie_broken": verdict.tie_broken,
        "chunk_count": verdict.chunk_count,
        "support": {t.render(): w for t, w in verdict.support.items()},
        "candidates": [t.render() for t in result.outcome.candidates],
    }
    if args.trajectory:
        payload["trajectory"] = [
            {
                "claim": step.claim,
                "chunk_id": step.chunk_id,
                "time": step.time.render() if step.time else None,
                "asserts_expiry": step.asserts_expiry,
            }
            for step in result.outcome.forward.steps
        ]
    _emit(_dumps(payload), args.out)
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace, config: EngineConfig) -> int:
    if args.corpus and args.queries_file:
        docs = load_documents(args.corpus)
        queries = load_queries(args.queries_file)
    elif args.corpus or args.queries_file:
        raise ConfigError("--corpus and --queries-file must be given together")
    else:
        queries, docs = generate_corpus(config.seed, config.eval_queries)

    if args.dump_corpus:
        from .corpus import dump_documents, dump_queries

        dump_queries(queries, f"{args.dump_corpus}.queries.jsonl")
        dump_documents(docs, f"{args.dump_corpus}.docs.jsonl")

    rule_table = config.make_rule_table()
    parser = config.make_parser()
    report = run_offline_eval(
        queries, docs,
        rule_table=rule_table,
        parser=parser,
        backend=config.make_backend(rule_table, parser),
        cache=config.make_cache(),
        breaker=config.make_breaker(),
        weights=config.rerank_weights(),
        alpha=config.alpha,
        tau=config.tau,
        window=config.window,
        decay_per_day=decay_rate(config.half_life_days),
        force_breaker_open=args.force_breaker_open,
    )
    if args.format == "text":
        _emit(report.render_text(), args.out)
    else:
        text = report.to_json_bytes().decode("utf-8")
        _emit(text, args.out)
    return EXIT_OK


def _cmd_cache_build(args: argparse.Namespace, config: EngineConfig) -> int:
    docs = load_documents(args.corpus)
    queries = load_queries(args.queries_file)
    rule_table = config.make_rule_table()
    parser = config.make_parser()
    backend = config.make_backend(rule_table, parser)
    cache = dataclasses.replace(config, cache_path=args.cache).make_cache()
    breaker = config.make_breaker()
    stopwords = config.make_stopwords()

    built = 0
    fallbacks = 0
    for query in queries:
        def pipeline_fn(q: str, st: TimePoint):
            result = compute_verdict(
                q, docs, st,
                backend=backend, rule_table=rule_table, parser=parser,
                samples=config.samples, window=config.window,
                alpha=config.alpha, tau=config.tau,
                decay_per_day=decay_rate(config.half_life_days),
                h_norm=config.h_norm_days,
                lambda1=config.lambda1, lambda2=config.lambda2,
                max_candidate_docs=config.max_candidate_docs,
                stopwords=stopwords,
            )
            return result.verdict.t_exp, result.verdict.s_self

        t_exp, provenance, _ = get_threshold(
            query.text, query.search_time, cache, pipeline_fn, breaker,
            past_bound_days=config.sanity_past_days,
            future_bound_days=config.sanity_future_days,
        )
        if provenance == "fallback" or t_exp is None:
            fallbacks += 1
        else:
            built += 1
    cache.compact()
    _emit(_dumps({
        "cache_path": args.cache,
        "thresholds_built": built,
        "fallbacks": fallbacks,
        "entries": len(cache),
    }), args.out)
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace, config: EngineConfig) -> int:
    docs = load_documents(args.corpus) if args.corpus else []
    service = ExpiryService(config, docs)
    try:
        server = build_server(service)
    except OSError as exc:
        print(f"expirank: cannot bind {config.host}:{config.port}: {exc}",
              file=sys.stderr)
        return EXIT_USAGE
    host, port = server.server_address[:2]
    print(f"expirank: serving on {host}:{port} "
          f"({len(docs)} documents, backend={config.backend})", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


_COMMANDS = {
    "extract": _cmd_extract,
    "infer": _cmd_infer,
    "eval": _cmd_eval,
    "cache-build": _cmd_cache_build,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_arg_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args)
        return _COMMANDS[args.command](args, config)
    except CorpusFormatError as exc:
        print("expirank: corpus format errors:", file=sys.stderr)
        for item in exc.items:
            print(f"  - {item}", file=sys.stderr)
        return EXIT_CORPUS
    except BackendError as exc:
        print(f"expirank: reasoning backend unreachable: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except ConfigError as exc:
        print(f"expirank: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ExpirankError as exc:
        print(f"expirank: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"expirank: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
