"""Operator CLI: validate, tree, stats, extract, serve, report.

stdout carries machine output only (JSON or the normative tree rendering);
anything meant for humans goes to stderr. Exit codes are uniform: 0 success,
1 data-level findings, 2 environment or usage errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import signal
import sys
import threading
from pathlib import Path
from typing import Optional

from . import __version__
from .assembly import StatsSummary, assemble_trace, render_tree, trace_stats
from .config import CliConfig, ConfigError, load_config
from .export import LivePairer, SpanExporter
from .extraction import maybe_extract_cognitive
from .ingest import (
    BindError,
    HttpIngestServer,
    LinePipeline,
    StoreWriter,
    StreamIngestServer,
    ingest_file,
)
from .store import EventStore

logger = logging.getLogger("agenttrace")

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agenttrace",
        description="Collection, validation, and analysis of LLM-agent telemetry.",
    )
    parser.add_argument("--version", action="version", version=f"agenttrace {__version__}")
    parser.add_argument("--store", help="store directory (default: agenttrace-store)")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--verbose", action="store_true", default=None, help="debug logging to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="decode+validate a JSONL file without storing")
    p.add_argument("path")

    p = sub.add_parser("tree", help="render the span tree of one trace")
    p.add_argument("trace_id")

    p = sub.add_parser("stats", help="summary statistics over the store")
    p.add_argument("--trace", help="restrict to one trace id")
    p.add_argument("--agent", help="restrict to one agent")
    p.add_argument("--surface", choices=["operational", "cognitive", "contextual"])
    p.add_argument("--since", help="inclusive RFC3339 lower bound")
    p.add_argument("--until", help="inclusive RFC3339 upper bound")

    p = sub.add_parser("extract", help="run cognitive extraction over raw completions")
    p.add_argument("path", help="a completion file, or a directory of .txt completions")

    p = sub.add_parser("ingest", help="replay a JSONL file into the store")
    p.add_argument("path")
    p.add_argument("--follow", action="store_true", help="keep tailing the file")

    p = sub.add_parser("serve", help="run stream + HTTP ingest listeners with live export")
    p.add_argument("--stream-listen", dest="stream_listen", help="host:port for socket ingest")
    p.add_argument("--http-listen", dest="http_listen", help="host:port for HTTP ingest")
    p.add_argument("--endpoint", help="span delivery endpoint (degrades to fallback when unset)")

    p = sub.add_parser("report", help="write stats.jsonl and figures for the store")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--trace", help="report a single trace")

    return parser


def _load_cli_config(args: argparse.Namespace) -> CliConfig:
    overrides = {
        "store_dir": args.store,
        "verbose": args.verbose,
        "stream_listen": getattr(args, "stream_listen", None),
        "http_listen": getattr(args, "http_listen", None),
        "endpoint": getattr(args, "endpoint", None),
    }
    return load_config(args.config, overrides)


def cmd_validate(args, config: CliConfig) -> int:
    path = Path(args.path)
    if not path.is_file():
        print(f"error: {path} is not a readable file", file=sys.stderr)
        return EXIT_USAGE
    pipeline = LinePipeline(store=None)
    with open(path, "rb") as fh:
        buffer = b""
        for chunk in iter(lambda: fh.read(65536), b""):
            buffer += chunk
            while True:
                newline = buffer.find(b"\n")
                if newline < 0:
                    break
                pipeline.feed(buffer[: newline + 1])
                buffer = buffer[newline + 1 :]
        if buffer:
            pipeline.feed(buffer)
    report = pipeline.report
    print(json.dumps(report.to_dict()))
    return EXIT_OK if report.clean else EXIT_FINDINGS


def cmd_tree(args, config: CliConfig) -> int:
    store = EventStore(config.store_dir)
    try:
        events = store.scan_trace(args.trace_id)
        if not events:
            print(f"error: trace {args.trace_id} not found in store", file=sys.stderr)
            return EXIT_FINDINGS
        tree, _spans, _anomalies = assemble_trace(events)
        sys.stdout.write(render_tree(tree))
        return EXIT_OK
    finally:
        store.close()


def cmd_stats(args, config: CliConfig) -> int:
    store = EventStore(config.store_dir)
    try:
        events = list(
            store.scan(
                trace_id=args.trace,
                agent=args.agent,
                surface=args.surface,
                since=args.since,
                until=args.until,
            )
        )
        by_trace: dict[str, list] = {}
        for event in events:
            by_trace.setdefault(event.trace_id, []).append(event)
        total = StatsSummary()
        for trace_events in by_trace.values():
            tree, _spans, anomalies = assemble_trace(trace_events)
            total = total.merge(trace_stats(tree, anomalies))
        payload = {"traces": len(by_trace)}
        payload.update(total.to_dict())
        print(json.dumps(payload))
        return EXIT_OK
    finally:
        store.close()


EXTRACT_KEYS = ("input", "strategy", "thought", "plan", "reflection", "cleaned_sha256")


def extraction_record(name: str, text: str) -> dict:
    """The extract command's per-completion output line (fixed key order)."""
    cleaned, payload = maybe_extract_cognitive(text)
    record: dict = {"input": name}
    if payload is None:
        record["strategy"] = "none"
    else:
        record["strategy"] = payload.strategy
        for key, value in payload.fields().items():
            record[key] = value
    record["cleaned_sha256"] = hashlib.sha256(cleaned.encode("utf-8")).hexdigest()
    return record


def cmd_extract(args, config: CliConfig) -> int:
    path = Path(args.path)
    if path.is_dir():
        inputs = sorted(p for p in path.iterdir() if p.suffix == ".txt")
    elif path.is_file():
        inputs = [path]
    else:
        print(f"error: {path} does not exist", file=sys.stderr)
        return EXIT_USAGE
    for item in inputs:
        text = item.read_text(encoding="utf-8")
        record = extraction_record(item.name, text)
        print(json.dumps(record, ensure_ascii=False))
    return EXIT_OK


def cmd_ingest(args, config: CliConfig) -> int:
    path = Path(args.path)
    if not path.is_file():
        print(f"error: {path} is not a readable file", file=sys.stderr)
        return EXIT_USAGE
    store = EventStore(config.store_dir)
    stop = threading.Event()
    if args.follow:
        signal.signal(signal.SIGTERM, lambda *_: stop.set())
        signal.signal(signal.SIGINT, lambda *_: stop.set())
    try:
        report = ingest_file(path, store, follow=args.follow, stop=stop)
        print(json.dumps(report.to_dict()))
        return EXIT_OK if report.clean else EXIT_FINDINGS
    finally:
        store.close()


def cmd_serve(args, config: CliConfig) -> int:
    try:
        store = EventStore(config.store_dir)
    except OSError as exc:
        print(f"error: cannot open store: {exc}", file=sys.stderr)
        return EXIT_USAGE

    exporter = SpanExporter(config.exporter)
    pairer = LivePairer(exporter)
    writer = StoreWriter(store, queue_cap=config.exporter.queue_cap, on_event=pairer.feed)

    try:
        stream_server = StreamIngestServer(*config.stream_listen, writer=writer)
        http_server = HttpIngestServer(
            *config.http_listen, store=store, body_cap=config.http_body_cap, on_event=pairer.feed
        )
    except BindError as exc:
        print(f"error: {exc}", file=sys.stderr)
        writer.close()
        exporter.shutdown()
        store.close()
        return EXIT_USAGE

    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    signal.signal(signal.SIGINT, lambda *_: stop.set())

    stream_host, stream_port = stream_server.address
    http_host, http_port = http_server.address
    print(
        f"serving: stream {stream_host}:{stream_port}, http {http_host}:{http_port}, "
        f"store {config.store_dir}",
        file=sys.stderr,
    )
    stream_server.start()
    http_server.start()
    try:
        stop.wait()
    finally:
        print("shutting down: draining queues", file=sys.stderr)
        stream_server.stop()
        http_server.stop()
        writer.close()
        pairer.flush()
        exporter.shutdown()
        store.close()
        report = writer.snapshot()
        report.merge(http_server.total_report)
        print(json.dumps({"ingest": report.to_dict(), "export": exporter.accounting()}))
    return EXIT_OK


def cmd_report(args, config: CliConfig) -> int:
    from .report import write_report

    store = EventStore(config.store_dir)
    try:
        if args.trace and args.trace not in store.trace_ids:
            print(f"error: trace {args.trace} not found in store", file=sys.stderr)
            return EXIT_FINDINGS
        written = write_report(store, args.out_dir, trace_id=args.trace)
        print(json.dumps({"written": written}))
        return EXIT_OK
    finally:
        store.close()


_COMMANDS = {
    "validate": cmd_validate,
    "tree": cmd_tree,
    "stats": cmd_stats,
    "extract": cmd_extract,
    "ingest": cmd_ingest,
    "serve": cmd_serve,
    "report": cmd_report,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_cli_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _setup_logging(config.verbose)
    try:
        return _COMMANDS[args.command](args, config)
    except BrokenPipeError:
        return EXIT_OK
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
