"""Event intake: file replay (with follow), socket stream, and HTTP batch.

Every path runs the same per-line pipeline — decode, validate, duplicate
check, store append — and produces an IngestReport. A bad line is counted,
never fatal; the same logical event set yields the same store state no
matter which path carried it.
"""

from __future__ import annotations

import json
import logging
import queue
import socket
import socketserver
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

from .schema import LogEvent, ParseError, ValidationError, decode_line
from .store import EventStore

logger = logging.getLogger(__name__)

MAX_ERROR_SAMPLES = 10
DEFAULT_HTTP_BODY_CAP = 16 * 1024 * 1024
FOLLOW_POLL_SECONDS = 0.05
FLUSH_INTERVAL_SECONDS = 0.1


class BindError(Exception):
    """Listener endpoint could not be bound."""


@dataclass
class ErrorSample:
    line: int
    kind: str
    reason: str

    def to_dict(self) -> dict:
        return {"line": self.line, "kind": self.kind, "reason": self.reason}


@dataclass
class IngestReport:
    accepted: int = 0
    parse_errors: int = 0
    validation_errors: int = 0
    duplicates: int = 0
    samples: list[ErrorSample] = field(default_factory=list)

    @property
    def total(self) -> int:
        return self.accepted + self.parse_errors + self.validation_errors + self.duplicates

    @property
    def clean(self) -> bool:
        return self.parse_errors == 0 and self.validation_errors == 0

    def sample(self, line: int, kind: str, reason: str) -> None:
        if len(self.samples) < MAX_ERROR_SAMPLES:
            self.samples.append(ErrorSample(line, kind, reason))

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "parse_errors": self.parse_errors,
            "validation_errors": self.validation_errors,
            "duplicates": self.duplicates,
            "samples": [s.to_dict() for s in self.samples],
        }

    def merge(self, other: "IngestReport") -> None:
        self.accepted += other.accepted
        self.parse_errors += other.parse_errors
        self.validation_errors += other.validation_errors
        self.duplicates += other.duplicates
        for s in other.samples:
            self.sample(s.line, s.kind, s.reason)


class LinePipeline:
    """The shared decode -> validate -> dedupe -> append pipeline.

    With no store attached it performs validation only (used by the CLI's
    validate command), tracking duplicates against an in-memory id set.
    ``on_accept`` fires once per newly stored (non-duplicate) event.
    """

    def __init__(self, store: Optional[EventStore] = None, on_accept=None):
        self.store = store
        self.on_accept = on_accept
        self.report = IngestReport()
        self._line_no = 0
        self._dry_seen: set[str] = set()

    def feed(self, raw: bytes) -> Optional[LogEvent]:
        self._line_no += 1
        try:
            event = decode_line(raw)
        except ParseError as exc:
            self.report.parse_errors += 1
            self.report.sample(self._line_no, "parse", str(exc))
            return None
        except ValidationError as exc:
            self.report.validation_errors += 1
            self.report.sample(self._line_no, "validation", str(exc.violations[0]))
            return None
        if self.store is not None:
            accepted = self.store.append(event)
        else:
            accepted = event.event_id not in self._dry_seen
            self._dry_seen.add(event.event_id)
        if accepted:
            self.report.accepted += 1
            if self.on_accept is not None:
                self.on_accept(event)
        else:
            self.report.duplicates += 1
        return event


def ingest_lines(data: bytes, store: Optional[EventStore], on_accept=None) -> IngestReport:
    """Run the pipeline over an in-memory LF-delimited payload."""
    pipeline = LinePipeline(store, on_accept=on_accept)
    for raw in data.splitlines(keepends=True):
        pipeline.feed(raw)
    return pipeline.report


def ingest_file(
    path: Path | str,
    store: Optional[EventStore],
    *,
    follow: bool = False,
    stop: Optional[threading.Event] = None,
    on_event=None,
) -> IngestReport:
    """Replay a JSONL file into the store; optionally keep tailing it.

    A trailing partial line (no LF yet) is held, not errored; in follow mode
    it is processed once completed, otherwise it is processed as-is when the
    file ends. Follow mode polls, picking up appended lines well inside the
    200 ms latency budget, until ``stop`` is set.
    """
    path = Path(path)
    pipeline = LinePipeline(store, on_accept=on_event)
    buffer = b""
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise IOError(f"cannot read {path}: {exc}") from exc
    with fh:
        while True:
            chunk = fh.read(65536)
            if chunk:
                buffer += chunk
                while True:
                    newline = buffer.find(b"\n")
                    if newline < 0:
                        break
                    pipeline.feed(buffer[: newline + 1])
                    buffer = buffer[newline + 1 :]
                continue
            if not follow or (stop is not None and stop.is_set()):
                break
            time.sleep(FOLLOW_POLL_SECONDS)
    if buffer:
        pipeline.feed(buffer)
    if store is not None:
        store.flush()
    return pipeline.report


# ---------------------------------------------------------------------------
# Store writer: the single serialized appender behind a bounded queue
# ---------------------------------------------------------------------------


class StoreWriter:
    """Serializes appends from many producers through a bounded queue.

    put() blocks when the queue is full — backpressure instead of drops. The
    writer thread flushes the store on a 100 ms cadence so a crash loses at
    most the final unflushed batch.
    """

    def __init__(self, store: EventStore, queue_cap: int = 4096, on_event=None):
        self.store = store
        self.report = IngestReport()
        self._queue: queue.Queue = queue.Queue(maxsize=queue_cap)
        self._on_event = on_event
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, name="store-writer", daemon=True)
        self._thread.start()

    def put(self, event: LogEvent) -> None:
        self._queue.put(event)

    def _run(self) -> None:
        last_flush = time.monotonic()
        while True:
            try:
                event = self._queue.get(timeout=FLUSH_INTERVAL_SECONDS)
            except queue.Empty:
                event = None
            if event is not None:
                stored = self.store.append(event)
                with self._lock:
                    if stored:
                        self.report.accepted += 1
                    else:
                        self.report.duplicates += 1
                if stored and self._on_event is not None:
                    self._on_event(event)
            now = time.monotonic()
            if now - last_flush >= FLUSH_INTERVAL_SECONDS:
                self.store.flush()
                last_flush = now
            if event is None and self._stop.is_set() and self._queue.empty():
                break
        self.store.flush()

    def note_parse_error(self) -> None:
        with self._lock:
            self.report.parse_errors += 1

    def note_validation_error(self) -> None:
        with self._lock:
            self.report.validation_errors += 1

    def close(self) -> None:
        self._stop.set()
        self._thread.join()

    def snapshot(self) -> IngestReport:
        with self._lock:
            report = IngestReport(
                accepted=self.report.accepted,
                parse_errors=self.report.parse_errors,
                validation_errors=self.report.validation_errors,
                duplicates=self.report.duplicates,
            )
        return report


# ---------------------------------------------------------------------------
# Socket stream ingest
# ---------------------------------------------------------------------------


class _StreamHandler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        server: StreamIngestServer = self.server  # type: ignore[assignment]
        writer = server.writer
        report = IngestReport()
        line_no = 0
        buffer = b""
        try:
            while True:
                chunk = self.request.recv(65536)
                if not chunk:
                    break
                buffer += chunk
                while True:
                    newline = buffer.find(b"\n")
                    if newline < 0:
                        break
                    raw = buffer[: newline + 1]
                    buffer = buffer[newline + 1 :]
                    line_no += 1
                    try:
                        event = decode_line(raw)
                    except ParseError as exc:
                        report.parse_errors += 1
                        report.sample(line_no, "parse", str(exc))
                        writer.note_parse_error()
                        continue
                    except ValidationError as exc:
                        report.validation_errors += 1
                        report.sample(line_no, "validation", str(exc.violations[0]))
                        writer.note_validation_error()
                        continue
                    writer.put(event)  # blocks when the queue is full
        except (ConnectionResetError, BrokenPipeError, OSError) as exc:
            logger.warning("stream connection error: %s", exc)
        if buffer:
            # Connection closed mid-line: discard the partial, count it.
            report.parse_errors += 1
            report.sample(line_no + 1, "parse", "connection closed mid-line")
            writer.note_parse_error()
        with server.reports_lock:
            server.connection_reports.append(report)


class StreamIngestServer:
    """LF-delimited JSONL over a plain stream socket; one framing per
    connection, failures isolated per connection."""

    def __init__(self, host: str, port: int, writer: StoreWriter):
        self.writer = writer
        self.connection_reports: list[IngestReport] = []
        self.reports_lock = threading.Lock()
        try:
            self._server = socketserver.ThreadingTCPServer(
                (host, port), _StreamHandler, bind_and_activate=False
            )
            self._server.allow_reuse_address = True
            self._server.daemon_threads = True
            self._server.server_bind()
            self._server.server_activate()
        except OSError as exc:
            raise BindError(f"cannot bind {host}:{port}: {exc}") from exc
        self._server.writer = self.writer  # type: ignore[attr-defined]
        self._server.connection_reports = self.connection_reports  # type: ignore[attr-defined]
        self._server.reports_lock = self.reports_lock  # type: ignore[attr-defined]
        self._thread = threading.Thread(
            target=self._server.serve_forever, name="stream-ingest", daemon=True
        )

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join()


def send_lines(host: str, port: int, data: bytes, chunk: int = 65536) -> None:
    """Test/client helper: push raw LF-delimited bytes at a stream listener."""
    with socket.create_connection((host, port)) as sock:
        for i in range(0, len(data), chunk):
            sock.sendall(data[i : i + chunk])
        sock.shutdown(socket.SHUT_WR)
        sock.recv(1)  # wait for peer close so processing finished


# ---------------------------------------------------------------------------
# HTTP batch ingest
# ---------------------------------------------------------------------------


class _HttpHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt: str, *args) -> None:
        logger.debug("http: " + fmt, *args)

    def _respond(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self) -> None:  # noqa: N802 (stdlib naming)
        server: HttpIngestServer = self.server  # type: ignore[assignment]
        if self.path != "/v1/ingest":
            self._respond(404, {"error": "unknown path"})
            return
        length_header = self.headers.get("Content-Length")
        if length_header is None:
            self._respond(411, {"error": "Content-Length required"})
            return
        length = int(length_header)
        if length > server.body_cap:
            self._respond(413, {"error": f"body exceeds cap of {server.body_cap} bytes"})
            return
        body = self.rfile.read(length)
        if not body.strip():
            self._respond(400, {"error": "empty body"})
            return
        report = ingest_lines(body, server.store, on_accept=server.on_event)
        server.store.flush()
        server.merge_report(report)
        self._respond(200, report.to_dict())

    def do_GET(self) -> None:  # noqa: N802
        server: HttpIngestServer = self.server  # type: ignore[assignment]
        if self.path == "/healthz":
            self._respond(200, {"status": "ok", "events": len(server.store)})
        else:
            self._respond(404, {"error": "unknown path"})


class HttpIngestServer(ThreadingHTTPServer):
    """POST /v1/ingest with an LF-delimited JSONL body; response is the
    IngestReport as one JSON object. 200 even when lines fail; 413 over the
    size cap; 400 on an empty body."""

    daemon_threads = True

    def __init__(
        self,
        host: str,
        port: int,
        store: EventStore,
        body_cap: int = DEFAULT_HTTP_BODY_CAP,
        on_event=None,
    ):
        try:
            super().__init__((host, port), _HttpHandler)
        except OSError as exc:
            raise BindError(f"cannot bind {host}:{port}: {exc}") from exc
        self.store = store
        self.body_cap = body_cap
        self.on_event = on_event
        self.total_report = IngestReport()
        self._report_lock = threading.Lock()
        self._thread = threading.Thread(target=self.serve_forever, name="http-ingest", daemon=True)

    @property
    def address(self) -> tuple[str, int]:
        return self.server_address[:2]

    def merge_report(self, report: IngestReport) -> None:
        with self._report_lock:
            self.total_report.merge(report)

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self.shutdown()
        self.server_close()
        self._thread.join()
