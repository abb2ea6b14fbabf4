"""Conversion of events to backend-compatible spans and batched delivery.

The exporter is deliberately boring to fail with: attribute conversion is
total (any Python value becomes one of four scalar kinds), enqueueing never
blocks on the network, and every failed batch degrades to an append-only
local span-line file. Accounting is exact: delivered + degraded + lost =
enqueued.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import threading
import time
import urllib.request
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Union
from urllib.parse import urlparse

from .schema import LogEvent, ParseError, format_number, parse_timestamp, truncate_summary

logger = logging.getLogger(__name__)

MAX_ATTRIBUTE_CHARS = 4096
ATTRIBUTE_PREFIX = "agenttrace."
SPAN_STATUSES = ("ok", "error", "unset")
SPAN_LINE_KEYS = (
    "trace_id",
    "span_id",
    "parent_span_id",
    "name",
    "start_time_unix_nano",
    "end_time_unix_nano",
    "status",
    "attributes",
)

AttributeValue = Union[str, int, float, bool]

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


@dataclass
class ExportSpan:
    trace_id: str
    span_id: str
    parent_span_id: Optional[str]
    name: str
    start_time_unix_nano: int
    end_time_unix_nano: int
    status: str = "unset"
    attributes: dict[str, AttributeValue] = field(default_factory=dict)


@dataclass
class ExporterConfig:
    endpoint: Optional[str] = None
    batch_max: int = 512
    flush_interval_ms: int = 1000
    queue_cap: int = 8192
    fallback_path: str = "agenttrace-fallback-spans.jsonl"

    def __post_init__(self) -> None:
        if self.batch_max > self.queue_cap:
            raise ValueError("batch_max must not exceed queue_cap")


@dataclass
class ExportOutcome:
    """Per-batch delivery record."""

    batch_size: int
    outcome: str  # delivered | degraded | lost
    detail: str = ""


def set_attribute_defensive(
    attrs: dict[str, AttributeValue], key: str, value: Any
) -> dict[str, AttributeValue]:
    """Store any value as one of the four scalar attribute kinds.

    Scalars pass through (non-finite floats become strings, since the span
    line format is strict JSON); lists/maps become deterministic JSON text;
    everything else falls back to its textual rendering. Never raises.
    """
    if not key:
        raise ValueError("attribute key must be non-empty")
    if isinstance(value, bool):
        attrs[key] = value
    elif isinstance(value, (int, float)):
        if isinstance(value, float) and not math.isfinite(value):
            attrs[key] = str(value)
        else:
            attrs[key] = value
    elif isinstance(value, str):
        attrs[key] = truncate_summary(value, MAX_ATTRIBUTE_CHARS)
    elif isinstance(value, (list, tuple, dict)):
        try:
            text = json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False, default=str)
        except Exception:
            text = _safe_str(value)
        attrs[key] = truncate_summary(text, MAX_ATTRIBUTE_CHARS)
    else:
        attrs[key] = truncate_summary(_safe_str(value), MAX_ATTRIBUTE_CHARS)
    return attrs


def _safe_str(value: Any) -> str:
    try:
        return str(value)
    except Exception:
        try:
            return object.__repr__(value)
        except Exception:
            return f"<unprintable {type(value).__name__}>"


_MICROSECOND = timedelta(microseconds=1)


def timestamp_to_nanos(timestamp: str) -> int:
    micros = (parse_timestamp(timestamp) - _EPOCH) // _MICROSECOND
    return micros * 1000


def derived_span_id(event_id: str) -> str:
    """Deterministic 64-bit id for a span synthesized from one event."""
    return hashlib.sha256(event_id.encode("ascii")).hexdigest()[:16]


def _contextual_name(event: LogEvent) -> str:
    source = event.body.source
    parsed = urlparse(source)
    if parsed.netloc:
        label = parsed.hostname or parsed.netloc
    elif parsed.scheme:
        label = parsed.scheme
    else:
        label = "local"
    return f"{event.body.op_type}.{label}"


def event_to_span(event: LogEvent, paired_terminal: Optional[LogEvent] = None) -> ExportSpan:
    """Map an event (plus its paired terminal, for operational starts) onto
    one export span.

    Operational pairs cover [start, terminal] with ok/error status; cognitive
    and contextual events become 1 µs floor spans parented under the span
    whose id they carry, named ``cognitive.<strategy>`` /
    ``<op_type>.<host-or-scheme>``.
    """
    start_ns = timestamp_to_nanos(event.timestamp)
    attrs: dict[str, AttributeValue] = {}

    def put_body(source_event: LogEvent) -> None:
        for key in source_event.body._keys:
            value = getattr(source_event.body, key)
            if value is not None:
                set_attribute_defensive(attrs, ATTRIBUTE_PREFIX + key, value)

    set_attribute_defensive(attrs, ATTRIBUTE_PREFIX + "agent", event.agent)
    set_attribute_defensive(attrs, ATTRIBUTE_PREFIX + "surface", event.surface)
    set_attribute_defensive(attrs, ATTRIBUTE_PREFIX + "level", event.level)
    set_attribute_defensive(attrs, ATTRIBUTE_PREFIX + "event_id", event.event_id)

    if event.surface == "operational":
        put_body(event)
        status = "unset"
        end_ns = start_ns + 1000
        if paired_terminal is not None:
            put_body(paired_terminal)
            end_ns = max(timestamp_to_nanos(paired_terminal.timestamp), start_ns + 1000)
            status = "error" if paired_terminal.body.status == "error" else "ok"
            set_attribute_defensive(
                attrs, ATTRIBUTE_PREFIX + "terminal_event_id", paired_terminal.event_id
            )
        elif event.body.status in ("complete", "error"):
            # Lone terminal: back-date the start by the reported duration.
            status = "error" if event.body.status == "error" else "ok"
            duration_ns = int((event.body.duration_ms or 0.0) * 1e6)
            start_ns = start_ns - duration_ns
            end_ns = max(start_ns + duration_ns, start_ns + 1000)
        return ExportSpan(
            trace_id=event.trace_id,
            span_id=event.span_id,
            parent_span_id=event.parent_span_id,
            name=event.body.method,
            start_time_unix_nano=start_ns,
            end_time_unix_nano=end_ns,
            status=status,
            attributes=attrs,
        )

    put_body(event)
    name = (
        f"cognitive.{event.body.extraction_strategy}"
        if event.surface == "cognitive"
        else _contextual_name(event)
    )
    return ExportSpan(
        trace_id=event.trace_id,
        span_id=derived_span_id(event.event_id),
        parent_span_id=event.span_id,
        name=name,
        start_time_unix_nano=start_ns,
        end_time_unix_nano=start_ns + 1000,  # 1 µs floor
        status="unset",
        attributes=attrs,
    )


def trace_to_spans(events: Iterable[LogEvent]) -> list[ExportSpan]:
    """Convert one trace's events into spans, pairing operational events."""
    from .assembly import pair_events  # local import to avoid a cycle

    events = list(events)
    spans_out: list[ExportSpan] = []
    by_trace: dict[str, list[LogEvent]] = {}
    for event in events:
        by_trace.setdefault(event.trace_id, []).append(event)
    for trace_events in by_trace.values():
        paired, anomalies = pair_events(trace_events)
        anomalous_op_ids = {a.event_id for a in anomalies if a.surface == "operational"}
        for span in paired:
            spans_out.append(event_to_span(span.start_event, span.terminal_event))
        for event in trace_events:
            if event.surface != "operational":
                spans_out.append(event_to_span(event))
            elif event.event_id in anomalous_op_ids:
                spans_out.append(event_to_span(event))
    return spans_out


# ---------------------------------------------------------------------------
# Span line encoding (delivery wire format and fallback file format)
# ---------------------------------------------------------------------------


def encode_span_line(span: ExportSpan) -> bytes:
    """One LF-terminated JSON span-line: fixed key order, sorted attributes,
    absent parent omitted, no nulls."""
    parts = []

    def add(key: str, rendered: str) -> None:
        parts.append(f"{json.dumps(key)}:{rendered}")

    add("trace_id", json.dumps(span.trace_id))
    add("span_id", json.dumps(span.span_id))
    if span.parent_span_id is not None:
        add("parent_span_id", json.dumps(span.parent_span_id))
    add("name", json.dumps(span.name, ensure_ascii=False))
    add("start_time_unix_nano", str(span.start_time_unix_nano))
    add("end_time_unix_nano", str(span.end_time_unix_nano))
    add("status", json.dumps(span.status))
    attr_parts = []
    for key in sorted(span.attributes):
        value = span.attributes[key]
        if isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, (int, float)):
            rendered = format_number(value)
        else:
            rendered = json.dumps(value, ensure_ascii=False)
        attr_parts.append(f"{json.dumps(key, ensure_ascii=False)}:{rendered}")
    add("attributes", "{" + ",".join(attr_parts) + "}")
    return ("{" + ",".join(parts) + "}\n").encode("utf-8")


def decode_span_line(line: Union[bytes, str]) -> ExportSpan:
    if isinstance(line, bytes):
        line = line.decode("utf-8")
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed span line: {exc}") from exc
    return ExportSpan(
        trace_id=record["trace_id"],
        span_id=record["span_id"],
        parent_span_id=record.get("parent_span_id"),
        name=record["name"],
        start_time_unix_nano=record["start_time_unix_nano"],
        end_time_unix_nano=record["end_time_unix_nano"],
        status=record["status"],
        attributes=record.get("attributes", {}),
    )


# ---------------------------------------------------------------------------
# Batch exporter
# ---------------------------------------------------------------------------


def http_deliver(endpoint: str, batch: list[ExportSpan], timeout: float = 5.0) -> None:
    """POST a batch as LF-delimited span-lines to <endpoint>/v1/spans.

    Raises on any non-2xx response or transport failure.
    """
    body = b"".join(encode_span_line(span) for span in batch)
    request = urllib.request.Request(
        endpoint.rstrip("/") + "/v1/spans",
        data=body,
        headers={"Content-Type": "application/x-ndjson"},
        method="POST",
    )
    with urllib.request.urlopen(request, timeout=timeout) as response:
        if not 200 <= response.status < 300:
            raise RuntimeError(f"span endpoint returned {response.status}")


class SpanExporter:
    """Bounded-queue batch exporter with local degradation.

    enqueue() is lock-append only (no I/O), so producers never stall on the
    network. A background flusher ships batches when batch_max accumulates or
    flush_interval elapses; failed batches and queue overflow spill to the
    fallback span-line file. shutdown() drains within a deadline and degrades
    the remainder.
    """

    def __init__(
        self,
        config: ExporterConfig,
        deliver: Optional[Callable[[list[ExportSpan]], None]] = None,
    ):
        self.config = config
        if deliver is not None:
            self._deliver = deliver
        elif config.endpoint:
            self._deliver = lambda batch: http_deliver(config.endpoint, batch)
        else:
            self._deliver = None
        self.outcomes: list[ExportOutcome] = []
        self.enqueued = 0
        self.delivered = 0
        self.degraded = 0
        self.lost = 0
        self.overflow_spills = 0
        self._queue: list[ExportSpan] = []
        self._spill: list[ExportSpan] = []
        self._lock = threading.Lock()
        self._wake = threading.Condition(self._lock)
        self._stopping = False
        self._thread = threading.Thread(target=self._run, name="span-exporter", daemon=True)
        self._thread.start()

    # -- producer side -----------------------------------------------------

    def enqueue(self, span: ExportSpan) -> None:
        with self._wake:
            self.enqueued += 1
            self._queue.append(span)
            if len(self._queue) > self.config.queue_cap:
                # Spill the oldest batch into the in-memory spill buffer; the
                # flusher writes it to the fallback file off the hot path.
                batch = self._queue[: self.config.batch_max]
                del self._queue[: self.config.batch_max]
                self._spill.extend(batch)
                self.overflow_spills += 1
            if len(self._queue) >= self.config.batch_max or self._spill:
                self._wake.notify()

    def enqueue_event(self, event: LogEvent, paired_terminal: Optional[LogEvent] = None) -> None:
        self.enqueue(event_to_span(event, paired_terminal))

    # -- flusher -----------------------------------------------------------

    def _run(self) -> None:
        interval = self.config.flush_interval_ms / 1000.0
        while True:
            with self._wake:
                if not self._queue and not self._spill and not self._stopping:
                    self._wake.wait(timeout=interval)
                if self._stopping and not self._queue and not self._spill:
                    break
                batch = self._queue[: self.config.batch_max]
                del self._queue[: len(batch)]
                spill = self._spill
                self._spill = []
            if spill:
                self._degrade(spill, "queue overflow")
            if batch:
                self._ship(batch)

    def _ship(self, batch: list[ExportSpan]) -> None:
        if self._deliver is None:
            self._degrade(batch, "no endpoint configured")
            return
        try:
            self._deliver(batch)
        except Exception as exc:  # delivery must never take the process down
            logger.warning("span delivery failed (%s); degrading %d spans", exc, len(batch))
            self._degrade(batch, f"delivery failed: {exc}")
            return
        with self._lock:
            self.delivered += len(batch)
            self.outcomes.append(ExportOutcome(len(batch), "delivered"))

    def _degrade(self, batch: list[ExportSpan], reason: str) -> None:
        try:
            path = Path(self.config.fallback_path)
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "ab") as fh:
                for span in batch:
                    fh.write(encode_span_line(span))
            with self._lock:
                self.degraded += len(batch)
                self.outcomes.append(ExportOutcome(len(batch), "degraded", reason))
        except OSError as exc:
            logger.error("fallback write failed; %d spans lost: %s", len(batch), exc)
            with self._lock:
                self.lost += len(batch)
                self.outcomes.append(ExportOutcome(len(batch), "lost", str(exc)))

    # -- lifecycle ----------------------------------------------------------

    def flush(self, timeout: float = 10.0) -> None:
        """Block until everything enqueued so far is shipped or degraded."""
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            with self._wake:
                if not self._queue and not self._spill:
                    return
                self._wake.notify()
            time.sleep(0.01)

    def shutdown(self, deadline_seconds: float = 5.0) -> None:
        self.flush(timeout=deadline_seconds)
        with self._wake:
            self._stopping = True
            remainder = self._queue
            self._queue = []
            self._wake.notify()
        if remainder:
            self._degrade(remainder, "shutdown deadline")
        self._thread.join(timeout=deadline_seconds)

    def accounting(self) -> dict[str, int]:
        with self._lock:
            return {
                "enqueued": self.enqueued,
                "delivered": self.delivered,
                "degraded": self.degraded,
                "lost": self.lost,
            }


class LivePairer:
    """Pairs operational starts with terminals as events stream through the
    collector, feeding complete spans to an exporter.

    Starts park until their terminal arrives (bounded; stale starts export as
    open on flush). Cognitive/contextual events export immediately.
    """

    def __init__(self, exporter: SpanExporter, max_pending: int = 65536):
        self.exporter = exporter
        self.max_pending = max_pending
        self._pending: dict[tuple[str, str], LogEvent] = {}
        self._lock = threading.Lock()

    def feed(self, event: LogEvent) -> None:
        if event.surface != "operational":
            self.exporter.enqueue_event(event)
            return
        key = (event.trace_id, event.span_id)
        if event.body.status == "start":
            with self._lock:
                self._pending[key] = event
                overflow = len(self._pending) > self.max_pending
                if overflow:
                    evict_key = next(iter(self._pending))
                    evicted = self._pending.pop(evict_key)
                else:
                    evicted = None
            if evicted is not None:
                self.exporter.enqueue_event(evicted)
            return
        with self._lock:
            start = self._pending.pop(key, None)
        if start is not None:
            self.exporter.enqueue_event(start, event)
        else:
            self.exporter.enqueue_event(event)

    def flush(self) -> None:
        with self._lock:
            pending = list(self._pending.values())
            self._pending.clear()
        for start in pending:
            self.exporter.enqueue_event(start)
