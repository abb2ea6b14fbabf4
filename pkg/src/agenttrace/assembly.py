"""Span pairing, trace tree reconstruction, causality checks, and stats.

Assembly is a pure fold over an event multiset: any permutation of the same
events yields identical spans, trees, and anomalies (ties broken everywhere
by (timestamp, event_id)). Nothing is dropped — every input event ends up
paired into a span, attached to one, or reported as an anomaly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Iterable, Optional

from .schema import LogEvent, format_number

OUTCOMES = ("complete", "error", "open")
ANOMALY_KINDS = ("missing_start", "duplicate_terminal", "duplicate_start", "unanchored_event")


class CycleError(Exception):
    """parent_span_id links form a cycle — corrupted or adversarial input."""


@dataclass(frozen=True)
class AttachedEvent:
    """A cognitive/contextual event riding on an operational span."""

    event_id: str
    surface: str
    timestamp: datetime


@dataclass
class SpanRecord:
    """A start/terminal pair (or a lone start) as one unit of work."""

    span_id: str
    trace_id: str
    parent_span_id: Optional[str]
    agent: str
    method: str
    start_ts: datetime
    end_ts: Optional[datetime] = None
    duration_ms: Optional[float] = None
    outcome: str = "open"
    attachments: list[AttachedEvent] = field(default_factory=list)
    start_event: Optional[LogEvent] = None
    terminal_event: Optional[LogEvent] = None

    @property
    def attached_events(self) -> list[str]:
        return [a.event_id for a in self.attachments]

    @property
    def event_count(self) -> int:
        """Operational events folded into this span (1 open, 2 closed)."""
        return 1 if self.end_ts is None else 2


@dataclass(frozen=True)
class Anomaly:
    """An event that could not be paired or attached normally."""

    kind: str
    span_id: str
    event_id: str
    timestamp: str
    surface: str
    detail: str = ""


@dataclass
class TraceTree:
    """Parent/child forest of the spans sharing one trace id."""

    trace_id: str
    roots: list[SpanRecord]
    children: dict[str, list[SpanRecord]]
    orphans: list[SpanRecord]

    def all_spans(self) -> list[SpanRecord]:
        out: list[SpanRecord] = []

        def walk(span: SpanRecord) -> None:
            out.append(span)
            for child in self.children.get(span.span_id, []):
                walk(child)

        for root in self.roots:
            walk(root)
        for orphan in self.orphans:
            walk(orphan)
        return out


@dataclass(frozen=True)
class CausalityViolation:
    kind: str
    span_id: str
    detail: str
    event_id: Optional[str] = None


@dataclass
class StatsSummary:
    span_count: int = 0
    open_span_count: int = 0
    depth: int = 0
    total_duration_ms: float = 0.0
    critical_path_ms: float = 0.0
    error_count: int = 0
    operational_events: int = 0
    cognitive_events: int = 0
    contextual_events: int = 0
    unanchored_events: int = 0
    anomaly_count: int = 0

    def to_dict(self) -> dict:
        return {
            "span_count": self.span_count,
            "open_span_count": self.open_span_count,
            "depth": self.depth,
            "total_duration_ms": self.total_duration_ms,
            "critical_path_ms": self.critical_path_ms,
            "error_count": self.error_count,
            "operational_events": self.operational_events,
            "cognitive_events": self.cognitive_events,
            "contextual_events": self.contextual_events,
            "unanchored_events": self.unanchored_events,
            "anomaly_count": self.anomaly_count,
        }

    def merge(self, other: "StatsSummary") -> "StatsSummary":
        """Aggregate across traces: counts add, depths/critical paths max."""
        return StatsSummary(
            span_count=self.span_count + other.span_count,
            open_span_count=self.open_span_count + other.open_span_count,
            depth=max(self.depth, other.depth),
            total_duration_ms=self.total_duration_ms + other.total_duration_ms,
            critical_path_ms=max(self.critical_path_ms, other.critical_path_ms),
            error_count=self.error_count + other.error_count,
            operational_events=self.operational_events + other.operational_events,
            cognitive_events=self.cognitive_events + other.cognitive_events,
            contextual_events=self.contextual_events + other.contextual_events,
            unanchored_events=self.unanchored_events + other.unanchored_events,
            anomaly_count=self.anomaly_count + other.anomaly_count,
        )


def _sort_key(event: LogEvent) -> tuple[str, str]:
    # Fixed-width RFC3339 strings sort chronologically.
    return (event.timestamp, event.event_id)


def pair_events(events: Iterable[LogEvent]) -> tuple[list[SpanRecord], list[Anomaly]]:
    """Match operational start events to their terminals; attach the rest.

    All events must share one trace_id (partition upstream). Unmatched starts
    become open spans; terminals without a start, extra starts/terminals, and
    cognitive/contextual events on unknown spans become anomalies. The first
    terminal (by timestamp, then event_id) wins a duplicate race.
    """
    ordered = sorted(events, key=_sort_key)
    trace_ids = {e.trace_id for e in ordered}
    if len(trace_ids) > 1:
        raise ValueError(f"events span multiple traces: {sorted(trace_ids)}")

    op_groups: dict[str, list[LogEvent]] = {}
    attachables: list[LogEvent] = []
    for event in ordered:
        if event.surface == "operational":
            op_groups.setdefault(event.span_id, []).append(event)
        else:
            attachables.append(event)

    spans: dict[str, SpanRecord] = {}
    anomalies: list[Anomaly] = []

    def note(kind: str, event: LogEvent, detail: str = "") -> None:
        anomalies.append(
            Anomaly(
                kind=kind,
                span_id=event.span_id,
                event_id=event.event_id,
                timestamp=event.timestamp,
                surface=event.surface,
                detail=detail,
            )
        )

    for span_id, group in op_groups.items():
        starts = [e for e in group if e.body.status == "start"]
        terminals = [e for e in group if e.body.status != "start"]
        span: Optional[SpanRecord] = None
        if starts:
            first = starts[0]
            span = SpanRecord(
                span_id=span_id,
                trace_id=first.trace_id,
                parent_span_id=first.parent_span_id,
                agent=first.agent,
                method=first.body.method,
                start_ts=first.timestamp_dt,
                start_event=first,
            )
            spans[span_id] = span
            for extra in starts[1:]:
                note("duplicate_start", extra, "second start for the same span")
        if terminals:
            if span is not None:
                terminal = terminals[0]
                span.end_ts = terminal.timestamp_dt
                span.duration_ms = terminal.body.duration_ms
                span.outcome = terminal.body.status
                span.terminal_event = terminal
                rest = terminals[1:]
            else:
                note("missing_start", terminals[0], "terminal event with no start")
                rest = terminals[1:]
            for extra in rest:
                note("duplicate_terminal", extra, "span already terminated")

    for event in attachables:
        span = spans.get(event.span_id)
        if span is None:
            note("unanchored_event", event, "no operational span with this span_id")
        else:
            span.attachments.append(
                AttachedEvent(
                    event_id=event.event_id,
                    surface=event.surface,
                    timestamp=event.timestamp_dt,
                )
            )

    span_list = sorted(spans.values(), key=lambda s: (s.start_ts, s.span_id))
    anomalies.sort(key=lambda a: (a.timestamp, a.event_id))
    return span_list, anomalies


def build_trace_tree(spans: list[SpanRecord]) -> TraceTree:
    """Resolve parent links into a forest; dangling parents become orphans."""
    trace_ids = {s.trace_id for s in spans}
    if len(trace_ids) > 1:
        raise ValueError(f"spans span multiple traces: {sorted(trace_ids)}")
    trace_id = next(iter(trace_ids), "")

    by_id = {s.span_id: s for s in spans}
    _detect_cycles(by_id)

    roots: list[SpanRecord] = []
    orphans: list[SpanRecord] = []
    children: dict[str, list[SpanRecord]] = {}
    for span in spans:
        if span.parent_span_id is None:
            roots.append(span)
        elif span.parent_span_id in by_id:
            children.setdefault(span.parent_span_id, []).append(span)
        else:
            orphans.append(span)

    order = lambda s: (s.start_ts, s.span_id)
    roots.sort(key=order)
    orphans.sort(key=order)
    for kids in children.values():
        kids.sort(key=order)
    return TraceTree(trace_id=trace_id, roots=roots, children=children, orphans=orphans)


def _detect_cycles(by_id: dict[str, SpanRecord]) -> None:
    done: set[str] = set()
    for start_id in by_id:
        if start_id in done:
            continue
        path: list[str] = []
        on_path: set[str] = set()
        current: Optional[str] = start_id
        while current is not None and current in by_id and current not in done:
            if current in on_path:
                cycle = path[path.index(current) :]
                raise CycleError(f"parent links form a cycle: {' -> '.join(cycle + [current])}")
            path.append(current)
            on_path.add(current)
            current = by_id[current].parent_span_id
        done.update(path)


DURATION_TOLERANCE_MS = 1.0


def check_causality(tree: TraceTree) -> list[CausalityViolation]:
    """Flag temporal-fidelity breaches; reported, never corrected.

    Covers children starting before parents, spans ending before they start,
    attached events outside their span's window (open spans: lower bound
    only), and emitter-reported durations disagreeing with the timestamp
    delta by more than 1 ms.
    """
    violations: list[CausalityViolation] = []
    spans = tree.all_spans()
    by_id = {s.span_id: s for s in spans}

    for parent_id, kids in sorted(tree.children.items()):
        parent = by_id[parent_id]
        for child in kids:
            if child.start_ts < parent.start_ts:
                violations.append(
                    CausalityViolation(
                        kind="child_before_parent",
                        span_id=child.span_id,
                        detail=f"child starts before parent {parent_id}",
                    )
                )

    for span in spans:
        if span.end_ts is not None:
            if span.end_ts < span.start_ts:
                violations.append(
                    CausalityViolation(
                        kind="negative_span",
                        span_id=span.span_id,
                        detail="end_ts earlier than start_ts",
                    )
                )
            elif span.duration_ms is not None:
                delta_ms = (span.end_ts - span.start_ts) / timedelta(milliseconds=1)
                if abs(span.duration_ms - delta_ms) > DURATION_TOLERANCE_MS + 1e-9:
                    violations.append(
                        CausalityViolation(
                            kind="duration_mismatch",
                            span_id=span.span_id,
                            detail=(
                                f"reported {span.duration_ms} ms vs timestamp delta "
                                f"{delta_ms:.3f} ms"
                            ),
                        )
                    )
        for att in span.attachments:
            if att.timestamp < span.start_ts or (
                span.end_ts is not None and att.timestamp > span.end_ts
            ):
                violations.append(
                    CausalityViolation(
                        kind="attachment_outside_span",
                        span_id=span.span_id,
                        detail="attached event timestamped outside the span window",
                        event_id=att.event_id,
                    )
                )
    return violations


def trace_stats(tree: TraceTree, anomalies: Iterable[Anomaly] = ()) -> StatsSummary:
    """Exact counts plus critical-path duration for one trace.

    Depth counts edges (single span = 0). Critical path is the heaviest
    root-to-leaf duration sum over roots and orphan subtrees; open spans
    contribute 0. Anomalies, when supplied, fold into the per-surface event
    counts so the summary accounts for every ingested event.
    """
    stats = StatsSummary()
    spans = tree.all_spans()
    stats.span_count = len(spans)
    for span in spans:
        if span.outcome == "open":
            stats.open_span_count += 1
        if span.outcome == "error":
            stats.error_count += 1
        stats.total_duration_ms += span.duration_ms or 0.0
        stats.operational_events += span.event_count
        for att in span.attachments:
            if att.surface == "cognitive":
                stats.cognitive_events += 1
            else:
                stats.contextual_events += 1

    def path_cost(span: SpanRecord) -> tuple[int, float]:
        kids = tree.children.get(span.span_id, [])
        own = span.duration_ms or 0.0
        if not kids:
            return 0, own
        depths, costs = zip(*(path_cost(k) for k in kids))
        return 1 + max(depths), own + max(costs)

    for head in list(tree.roots) + list(tree.orphans):
        depth, cost = path_cost(head)
        stats.depth = max(stats.depth, depth)
        stats.critical_path_ms = max(stats.critical_path_ms, cost)

    for anomaly in anomalies:
        stats.anomaly_count += 1
        if anomaly.kind == "unanchored_event":
            stats.unanchored_events += 1
        if anomaly.surface == "operational":
            stats.operational_events += 1
        elif anomaly.surface == "cognitive":
            stats.cognitive_events += 1
        else:
            stats.contextual_events += 1
    return stats


def assemble_trace(events: Iterable[LogEvent]) -> tuple[TraceTree, list[SpanRecord], list[Anomaly]]:
    """pair_events + build_trace_tree in one step."""
    spans, anomalies = pair_events(events)
    return build_trace_tree(spans), spans, anomalies


def render_tree(tree: TraceTree) -> str:
    """Normative CLI rendering: `method [outcome, duration_ms] span_id`,
    children indented two spaces, roots then orphans."""
    lines: list[str] = []

    def emit(span: SpanRecord, depth: int) -> None:
        duration = format_number(span.duration_ms) if span.duration_ms is not None else "-"
        lines.append(f"{'  ' * depth}{span.method} [{span.outcome}, {duration}] {span.span_id}")
        for child in tree.children.get(span.span_id, []):
            emit(child, depth + 1)

    for root in tree.roots:
        emit(root, 0)
    for orphan in tree.orphans:
        emit(orphan, 0)
    return "\n".join(lines) + ("\n" if lines else "")


def conservation_accounts(
    spans: list[SpanRecord], anomalies: list[Anomaly]
) -> tuple[int, int, int]:
    """(paired, attached, anomalous) event counts — their sum must equal the
    number of input events."""
    paired = sum(s.event_count for s in spans)
    attached = sum(len(s.attachments) for s in spans)
    return paired, attached, len(anomalies)
