"""Deterministic generators and oracles shared across the test suite.

Everything here is seeded: the same Random instance always yields the same
events, mutations, and forests, so failures reproduce. Ground truth is
recorded at generation time, independent of the code paths under test.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from typing import Callable, Optional

from agenttrace.schema import (
    CognitiveBody,
    ContextualBody,
    LogEvent,
    OperationalBody,
    event_to_record,
    format_timestamp,
)

BASE_TIME = datetime(2026, 8, 10, 12, 0, 0, tzinfo=timezone.utc)

_WORDS = [
    "alpha", "beta", "gamma", "查询", "café", "naïve", "done", "retry",
    "vector", "cache", 'quote"inside', "back\\slash", "tab\there",
    "line\nbreak", "emoji🙂", "Ω", "ok",
]


def rand_word(rng: random.Random) -> str:
    return rng.choice(_WORDS)


def rand_text(rng: random.Random, max_words: int = 6) -> str:
    return " ".join(rand_word(rng) for _ in range(rng.randint(1, max_words)))


def rand_trace_id(rng: random.Random) -> str:
    return f"{rng.getrandbits(128) | 1:032x}"


def rand_span_id(rng: random.Random) -> str:
    return f"{rng.getrandbits(64) | 1:016x}"


def rand_uuid(rng: random.Random) -> str:
    bits = rng.getrandbits(128)
    raw = f"{bits:032x}"
    return (
        raw[:8] + "-" + raw[8:12] + "-4" + raw[13:16] + "-"
        + rng.choice("89ab") + raw[17:20] + "-" + raw[20:32]
    )


def rand_timestamp(rng: random.Random) -> str:
    dt = BASE_TIME + timedelta(microseconds=rng.randint(0, 10**12))
    return format_timestamp(dt)


def rand_duration(rng: random.Random) -> float:
    pick = rng.random()
    if pick < 0.2:
        return float(rng.randint(0, 10_000))  # integer durations stay ints
    if pick < 0.3:
        return rng.random() * 1e-6  # exercises no-exponent encoding
    return round(rng.uniform(0.01, 30_000.0), 6)


def rand_operational_body(rng: random.Random, status: Optional[str] = None) -> OperationalBody:
    status = status or rng.choice(("start", "complete", "error"))
    kwargs = dict(method=rand_word(rng), status=status)
    if status != "start":
        kwargs["duration_ms"] = rand_duration(rng)
        if rng.random() < 0.7:
            kwargs["result_type"] = rng.choice(("str", "dict", "NoneType", "list"))
        if rng.random() < 0.7:
            kwargs["result_summary"] = rand_text(rng)
    if status == "error":
        kwargs["error_repr"] = f"ValueError({rand_word(rng)!r})"
    if rng.random() < 0.7:
        kwargs["arg_count"] = rng.randint(0, 9)
    if rng.random() < 0.7:
        kwargs["args_summary"] = rand_text(rng)
    return OperationalBody(**kwargs)


def rand_cognitive_body(rng: random.Random) -> CognitiveBody:
    strategy = rng.choice(("xml_tag", "json_field", "marker", "none"))
    kwargs = dict(extraction_strategy=strategy)
    if strategy != "none":
        kwargs[rng.choice(("thought", "plan", "reflection"))] = rand_text(rng)
    if rng.random() < 0.5:
        kwargs["model"] = rng.choice(("gpt-4o", "claude-3", "llama-3.1"))
    if rng.random() < 0.5:
        kwargs["prompt_tokens"] = rng.randint(0, 100_000)
        kwargs["completion_tokens"] = rng.randint(0, 100_000)
    if rng.random() < 0.4:
        kwargs["confidence"] = rng.choice((0.0, 1.0, 1e-8, round(rng.random(), 9)))
    return CognitiveBody(**kwargs)


def rand_contextual_body(rng: random.Random) -> ContextualBody:
    op_type = rng.choice(("http", "sql", "nosql", "cache", "vector_db", "file"))
    if op_type == "http":
        source = f"https://api-{rng.randint(0, 99)}.example.com/v{rng.randint(1, 3)}/q"
    elif op_type == "sql":
        source = "postgresql://db.internal:5432/agents"
    elif op_type == "file":
        source = f"/var/data/{rand_word(rng)}.bin"
    else:
        source = f"{op_type}://node-{rng.randint(0, 9)}.internal"
    kwargs = dict(op_type=op_type, source=source)
    if rng.random() < 0.6:
        kwargs["query_summary"] = rand_text(rng)
    if rng.random() < 0.6:
        kwargs["response_summary"] = rand_text(rng)
    if op_type == "http" and rng.random() < 0.8:
        kwargs["status_code"] = rng.choice((200, 201, 404, 500))
    if op_type in ("sql", "nosql", "vector_db") and rng.random() < 0.6:
        kwargs["row_count"] = rng.randint(0, 10_000)
    if rng.random() < 0.3:
        kwargs["provenance"] = rand_word(rng)
    return ContextualBody(**kwargs)


def rand_event(rng: random.Random, surface: Optional[str] = None) -> LogEvent:
    surface = surface or rng.choice(("operational", "cognitive", "contextual"))
    if surface == "operational":
        body = rand_operational_body(rng)
    elif surface == "cognitive":
        body = rand_cognitive_body(rng)
    else:
        body = rand_contextual_body(rng)
    span_id = rand_span_id(rng)
    parent = rand_span_id(rng) if rng.random() < 0.5 else None
    if parent == span_id:
        parent = None
    return LogEvent(
        event_id=rand_uuid(rng),
        surface=surface,
        trace_id=rand_trace_id(rng),
        span_id=span_id,
        parent_span_id=parent,
        timestamp=rand_timestamp(rng),
        agent=rng.choice(("planner", "researcher", "coder-1", "评审")),
        level=rng.choice(("debug", "info", "warn", "error")),
        body=body,
    )


# ---------------------------------------------------------------------------
# Mutation catalog for validation soundness/completeness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Mutation:
    name: str
    surface: Optional[str]  # base event constraint; None = any
    status: Optional[str]  # operational status constraint
    apply: Callable[[dict, random.Random], None]
    expected_field: str


def _set(key, value):
    def apply(record, rng):
        record[key] = value

    return apply


def _set_body(key, value):
    def apply(record, rng):
        record["body"][key] = value

    return apply


def _del_body(key):
    def apply(record, rng):
        record["body"].pop(key, None)

    return apply


def _swap_body_to_cognitive(record, rng):
    record["body"] = {"extraction_strategy": "marker", "thought": "swapped"}


def _swap_body_to_operational(record, rng):
    record["body"] = {"method": "run", "status": "start"}


def _clear_cognitive_payload(record, rng):
    for key in ("thought", "plan", "reflection"):
        record["body"].pop(key, None)
    if record["body"]["extraction_strategy"] == "none":
        record["body"]["extraction_strategy"] = "marker"


def _http_bad_source(record, rng):
    record["body"]["op_type"] = "http"
    record["body"]["source"] = "not a url"


def _parent_equals_span(record, rng):
    record["parent_span_id"] = record["span_id"]


MUTATIONS: list[Mutation] = [
    Mutation("event_id_not_uuid", None, None, _set("event_id", "not-a-uuid"), "event_id"),
    Mutation(
        "event_id_wrong_version", None, None,
        _set("event_id", "a3f1c2d4-5678-1abc-89ab-0123456789ab"), "event_id",
    ),
    Mutation("event_id_missing", None, None, lambda r, g: r.pop("event_id"), "event_id"),
    Mutation("surface_unknown", None, None, _set("surface", "internal"), "surface"),
    Mutation("trace_id_short", None, None, _set("trace_id", "abc123"), "trace_id"),
    Mutation("trace_id_uppercase", None, None, _set("trace_id", "A" * 32), "trace_id"),
    Mutation("trace_id_zero", None, None, _set("trace_id", "0" * 32), "trace_id"),
    Mutation("span_id_short", None, None, _set("span_id", "ff00"), "span_id"),
    Mutation("span_id_zero", None, None, _set("span_id", "0" * 16), "span_id"),
    Mutation("parent_bad_format", None, None, _set("parent_span_id", "xyz"), "parent_span_id"),
    Mutation("parent_zero", None, None, _set("parent_span_id", "0" * 16), "parent_span_id"),
    Mutation("parent_equals_span", None, None, _parent_equals_span, "parent_span_id"),
    Mutation("parent_null", None, None, _set("parent_span_id", None), "parent_span_id"),
    Mutation(
        "timestamp_no_z", None, None,
        _set("timestamp", "2026-08-10T12:00:00.000000"), "timestamp",
    ),
    Mutation(
        "timestamp_ms_precision", None, None,
        _set("timestamp", "2026-08-10T12:00:00.123Z"), "timestamp",
    ),
    Mutation(
        "timestamp_bad_month", None, None,
        _set("timestamp", "2026-13-10T12:00:00.000000Z"), "timestamp",
    ),
    Mutation("timestamp_missing", None, None, lambda r, g: r.pop("timestamp"), "timestamp"),
    Mutation("agent_empty", None, None, _set("agent", ""), "agent"),
    Mutation("agent_wrong_type", None, None, _set("agent", 7), "agent"),
    Mutation("agent_missing", None, None, lambda r, g: r.pop("agent"), "agent"),
    Mutation("level_unknown", None, None, _set("level", "fatal"), "level"),
    Mutation("level_wrong_type", None, None, _set("level", 3), "level"),
    Mutation("body_missing", None, None, lambda r, g: r.pop("body"), "body"),
    Mutation("body_wrong_type", None, None, _set("body", "oops"), "body"),
    Mutation("body_swap_operational", "operational", None, _swap_body_to_cognitive, "body"),
    Mutation("body_swap_cognitive", "cognitive", None, _swap_body_to_operational, "body"),
    Mutation("body_swap_contextual", "contextual", None, _swap_body_to_operational, "body"),
    # operational
    Mutation("op_status_unknown", "operational", None, _set_body("status", "done"), "body.status"),
    Mutation("op_method_missing", "operational", None, _del_body("method"), "body.method"),
    Mutation("op_method_wrong_type", "operational", None, _set_body("method", 9), "body.method"),
    Mutation(
        "op_start_with_duration", "operational", "start",
        _set_body("duration_ms", 5.0), "body.duration_ms",
    ),
    Mutation(
        "op_terminal_missing_duration", "operational", "complete",
        _del_body("duration_ms"), "body.duration_ms",
    ),
    Mutation(
        "op_negative_duration", "operational", "complete",
        _set_body("duration_ms", -1.5), "body.duration_ms",
    ),
    Mutation(
        "op_error_missing_repr", "operational", "error",
        _del_body("error_repr"), "body.error_repr",
    ),
    Mutation(
        "op_complete_with_repr", "operational", "complete",
        _set_body("error_repr", "ValueError()"), "body.error_repr",
    ),
    Mutation(
        "op_args_summary_too_long", "operational", None,
        _set_body("args_summary", "x" * 513), "body.args_summary",
    ),
    Mutation(
        "op_arg_count_negative", "operational", None,
        _set_body("arg_count", -1), "body.arg_count",
    ),
    Mutation(
        "op_arg_count_float", "operational", None,
        _set_body("arg_count", 1.5), "body.arg_count",
    ),
    # cognitive
    Mutation(
        "cog_strategy_unknown", "cognitive", None,
        _set_body("extraction_strategy", "regex"), "body.extraction_strategy",
    ),
    Mutation("cog_empty_payload", "cognitive", None, _clear_cognitive_payload, "body"),
    Mutation(
        "cog_confidence_above_one", "cognitive", None,
        _set_body("confidence", 1.5), "body.confidence",
    ),
    Mutation(
        "cog_confidence_negative", "cognitive", None,
        _set_body("confidence", -0.1), "body.confidence",
    ),
    Mutation(
        "cog_prompt_tokens_negative", "cognitive", None,
        _set_body("prompt_tokens", -3), "body.prompt_tokens",
    ),
    Mutation(
        "cog_tokens_wrong_type", "cognitive", None,
        _set_body("completion_tokens", "many"), "body.completion_tokens",
    ),
    # contextual
    Mutation(
        "ctx_op_type_unknown", "contextual", None,
        _set_body("op_type", "grpc"), "body.op_type",
    ),
    Mutation("ctx_source_missing", "contextual", None, _del_body("source"), "body.source"),
    Mutation("ctx_http_source_not_url", "contextual", None, _http_bad_source, "body.source"),
    Mutation(
        "ctx_query_too_long", "contextual", None,
        _set_body("query_summary", "q" * 1025), "body.query_summary",
    ),
    Mutation(
        "ctx_row_count_negative", "contextual", None,
        _set_body("row_count", -2), "body.row_count",
    ),
    Mutation(
        "ctx_status_code_string", "contextual", None,
        _set_body("status_code", "500"), "body.status_code",
    ),
]


def mutated_record(rng: random.Random) -> tuple[dict, str, str]:
    """A valid record with exactly one mutation applied.

    Returns (record, mutation name, expected violated field).
    """
    mutation = rng.choice(MUTATIONS)
    event = rand_event(rng, surface=mutation.surface)
    if mutation.status is not None:
        event = replace(event, body=rand_operational_body(rng, status=mutation.status))
    record = event_to_record(event)
    mutation.apply(record, rng)
    return record, mutation.name, mutation.expected_field


# ---------------------------------------------------------------------------
# Forest generator with retained ground truth
# ---------------------------------------------------------------------------


@dataclass
class SpanTruth:
    span_id: str
    parent_span_id: Optional[str]  # as emitted (may dangle after orphaning)
    method: str
    start_us: int  # offset from BASE_TIME
    duration_us: int
    outcome: str  # complete | error | open
    attachments: list[tuple[int, str, str]] = field(default_factory=list)  # (at_us, event_id, surface)

    def expected_attachment_ids(self) -> list[str]:
        """Ids in the engine's deterministic (timestamp, event_id) order."""
        return [eid for _, eid, _ in sorted(self.attachments)]

    def attachment_surface_count(self, surface: str) -> int:
        return sum(1 for _, _, s in self.attachments if s == surface)


@dataclass
class ForestTruth:
    trace_id: str
    agent: str
    spans: dict[str, SpanTruth]
    roots: list[str]
    orphans: list[str]
    children: dict[str, list[str]]
    events: list[LogEvent]

    def expected_child_order(self, parent_id: str) -> list[str]:
        kids = self.children.get(parent_id, [])
        return sorted(kids, key=lambda sid: (self.spans[sid].start_us, sid))


def gen_forest(
    rng: random.Random,
    n_spans: int,
    *,
    orphan_frac: float = 0.1,
    error_frac: float = 0.1,
    open_frac: float = 0.0,
    attach_frac: float = 0.3,
) -> ForestTruth:
    """Random span forest; parentage, timing, outcomes, and attachments are
    all recorded before the events are materialized."""
    trace_id = rand_trace_id(rng)
    agent = rng.choice(("planner", "worker", "critic"))
    order: list[SpanTruth] = []
    for i in range(n_spans):
        if i == 0 or rng.random() < 0.12:
            parent = None
            start = rng.randint(0, 5_000_000)
        else:
            parent = order[rng.randrange(len(order))]
            start = parent.start_us + rng.randint(0, max(parent.duration_us, 1))
        duration = rng.randint(100, 5_000_000)
        outcome = "open" if rng.random() < open_frac else (
            "error" if rng.random() < error_frac else "complete"
        )
        truth = SpanTruth(
            span_id=rand_span_id(rng),
            parent_span_id=parent.span_id if parent else None,
            method=rng.choice(("run", "plan", "act", "reflect", "fetch")),
            start_us=start,
            duration_us=duration,
            outcome=outcome,
        )
        order.append(truth)

    # Orphan injection: rewire some non-roots to unknown parents.
    for truth in order:
        if truth.parent_span_id is not None and rng.random() < orphan_frac:
            truth.parent_span_id = rand_span_id(rng)

    spans = {t.span_id: t for t in order}
    roots = [t.span_id for t in order if t.parent_span_id is None]
    orphans = [t.span_id for t in order if t.parent_span_id is not None and t.parent_span_id not in spans]
    children: dict[str, list[str]] = {}
    for t in order:
        if t.parent_span_id is not None and t.parent_span_id in spans:
            children.setdefault(t.parent_span_id, []).append(t.span_id)

    events: list[LogEvent] = []

    def when(us: int) -> str:
        return format_timestamp(BASE_TIME + timedelta(microseconds=us))

    for t in order:
        events.append(
            LogEvent(
                event_id=rand_uuid(rng),
                surface="operational",
                trace_id=trace_id,
                span_id=t.span_id,
                parent_span_id=t.parent_span_id,
                timestamp=when(t.start_us),
                agent=agent,
                level="info",
                body=OperationalBody(method=t.method, status="start"),
            )
        )
        if t.outcome != "open":
            duration_ms = t.duration_us / 1000
            body = OperationalBody(
                method=t.method,
                status=t.outcome,
                duration_ms=duration_ms,
                result_type="str" if t.outcome == "complete" else None,
                error_repr="RuntimeError('boom')" if t.outcome == "error" else None,
            )
            events.append(
                LogEvent(
                    event_id=rand_uuid(rng),
                    surface="operational",
                    trace_id=trace_id,
                    span_id=t.span_id,
                    parent_span_id=t.parent_span_id,
                    timestamp=when(t.start_us + t.duration_us),
                    agent=agent,
                    level="error" if t.outcome == "error" else "info",
                    body=body,
                )
            )
        if rng.random() < attach_frac:
            for _ in range(rng.randint(1, 2)):
                surface = rng.choice(("cognitive", "contextual"))
                at = t.start_us + rng.randint(0, t.duration_us)
                body = (
                    CognitiveBody(extraction_strategy="marker", thought=rand_text(rng))
                    if surface == "cognitive"
                    else rand_contextual_body(rng)
                )
                eid = rand_uuid(rng)
                events.append(
                    LogEvent(
                        event_id=eid,
                        surface=surface,
                        trace_id=trace_id,
                        span_id=t.span_id,
                        parent_span_id=None,
                        timestamp=when(at),
                        agent=agent,
                        level="info",
                        body=body,
                    )
                )
                t.attachments.append((at, eid, surface))

    return ForestTruth(
        trace_id=trace_id,
        agent=agent,
        spans=spans,
        roots=roots,
        orphans=orphans,
        children=children,
        events=events,
    )


def brute_force_stats(truth: ForestTruth) -> dict:
    """Independent recount of the stats summary from the ground truth."""
    spans = truth.spans

    def leaf_paths(span_id: str) -> list[list[str]]:
        kids = truth.children.get(span_id, [])
        if not kids:
            return [[span_id]]
        return [[span_id] + path for kid in kids for path in leaf_paths(kid)]

    depth = 0
    critical = 0.0
    for head in truth.roots + truth.orphans:
        for path in leaf_paths(head):
            depth = max(depth, len(path) - 1)
            cost = sum(
                spans[s].duration_us / 1000 if spans[s].outcome != "open" else 0.0
                for s in path
            )
            critical = max(critical, cost)

    operational = sum(1 if s.outcome == "open" else 2 for s in spans.values())
    cognitive = sum(s.attachment_surface_count("cognitive") for s in spans.values())
    contextual = sum(s.attachment_surface_count("contextual") for s in spans.values())
    return {
        "span_count": len(spans),
        "open_span_count": sum(1 for s in spans.values() if s.outcome == "open"),
        "depth": depth,
        "total_duration_ms": sum(
            s.duration_us / 1000 for s in spans.values() if s.outcome != "open"
        ),
        "critical_path_ms": critical,
        "error_count": sum(1 for s in spans.values() if s.outcome == "error"),
        "operational_events": operational,
        "cognitive_events": cognitive,
        "contextual_events": contextual,
        "unanchored_events": 0,
        "anomaly_count": 0,
    }
