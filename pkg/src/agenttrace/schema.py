"""Canonical event types, identifier generation, validation, and line encoding.

Every event, whatever its surface, is carried by the same envelope and is
serialized to exactly one LF-terminated UTF-8 JSON line. The line format is
normative: fixed key order, absent optionals omitted (never null), numbers
rendered without exponent notation. ``decode_line(encode_line(e)) == e`` for
every valid event, and re-encoding a decoded line reproduces the input bytes.
"""

from __future__ import annotations

import json
import math
import re
import secrets
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from decimal import Decimal
from typing import Any, Mapping, Optional, Union
from urllib.parse import urlparse

SCHEMA_VERSION = "1"

SURFACES = ("operational", "cognitive", "contextual")
LEVELS = ("debug", "info", "warn", "error")
OPERATIONAL_STATUSES = ("start", "complete", "error")
EXTRACTION_STRATEGIES = ("xml_tag", "json_field", "marker", "none")
CONTEXTUAL_OP_TYPES = ("http", "sql", "nosql", "cache", "vector_db", "file")

# Hard caps on summary payloads; enforced at validation time, applied by
# emitters via truncate_summary().
MAX_OPERATIONAL_SUMMARY = 512
MAX_CONTEXTUAL_SUMMARY = 1024

ENVELOPE_KEYS = (
    "event_id",
    "surface",
    "trace_id",
    "span_id",
    "parent_span_id",
    "timestamp",
    "agent",
    "level",
    "body",
)
OPERATIONAL_KEYS = (
    "method",
    "status",
    "duration_ms",
    "arg_count",
    "args_summary",
    "result_type",
    "result_summary",
    "error_repr",
)
COGNITIVE_KEYS = (
    "thought",
    "plan",
    "reflection",
    "model",
    "prompt_tokens",
    "completion_tokens",
    "confidence",
    "extraction_strategy",
)
CONTEXTUAL_KEYS = (
    "op_type",
    "source",
    "query_summary",
    "response_summary",
    "status_code",
    "row_count",
    "provenance",
)

_TRACE_ID_RE = re.compile(r"^[0-9a-f]{32}$")
_SPAN_ID_RE = re.compile(r"^[0-9a-f]{16}$")
_UUID4_RE = re.compile(
    r"^[0-9a-f]{8}-[0-9a-f]{4}-4[0-9a-f]{3}-[89ab][0-9a-f]{3}-[0-9a-f]{12}$"
)
_TIMESTAMP_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}\.\d{6}Z$")
_TIMESTAMP_FMT = "%Y-%m-%dT%H:%M:%S.%fZ"

ZERO_TRACE_ID = "0" * 32
ZERO_SPAN_ID = "0" * 16


class EncodingError(Exception):
    """Event contains a value the line format cannot represent."""


class ParseError(Exception):
    """Line is not a well-formed JSON object (framing or syntax)."""


@dataclass(frozen=True)
class Violation:
    """A single schema rule broken by a decoded record."""

    field: str
    rule: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message} [{self.rule}]"


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def fields(self) -> set[str]:
        return {v.field for v in self.violations}


class ValidationError(Exception):
    """Well-formed JSON line that violates the schema."""

    def __init__(self, violations: tuple[Violation, ...]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


@dataclass(frozen=True)
class OperationalBody:
    """Method-call surface: one record per start/complete/error event."""

    method: str
    status: str
    duration_ms: Optional[float] = None
    arg_count: Optional[int] = None
    args_summary: Optional[str] = None
    result_type: Optional[str] = None
    result_summary: Optional[str] = None
    error_repr: Optional[str] = None

    surface = "operational"
    _keys = OPERATIONAL_KEYS


@dataclass(frozen=True)
class CognitiveBody:
    """Reasoning surface: extracted thought/plan/reflection material."""

    extraction_strategy: str
    thought: Optional[str] = None
    plan: Optional[str] = None
    reflection: Optional[str] = None
    model: Optional[str] = None
    prompt_tokens: Optional[int] = None
    completion_tokens: Optional[int] = None
    confidence: Optional[float] = None

    surface = "cognitive"
    _keys = COGNITIVE_KEYS


@dataclass(frozen=True)
class ContextualBody:
    """External-I/O surface: HTTP/DB/cache/vector-store/file interactions."""

    op_type: str
    source: str
    query_summary: Optional[str] = None
    response_summary: Optional[str] = None
    status_code: Optional[int] = None
    row_count: Optional[int] = None
    provenance: Optional[str] = None

    surface = "contextual"
    _keys = CONTEXTUAL_KEYS


SurfaceBody = Union[OperationalBody, CognitiveBody, ContextualBody]

_BODY_TYPES = {
    "operational": OperationalBody,
    "cognitive": CognitiveBody,
    "contextual": ContextualBody,
}


@dataclass(frozen=True)
class LogEvent:
    """The universal envelope record: one per emitted event, all surfaces."""

    event_id: str
    surface: str
    trace_id: str
    span_id: str
    timestamp: str
    agent: str
    level: str
    body: SurfaceBody
    parent_span_id: Optional[str] = None

    @property
    def timestamp_dt(self) -> datetime:
        return parse_timestamp(self.timestamp)


# ---------------------------------------------------------------------------
# Identifier and timestamp helpers
# ---------------------------------------------------------------------------


def new_trace_id() -> str:
    """Cryptographically random 128-bit trace id, never all-zero."""
    while True:
        tid = secrets.token_hex(16)
        if tid != ZERO_TRACE_ID:
            return tid


def new_span_id() -> str:
    """Cryptographically random 64-bit span id, never all-zero."""
    while True:
        sid = secrets.token_hex(8)
        if sid != ZERO_SPAN_ID:
            return sid


def new_event_id() -> str:
    return str(uuid.uuid4())


def format_timestamp(dt: datetime) -> str:
    """Render a UTC datetime as RFC3339 with microseconds and trailing Z."""
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc).replace(tzinfo=None)
    return dt.strftime(_TIMESTAMP_FMT)


def parse_timestamp(value: str) -> datetime:
    dt = datetime.strptime(value, _TIMESTAMP_FMT)
    return dt.replace(tzinfo=timezone.utc)


def now_timestamp() -> str:
    return format_timestamp(datetime.now(timezone.utc))


_TRUNCATION_SUFFIX = "…[truncated, {n} total]"


def truncate_summary(text: str, limit: int) -> str:
    """Hard-truncate to ``limit`` chars, appending a marker with the original
    length. The result never exceeds ``limit`` characters."""
    if len(text) <= limit:
        return text
    suffix = _TRUNCATION_SUFFIX.format(n=len(text))
    return text[: limit - len(suffix)] + suffix


def make_event(
    agent: str,
    body: SurfaceBody,
    *,
    level: str = "info",
    trace_id: Optional[str] = None,
    span_id: Optional[str] = None,
    parent_span_id: Optional[str] = None,
    timestamp: Optional[str] = None,
    event_id: Optional[str] = None,
) -> LogEvent:
    """Build an event with fresh ids/timestamp where not supplied."""
    return LogEvent(
        event_id=event_id or new_event_id(),
        surface=body.surface,
        trace_id=trace_id or new_trace_id(),
        span_id=span_id or new_span_id(),
        parent_span_id=parent_span_id,
        timestamp=timestamp or now_timestamp(),
        agent=agent,
        level=level,
        body=body,
    )


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _is_str(v: Any) -> bool:
    return isinstance(v, str)


def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


class _Checker:
    """Collects field-level violations; never raises on bad data."""

    def __init__(self, record: Mapping[str, Any]):
        self.record = record
        self.violations: list[Violation] = []

    def add(self, field_name: str, rule: str, message: str) -> None:
        self.violations.append(Violation(field_name, rule, message))

    def require_str(self, key: str, *, non_empty: bool = False) -> Optional[str]:
        if key not in self.record:
            self.add(key, "required", "required field is missing")
            return None
        v = self.record[key]
        if v is None:
            self.add(key, "null_forbidden", "null is never valid; omit the field")
            return None
        if not _is_str(v):
            self.add(key, "type", f"expected string, got {type(v).__name__}")
            return None
        if non_empty and not v:
            self.add(key, "non_empty", "must be a non-empty string")
            return None
        return v

    def violated_body_fields(self) -> set[str]:
        return {
            v.field.split(".", 1)[1]
            for v in self.violations
            if v.field.startswith("body.")
        }


def _check_body_fields(
    chk: _Checker,
    body: Mapping[str, Any],
    prefix: str,
    spec: dict[str, dict[str, Any]],
) -> dict[str, Any]:
    """Generic presence/type/range pass over a body. Returns fields that
    individually passed (used by cross-field rules)."""
    good: dict[str, Any] = {}
    for key, rules in spec.items():
        path = f"{prefix}.{key}"
        if key not in body:
            if rules.get("required"):
                chk.add(path, "required", "required field is missing")
            continue
        v = body[key]
        if v is None:
            chk.add(path, "null_forbidden", "null is never valid; omit the field")
            continue
        kind = rules["kind"]
        if kind == "str":
            if not _is_str(v):
                chk.add(path, "type", f"expected string, got {type(v).__name__}")
                continue
            max_len = rules.get("max_len")
            if max_len is not None and len(v) > max_len:
                chk.add(path, "max_len", f"exceeds {max_len} characters ({len(v)})")
                continue
        elif kind == "int":
            if not _is_int(v):
                chk.add(path, "type", f"expected integer, got {type(v).__name__}")
                continue
            if rules.get("min") is not None and v < rules["min"]:
                chk.add(path, "range", f"must be >= {rules['min']}")
                continue
        elif kind == "number":
            if not _is_number(v):
                chk.add(path, "type", f"expected number, got {type(v).__name__}")
                continue
            if not math.isfinite(v):
                chk.add(path, "finite", "must be a finite number")
                continue
            if rules.get("min") is not None and v < rules["min"]:
                chk.add(path, "range", f"must be >= {rules['min']}")
                continue
            if rules.get("max") is not None and v > rules["max"]:
                chk.add(path, "range", f"must be <= {rules['max']}")
                continue
        elif kind == "enum":
            if not _is_str(v) or v not in rules["values"]:
                chk.add(path, "enum", f"must be one of {rules['values']}")
                continue
        good[key] = v
    return good


_OPERATIONAL_SPEC = {
    "method": {"kind": "str", "required": True},
    "status": {"kind": "enum", "values": OPERATIONAL_STATUSES, "required": True},
    "duration_ms": {"kind": "number", "min": 0},
    "arg_count": {"kind": "int", "min": 0},
    "args_summary": {"kind": "str", "max_len": MAX_OPERATIONAL_SUMMARY},
    "result_type": {"kind": "str"},
    "result_summary": {"kind": "str", "max_len": MAX_OPERATIONAL_SUMMARY},
    "error_repr": {"kind": "str"},
}

_COGNITIVE_SPEC = {
    "thought": {"kind": "str"},
    "plan": {"kind": "str"},
    "reflection": {"kind": "str"},
    "model": {"kind": "str"},
    "prompt_tokens": {"kind": "int", "min": 0},
    "completion_tokens": {"kind": "int", "min": 0},
    "confidence": {"kind": "number", "min": 0.0, "max": 1.0},
    "extraction_strategy": {
        "kind": "enum",
        "values": EXTRACTION_STRATEGIES,
        "required": True,
    },
}

_CONTEXTUAL_SPEC = {
    "op_type": {"kind": "enum", "values": CONTEXTUAL_OP_TYPES, "required": True},
    "source": {"kind": "str", "required": True},
    "query_summary": {"kind": "str", "max_len": MAX_CONTEXTUAL_SUMMARY},
    "response_summary": {"kind": "str", "max_len": MAX_CONTEXTUAL_SUMMARY},
    "status_code": {"kind": "int"},
    "row_count": {"kind": "int", "min": 0},
    "provenance": {"kind": "str"},
}

_BODY_SPECS = {
    "operational": _OPERATIONAL_SPEC,
    "cognitive": _COGNITIVE_SPEC,
    "contextual": _CONTEXTUAL_SPEC,
}

# Keys whose presence identifies a body variant, used to tell a wrong-surface
# body apart from a merely incomplete one.
_BODY_DISCRIMINANTS = {
    "operational": {"method", "status"},
    "cognitive": {"extraction_strategy"},
    "contextual": {"op_type", "source"},
}


def _classify_body(body: Mapping[str, Any]) -> list[str]:
    keys = set(body.keys())
    return [s for s, disc in _BODY_DISCRIMINANTS.items() if disc <= keys]


def validate_event(record: Mapping[str, Any]) -> ValidationResult:
    """Check every schema invariant on a decoded record.

    Total: any input mapping yields a result, never an exception. Violations
    name the offending field (dotted path for body fields) and the rule.
    Unknown keys are ignored for forward compatibility.
    """
    chk = _Checker(record)

    v = chk.require_str("event_id")
    if v is not None and not _UUID4_RE.match(v):
        chk.add("event_id", "uuid4", "must be a canonical lowercase UUIDv4 string")

    surface = chk.require_str("surface")
    if surface is not None and surface not in SURFACES:
        chk.add("surface", "enum", f"must be one of {SURFACES}")
        surface = None

    v = chk.require_str("trace_id")
    if v is not None:
        if not _TRACE_ID_RE.match(v):
            chk.add("trace_id", "format", "must be 32 lowercase hex characters")
        elif v == ZERO_TRACE_ID:
            chk.add("trace_id", "non_zero", "all-zero trace id is invalid")

    span_id = chk.require_str("span_id")
    if span_id is not None:
        if not _SPAN_ID_RE.match(span_id):
            chk.add("span_id", "format", "must be 16 lowercase hex characters")
            span_id = None
        elif span_id == ZERO_SPAN_ID:
            chk.add("span_id", "non_zero", "all-zero span id is invalid")

    if "parent_span_id" in record:
        p = record["parent_span_id"]
        if p is None:
            chk.add("parent_span_id", "null_forbidden", "null is never valid; omit the field")
        elif not _is_str(p) or not _SPAN_ID_RE.match(p):
            chk.add("parent_span_id", "format", "must be 16 lowercase hex characters")
        elif p == ZERO_SPAN_ID:
            chk.add("parent_span_id", "non_zero", "all-zero span id is invalid")
        elif span_id is not None and p == span_id:
            chk.add("parent_span_id", "self_parent", "must differ from span_id")

    v = chk.require_str("timestamp")
    if v is not None:
        if not _TIMESTAMP_RE.match(v):
            chk.add(
                "timestamp",
                "format",
                "must be RFC3339 UTC with microseconds and trailing Z",
            )
        else:
            try:
                parse_timestamp(v)
            except ValueError:
                chk.add("timestamp", "format", "not a real calendar instant")

    chk.require_str("agent", non_empty=True)

    v = chk.require_str("level")
    if v is not None and v not in LEVELS:
        chk.add("level", "enum", f"must be one of {LEVELS}")

    if "body" not in record:
        chk.add("body", "required", "required field is missing")
        return ValidationResult(tuple(chk.violations))
    body = record["body"]
    if not isinstance(body, Mapping):
        chk.add("body", "type", f"expected object, got {type(body).__name__}")
        return ValidationResult(tuple(chk.violations))

    if surface is not None:
        variants = _classify_body(body)
        if len(variants) == 1 and variants[0] != surface:
            chk.add(
                "body",
                "surface_body_mismatch",
                f"surface is {surface} but body is tagged {variants[0]}",
            )
            return ValidationResult(tuple(chk.violations))
        good = _check_body_fields(chk, body, "body", _BODY_SPECS[surface])
        if surface == "operational":
            _check_operational_rules(chk, good)
        elif surface == "cognitive":
            _check_cognitive_rules(chk, good)
        elif surface == "contextual":
            _check_contextual_rules(chk, good)

    return ValidationResult(tuple(chk.violations))


def _check_operational_rules(chk: _Checker, good: dict[str, Any]) -> None:
    # Conditional rules are gated on a valid status so a bad enum value is
    # flagged exactly once.
    status = good.get("status")
    if status == "start":
        if "duration_ms" in good:
            chk.add("body.duration_ms", "forbidden_for_start", "start events carry no duration")
        if "error_repr" in good:
            chk.add("body.error_repr", "only_for_error", "present only when status is error")
    elif status in ("complete", "error"):
        if "duration_ms" not in good and "duration_ms" not in chk.violated_body_fields():
            chk.add("body.duration_ms", "required_for_terminal", "terminal events must report duration")
        if status == "error":
            if "error_repr" not in good and "error_repr" not in chk.violated_body_fields():
                chk.add("body.error_repr", "required_for_error", "error events must carry error_repr")
        elif "error_repr" in good:
            chk.add("body.error_repr", "only_for_error", "present only when status is error")


def _check_cognitive_rules(chk: _Checker, good: dict[str, Any]) -> None:
    strategy = good.get("extraction_strategy")
    if strategy is not None and strategy != "none":
        if not any(good.get(k) for k in ("thought", "plan", "reflection")):
            chk.add(
                "body",
                "empty_cognitive_payload",
                "one of thought/plan/reflection must be non-empty unless strategy is none",
            )


def _check_contextual_rules(chk: _Checker, good: dict[str, Any]) -> None:
    if good.get("op_type") == "http" and "source" in good:
        parsed = urlparse(good["source"])
        if not parsed.scheme or not parsed.netloc:
            chk.add("body.source", "url", "http events require a URL with scheme and host")


# ---------------------------------------------------------------------------
# Record <-> event conversion
# ---------------------------------------------------------------------------


def event_to_record(event: LogEvent) -> dict[str, Any]:
    """Ordered plain-dict form of an event, absent optionals omitted."""
    record: dict[str, Any] = {}
    for key in ENVELOPE_KEYS:
        if key == "body":
            continue
        value = getattr(event, key)
        if value is None:
            continue
        record[key] = value
    body: dict[str, Any] = {}
    for key in event.body._keys:
        value = getattr(event.body, key)
        if value is None:
            continue
        body[key] = value
    record["body"] = body
    return record


def record_to_event(record: Mapping[str, Any]) -> LogEvent:
    """Build a LogEvent from a validated record; unknown keys are dropped."""
    surface = record["surface"]
    body_type = _BODY_TYPES[surface]
    raw_body = record["body"]
    body = body_type(**{k: raw_body[k] for k in body_type._keys if k in raw_body})
    return LogEvent(
        event_id=record["event_id"],
        surface=surface,
        trace_id=record["trace_id"],
        span_id=record["span_id"],
        parent_span_id=record.get("parent_span_id"),
        timestamp=record["timestamp"],
        agent=record["agent"],
        level=record["level"],
        body=body,
    )


# ---------------------------------------------------------------------------
# Line encoding
# ---------------------------------------------------------------------------


def format_number(value: Union[int, float]) -> str:
    """Serialize a number without exponent notation, preserving round-trip."""
    if _is_int(value):
        return str(value)
    if not math.isfinite(value):
        raise EncodingError(f"non-finite number is not representable: {value!r}")
    text = repr(value)
    if "e" in text or "E" in text:
        # Decimal(repr(x)) is the shortest decimal that reparses to x, so the
        # positional rendering round-trips exactly.
        text = format(Decimal(text), "f")
    return text


def _dump_object(obj: Mapping[str, Any]) -> str:
    parts = []
    for key, value in obj.items():
        if isinstance(value, str):
            rendered = json.dumps(value, ensure_ascii=False)
        elif isinstance(value, bool):
            raise EncodingError(f"boolean field {key!r} has no place in the schema")
        elif isinstance(value, (int, float)):
            rendered = format_number(value)
        elif isinstance(value, Mapping):
            rendered = _dump_object(value)
        else:
            raise EncodingError(f"field {key!r} has unencodable type {type(value).__name__}")
        parts.append(f"{json.dumps(key, ensure_ascii=False)}:{rendered}")
    return "{" + ",".join(parts) + "}"


def encode_line(event: LogEvent) -> bytes:
    """One UTF-8 JSON line, LF-terminated, in the normative key order.

    The caller is responsible for passing a valid event; encode_line only
    rejects values the format itself cannot carry.
    """
    text = _dump_object(event_to_record(event)) + "\n"
    try:
        return text.encode("utf-8")
    except UnicodeEncodeError as exc:
        raise EncodingError(f"event contains an unencodable string: {exc}") from exc


def decode_line(line: Union[bytes, str]) -> LogEvent:
    """Inverse of encode_line.

    Raises ParseError for malformed JSON (framing/syntax) and ValidationError
    for well-formed lines that break the schema. Unknown keys are tolerated
    and dropped.
    """
    if isinstance(line, bytes):
        try:
            text = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"invalid UTF-8: {exc}") from exc
    else:
        text = line
    text = text.rstrip("\r\n")
    if not text.strip():
        raise ParseError("empty line")
    try:
        record = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from exc
    if not isinstance(record, dict):
        raise ValidationError(
            (Violation("$", "not_an_object", "top-level value must be a JSON object"),)
        )
    result = validate_event(record)
    if not result.ok:
        raise ValidationError(result.violations)
    return record_to_event(record)
