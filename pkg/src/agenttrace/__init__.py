"""AgentTrace engine: collection, validation, and analysis of LLM-agent
telemetry across the operational, cognitive, and contextual surfaces."""

from .schema import (
    CognitiveBody,
    ContextualBody,
    EncodingError,
    LogEvent,
    OperationalBody,
    ParseError,
    ValidationError,
    ValidationResult,
    Violation,
    decode_line,
    encode_line,
    make_event,
    new_span_id,
    new_trace_id,
    validate_event,
)
from .extraction import CognitivePayload, maybe_extract_cognitive
from .assembly import (
    Anomaly,
    CycleError,
    SpanRecord,
    StatsSummary,
    TraceTree,
    assemble_trace,
    build_trace_tree,
    check_causality,
    pair_events,
    render_tree,
    trace_stats,
)
from .store import CorruptSegment, EventStore, StorageFull
from .ingest import IngestReport, ingest_file
from .export import (
    ExporterConfig,
    ExportSpan,
    SpanExporter,
    event_to_span,
    set_attribute_defensive,
)

__version__ = "0.1.0"

__all__ = [
    "Anomaly",
    "CognitiveBody",
    "CognitivePayload",
    "ContextualBody",
    "CorruptSegment",
    "CycleError",
    "EncodingError",
    "EventStore",
    "ExportSpan",
    "ExporterConfig",
    "IngestReport",
    "LogEvent",
    "OperationalBody",
    "ParseError",
    "SpanExporter",
    "SpanRecord",
    "StatsSummary",
    "StorageFull",
    "TraceTree",
    "ValidationError",
    "ValidationResult",
    "Violation",
    "assemble_trace",
    "build_trace_tree",
    "check_causality",
    "decode_line",
    "encode_line",
    "event_to_span",
    "ingest_file",
    "make_event",
    "maybe_extract_cognitive",
    "new_span_id",
    "new_trace_id",
    "pair_events",
    "render_tree",
    "set_attribute_defensive",
    "trace_stats",
    "validate_event",
]
