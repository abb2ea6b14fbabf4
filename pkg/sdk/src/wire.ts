/**
 * Event types and the normative JSONL line encoding.
 *
 * Every emitted line must pass the engine's validator: fixed key order,
 * absent optionals omitted (never null), RFC3339 UTC timestamps with
 * microsecond precision, numbers without exponent notation.
 */

import { randomBytes, randomUUID } from "node:crypto";

export type Surface = "operational" | "cognitive" | "contextual";
export type Level = "debug" | "info" | "warn" | "error";
export type OperationalStatus = "start" | "complete" | "error";
export type ExtractionStrategy = "xml_tag" | "json_field" | "marker" | "none";
export type ContextualOpType = "http" | "sql" | "nosql" | "cache" | "vector_db" | "file";

export const MAX_OPERATIONAL_SUMMARY = 512;
export const MAX_CONTEXTUAL_SUMMARY = 1024;

export interface OperationalBody {
  method: string;
  status: OperationalStatus;
  duration_ms?: number;
  arg_count?: number;
  args_summary?: string;
  result_type?: string;
  result_summary?: string;
  error_repr?: string;
}

export interface CognitiveBody {
  thought?: string;
  plan?: string;
  reflection?: string;
  model?: string;
  prompt_tokens?: number;
  completion_tokens?: number;
  confidence?: number;
  extraction_strategy: ExtractionStrategy;
}

export interface ContextualBody {
  op_type: ContextualOpType;
  source: string;
  query_summary?: string;
  response_summary?: string;
  status_code?: number;
  row_count?: number;
  provenance?: string;
}

export type SurfaceBody =
  | { surface: "operational"; body: OperationalBody }
  | { surface: "cognitive"; body: CognitiveBody }
  | { surface: "contextual"; body: ContextualBody };

export interface LogEvent {
  event_id: string;
  surface: Surface;
  trace_id: string;
  span_id: string;
  parent_span_id?: string;
  timestamp: string;
  agent: string;
  level: Level;
  body: OperationalBody | CognitiveBody | ContextualBody;
}

const ZERO_TRACE = "0".repeat(32);
const ZERO_SPAN = "0".repeat(16);

export function newTraceId(): string {
  for (;;) {
    const id = randomBytes(16).toString("hex");
    if (id !== ZERO_TRACE) return id;
  }
}

export function newSpanId(): string {
  for (;;) {
    const id = randomBytes(8).toString("hex");
    if (id !== ZERO_SPAN) return id;
  }
}

export function newEventId(): string {
  return randomUUID();
}

/** Wall-clock microseconds derived from the monotonic clock, so timestamps
 * never run backwards within a process. */
export function nowMicros(): number {
  return Math.round((performance.timeOrigin + performance.now()) * 1000);
}

const pad = (n: number, width: number) => String(n).padStart(width, "0");

export function formatTimestamp(micros: number): string {
  const wholeMs = Math.floor(micros / 1000);
  const microRemainder = micros - wholeMs * 1000;
  const d = new Date(wholeMs);
  return (
    `${d.getUTCFullYear()}-${pad(d.getUTCMonth() + 1, 2)}-${pad(d.getUTCDate(), 2)}` +
    `T${pad(d.getUTCHours(), 2)}:${pad(d.getUTCMinutes(), 2)}:${pad(d.getUTCSeconds(), 2)}` +
    `.${pad(d.getUTCMilliseconds(), 3)}${pad(microRemainder, 3)}Z`
  );
}

/** Milliseconds rounded to microsecond precision; never exponent notation. */
export function roundDuration(ms: number): number {
  return Math.max(0, Math.round(ms * 1000) / 1000);
}

function numberToken(value: number): string {
  if (!Number.isFinite(value)) {
    throw new Error(`non-finite number is not representable: ${value}`);
  }
  const text = String(value);
  if (!/[eE]/.test(text)) return text;
  // Extreme magnitudes only; expand positionally.
  return value.toFixed(20).replace(/0+$/, "").replace(/\.$/, "");
}

const ENVELOPE_KEYS: (keyof LogEvent)[] = [
  "event_id",
  "surface",
  "trace_id",
  "span_id",
  "parent_span_id",
  "timestamp",
  "agent",
  "level",
];

const BODY_KEYS: Record<Surface, string[]> = {
  operational: [
    "method",
    "status",
    "duration_ms",
    "arg_count",
    "args_summary",
    "result_type",
    "result_summary",
    "error_repr",
  ],
  cognitive: [
    "thought",
    "plan",
    "reflection",
    "model",
    "prompt_tokens",
    "completion_tokens",
    "confidence",
    "extraction_strategy",
  ],
  contextual: [
    "op_type",
    "source",
    "query_summary",
    "response_summary",
    "status_code",
    "row_count",
    "provenance",
  ],
};

function renderValue(value: unknown): string {
  if (typeof value === "string") return JSON.stringify(value);
  if (typeof value === "number") return numberToken(value);
  throw new Error(`unencodable value of type ${typeof value}`);
}

/** One LF-terminated JSON line in the engine's normative key order. */
export function encodeLine(event: LogEvent): string {
  const parts: string[] = [];
  for (const key of ENVELOPE_KEYS) {
    const value = event[key];
    if (value === undefined || value === null) continue;
    parts.push(`${JSON.stringify(key)}:${renderValue(value)}`);
  }
  const bodyParts: string[] = [];
  const body = event.body as unknown as Record<string, unknown>;
  for (const key of BODY_KEYS[event.surface]) {
    const value = body[key];
    if (value === undefined || value === null) continue;
    bodyParts.push(`${JSON.stringify(key)}:${renderValue(value)}`);
  }
  parts.push(`"body":{${bodyParts.join(",")}}`);
  return `{${parts.join(",")}}\n`;
}

/** Textual rendering for argument/result summaries: scalars verbatim,
 * collections as kind+size, everything else via String(). */
export function summarize(value: unknown, limit = MAX_OPERATIONAL_SUMMARY): string {
  let text: string;
  if (typeof value === "string") {
    text = JSON.stringify(value);
  } else if (value === null) {
    text = "null";
  } else if (value === undefined) {
    text = "undefined";
  } else if (Array.isArray(value)) {
    text = `Array(length=${value.length})`;
  } else if (value instanceof Map) {
    text = `Map(size=${value.size})`;
  } else if (value instanceof Set) {
    text = `Set(size=${value.size})`;
  } else if (typeof value === "function") {
    text = `Function(${value.name || "anonymous"})`;
  } else if (typeof value === "object") {
    text = `Object(keys=${Object.keys(value as object).length})`;
  } else {
    text = String(value);
  }
  return truncate(text, limit);
}

export function summarizeArgs(args: unknown[], limit = MAX_OPERATIONAL_SUMMARY): string {
  return truncate(args.map((a) => summarize(a, limit)).join(", "), limit);
}

export function truncate(text: string, limit: number): string {
  if (text.length <= limit) return text;
  const suffix = `…[truncated, ${text.length} total]`;
  return text.slice(0, limit - suffix.length) + suffix;
}

export function resultTypeName(value: unknown): string {
  if (value === null) return "null";
  if (value === undefined) return "undefined";
  if (Array.isArray(value)) return "Array";
  return typeof value === "object" ? (value as object).constructor?.name ?? "Object" : typeof value;
}
