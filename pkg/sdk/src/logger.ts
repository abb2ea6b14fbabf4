/**
 * Event emission: synchronous append to the local JSONL sink (the source of
 * truth) plus asynchronous, bounded-buffer forwarding to the engine's HTTP
 * ingest endpoint. Sink failures never block or raise into the caller.
 */

import { appendFileSync, mkdirSync } from "node:fs";
import { dirname } from "node:path";

import {
  CognitiveBody,
  ContextualBody,
  Level,
  LogEvent,
  OperationalBody,
  Surface,
  encodeLine,
  formatTimestamp,
  newEventId,
  newSpanId,
  newTraceId,
  nowMicros,
} from "./wire.js";

export interface LoggerConfig {
  agent: string;
  /** Local JSONL sink; omit to disable file output. */
  localPath?: string;
  /** Engine base URL (e.g. http://127.0.0.1:9711); omit to disable forwarding. */
  endpoint?: string;
  /** Forward buffer flush cadence. */
  flushIntervalMs?: number;
  /** Forward buffer cap; oldest lines drop beyond it (counted). */
  bufferCap?: number;
  /** Contextual events mirror to the local file only when true. */
  mirrorContextual?: boolean;
}

export interface EmitOptions {
  traceId?: string;
  spanId?: string;
  parentSpanId?: string;
  level?: Level;
  timestampMicros?: number;
}

export class TraceLogger {
  readonly agent: string;
  readonly localPath?: string;
  readonly endpoint?: string;
  readonly mirrorContextual: boolean;
  dropped = 0;
  forwarded = 0;
  forwardErrors = 0;
  localWriteErrors = 0;

  private buffer: string[] = [];
  private readonly bufferCap: number;
  private readonly flushIntervalMs: number;
  private timer?: NodeJS.Timeout;
  private warnedPaths = new Set<string>();
  private inflight: Promise<void> = Promise.resolve();

  constructor(config: LoggerConfig) {
    this.agent = config.agent;
    this.localPath = config.localPath;
    this.endpoint = config.endpoint?.replace(/\/+$/, "");
    this.bufferCap = config.bufferCap ?? 10_000;
    this.flushIntervalMs = config.flushIntervalMs ?? 200;
    this.mirrorContextual = config.mirrorContextual ?? false;
    if (this.endpoint) {
      this.timer = setInterval(() => void this.flushForward(), this.flushIntervalMs);
      this.timer.unref();
    }
  }

  recordOperational(body: OperationalBody, options: EmitOptions = {}): LogEvent {
    return this.emit("operational", body, options);
  }

  recordCognitive(body: CognitiveBody, options: EmitOptions = {}): LogEvent {
    return this.emit("cognitive", body, options);
  }

  recordContextual(body: ContextualBody, options: EmitOptions = {}): LogEvent {
    return this.emit("contextual", body, options);
  }

  emit(
    surface: Surface,
    body: OperationalBody | CognitiveBody | ContextualBody,
    options: EmitOptions = {},
  ): LogEvent {
    const event: LogEvent = {
      event_id: newEventId(),
      surface,
      trace_id: options.traceId ?? newTraceId(),
      span_id: options.spanId ?? newSpanId(),
      parent_span_id: options.parentSpanId,
      timestamp: formatTimestamp(options.timestampMicros ?? nowMicros()),
      agent: this.agent,
      level: options.level ?? "info",
      body,
    };
    const line = encodeLine(event);
    const mirror = surface !== "contextual" || this.mirrorContextual;
    if (this.localPath && mirror) {
      try {
        appendFileSync(this.localPath, line, "utf8");
      } catch (err) {
        this.localWriteErrors++;
        if (!this.warnedPaths.has(this.localPath)) {
          this.warnedPaths.add(this.localPath);
          process.stderr.write(`agenttrace-sdk: cannot write ${this.localPath}: ${err}\n`);
        }
      }
    }
    if (this.endpoint) {
      this.buffer.push(line);
      if (this.buffer.length > this.bufferCap) {
        this.buffer.shift();
        this.dropped++;
      }
    }
    return event;
  }

  /** Ship the forward buffer; failures re-buffer (never block, never throw). */
  async flushForward(): Promise<void> {
    if (!this.endpoint || this.buffer.length === 0) return;
    const batch = this.buffer;
    this.buffer = [];
    const send = async () => {
      try {
        const response = await fetch(`${this.endpoint}/v1/ingest`, {
          method: "POST",
          body: batch.join(""),
          headers: { "Content-Type": "application/x-ndjson" },
        });
        if (!response.ok) throw new Error(`ingest returned ${response.status}`);
        this.forwarded += batch.length;
      } catch {
        this.forwardErrors++;
        this.buffer = batch.concat(this.buffer);
        const overflow = this.buffer.length - this.bufferCap;
        if (overflow > 0) {
          this.buffer.splice(0, overflow);
          this.dropped += overflow;
        }
      }
    };
    this.inflight = this.inflight.then(send, send);
    await this.inflight;
  }

  async shutdown(): Promise<void> {
    if (this.timer) clearInterval(this.timer);
    let attempts = 0;
    while (this.endpoint && this.buffer.length > 0 && attempts < 3) {
      attempts++;
      await this.flushForward();
      if (this.buffer.length > 0) await new Promise((r) => setTimeout(r, 50));
    }
  }
}

export function ensureParentDir(path: string): void {
  mkdirSync(dirname(path), { recursive: true });
}
