import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { beforeEach, describe, expect, it } from "vitest";

import { init, Sdk, LogEvent } from "../src/index.js";
import { currentContext as contextProbe } from "../src/context.js";

let sdk: Sdk;
let sinkPath: string;

beforeEach(() => {
  const dir = mkdtempSync(join(tmpdir(), "sdk-ctx-"));
  sinkPath = join(dir, "events.jsonl");
  sdk = init({ agent: "nested", localPath: sinkPath });
});

function readEvents(): LogEvent[] {
  return readFileSync(sinkPath, "utf8")
    .split("\n")
    .filter(Boolean)
    .map((line) => JSON.parse(line));
}

function byMethod(events: LogEvent[], method: string): LogEvent {
  return events.find(
    (e) => e.surface === "operational" && (e.body as { method: string; status: string }).method === method
      && (e.body as { status: string }).status === "start",
  )!;
}

class NestedAgent {
  run(): string {
    return `ran: ${this.plan()}`;
  }

  plan(): string {
    return `planned: ${this.lookup()}`;
  }

  lookup(): string {
    return "facts";
  }
}

describe("context propagation", () => {
  it("nested sync calls share the trace and parent correctly", () => {
    const agent = new NestedAgent();
    sdk.instrumentAgent(agent);
    expect(agent.run()).toBe("ran: planned: facts");
    const events = readEvents();
    const run = byMethod(events, "run");
    const plan = byMethod(events, "plan");
    const lookup = byMethod(events, "lookup");
    expect(new Set(events.map((e) => e.trace_id)).size).toBe(1);
    expect(run.parent_span_id).toBeUndefined();
    expect(plan.parent_span_id).toBe(run.span_id);
    expect(lookup.parent_span_id).toBe(plan.span_id);
  });

  it("independent top-level calls mint distinct trace ids", () => {
    const agent = new NestedAgent();
    sdk.instrumentAgent(agent, "nested", ["lookup"]);
    agent.lookup();
    agent.lookup();
    const traces = new Set(readEvents().map((e) => e.trace_id));
    expect(traces.size).toBe(2);
  });

  it("propagates through async boundaries", async () => {
    class AsyncAgent {
      async outer(): Promise<string> {
        await new Promise((r) => setTimeout(r, 5));
        return this.inner();
      }
      async inner(): Promise<string> {
        await new Promise((r) => setTimeout(r, 5));
        return "deep";
      }
    }
    const agent = new AsyncAgent();
    sdk.instrumentAgent(agent);
    expect(await agent.outer()).toBe("deep");
    const events = readEvents();
    const outer = byMethod(events, "outer");
    const inner = byMethod(events, "inner");
    expect(inner.trace_id).toBe(outer.trace_id);
    expect(inner.parent_span_id).toBe(outer.span_id);
  });

  it("manual contextual logging can attach to the ambient span", () => {
    const agent = {
      work(): number {
        const ctx = contextProbe()!;
        sdk.logger.recordContextual(
          {
            op_type: "sql",
            source: "postgresql://db.internal:5432/app",
            query_summary: "SELECT 1",
            row_count: 1,
          },
          { traceId: ctx.traceId, spanId: ctx.spanId },
        );
        return 1;
      },
    };
    sdk.instrumentAgent(agent);
    expect(agent.work()).toBe(1);
    // contextual events are not mirrored to the local file by default
    expect(readEvents().filter((e) => e.surface === "contextual")).toHaveLength(0);
  });
});

describe("contextual mirroring flag", () => {
  it("writes contextual events locally only when mirrorContextual is set", () => {
    const dir = mkdtempSync(join(tmpdir(), "sdk-mirror-"));
    const path = join(dir, "mirror.jsonl");
    const mirroring = init({ agent: "io", localPath: path, mirrorContextual: true });
    const agent = {
      work(): number {
        const ctx = contextProbe()!;
        mirroring.logger.recordContextual(
          { op_type: "cache", source: "cache://node-1.internal", query_summary: "GET k" },
          { traceId: ctx.traceId, spanId: ctx.spanId },
        );
        return 1;
      },
    };
    mirroring.instrumentAgent(agent);
    agent.work();
    const events = readFileSync(path, "utf8").split("\n").filter(Boolean).map(
      (l) => JSON.parse(l) as LogEvent,
    );
    const contextual = events.find((e) => e.surface === "contextual")!;
    const start = events.find(
      (e) => e.surface === "operational" && (e.body as { status: string }).status === "start",
    )!;
    expect(contextual.span_id).toBe(start.span_id);
    expect(contextual.trace_id).toBe(start.trace_id);
  });
});
