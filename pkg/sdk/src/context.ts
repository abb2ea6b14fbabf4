/**
 * Ambient trace context carried across nested calls (sync and async) via
 * AsyncLocalStorage, so nesting works without threading ids through user
 * code. Top-level calls mint fresh trace ids; nested calls inherit the
 * outer trace and parent to the outer span.
 */

import { AsyncLocalStorage } from "node:async_hooks";

export interface TraceContext {
  traceId: string;
  spanId: string;
}

const storage = new AsyncLocalStorage<TraceContext>();

export function currentContext(): TraceContext | undefined {
  return storage.getStore();
}

export function runWithContext<T>(context: TraceContext, fn: () => T): T {
  return storage.run(context, fn);
}
