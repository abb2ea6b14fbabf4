/**
 * Runtime method wrapping: every selected public method is replaced in place
 * by a wrapper that emits a start event, runs the original, extracts any
 * reasoning segment from textual results, and emits a complete or error
 * event — re-raising the identical exception so semantics are preserved.
 */

import { currentContext, runWithContext } from "./context.js";
import { maybeExtractCognitive } from "./extraction.js";
import { TraceLogger } from "./logger.js";
import {
  newSpanId,
  newTraceId,
  nowMicros,
  resultTypeName,
  roundDuration,
  summarize,
  summarizeArgs,
  truncate,
} from "./wire.js";

const WRAPPED = Symbol.for("agenttrace.wrapped");

export class UnknownMethodError extends Error {
  constructor(name: string) {
    super(`allowlist names no public callable: ${name}`);
    this.name = "UnknownMethodError";
  }
}

function isPublicName(name: string): boolean {
  return !name.startsWith("_") && name !== "constructor";
}

/** Public callables reachable on the instance or its prototype chain. */
export function selectMethods(target: object, allowlist?: string[]): string[] {
  const names = new Set<string>();
  const seen = new Set<object>();
  let current: object | null = target;
  while (current && current !== Object.prototype && !seen.has(current)) {
    seen.add(current);
    for (const name of Object.getOwnPropertyNames(current)) {
      if (!isPublicName(name) || names.has(name)) continue;
      const descriptor = Object.getOwnPropertyDescriptor(current, name);
      if (descriptor && typeof descriptor.value === "function") {
        names.add(name);
      }
    }
    current = Object.getPrototypeOf(current);
  }
  if (allowlist === undefined) return [...names].sort();
  for (const name of allowlist) {
    if (!names.has(name)) throw new UnknownMethodError(name);
  }
  return [...allowlist];
}

function errorRepr(err: unknown): string {
  if (err instanceof Error) return truncate(`${err.name}: ${err.message}`, 512);
  return truncate(`thrown: ${summarize(err)}`, 512);
}

/**
 * Replace each selected method of `target` with an instrumented wrapper.
 * Idempotent: already wrapped methods are left alone. Returns `target`.
 */
export function instrumentAgent<T extends object>(
  target: T,
  name: string,
  logger: TraceLogger,
  allowlist?: string[],
): T {
  for (const methodName of selectMethods(target, allowlist)) {
    const original = (target as Record<string, unknown>)[methodName] as (
      ...args: unknown[]
    ) => unknown;
    if ((original as { [WRAPPED]?: boolean })[WRAPPED]) continue;
    const wrapper = makeWrapper(target, methodName, original, logger);
    Object.defineProperty(target, methodName, {
      value: wrapper,
      writable: true,
      configurable: true,
      enumerable: Object.prototype.hasOwnProperty.call(target, methodName)
        ? Object.getOwnPropertyDescriptor(target, methodName)!.enumerable
        : false,
    });
  }
  return target;
}

function makeWrapper(
  target: object,
  methodName: string,
  original: (...args: unknown[]) => unknown,
  logger: TraceLogger,
): (...args: unknown[]) => unknown {
  function wrapper(this: unknown, ...args: unknown[]): unknown {
    const outer = currentContext();
    const traceId = outer?.traceId ?? newTraceId();
    const spanId = newSpanId();
    const parentSpanId = outer?.spanId;
    const ids = { traceId, spanId, parentSpanId };

    logger.recordOperational(
      {
        method: methodName,
        status: "start",
        arg_count: args.length,
        args_summary: summarizeArgs(args),
      },
      ids,
    );
    const t0 = performance.now();

    const complete = (value: unknown): unknown => {
      let result = value;
      if (typeof result === "string") {
        const [cleaned, payload] = maybeExtractCognitive(result);
        if (payload !== null) {
          logger.recordCognitive(
            {
              thought: payload.thought,
              plan: payload.plan,
              reflection: payload.reflection,
              extraction_strategy: payload.strategy,
            },
            ids,
          );
          result = cleaned;
        }
      }
      logger.recordOperational(
        {
          method: methodName,
          status: "complete",
          duration_ms: roundDuration(performance.now() - t0),
          result_type: resultTypeName(result),
          result_summary: summarize(result),
        },
        ids,
      );
      return result;
    };

    const fail = (err: unknown): never => {
      logger.recordOperational(
        {
          method: methodName,
          status: "error",
          duration_ms: roundDuration(performance.now() - t0),
          error_repr: errorRepr(err),
        },
        { ...ids, level: "error" },
      );
      throw err;
    };

    let outcome: unknown;
    try {
      outcome = runWithContext({ traceId, spanId }, () => original.apply(this, args));
    } catch (err) {
      return fail(err);
    }
    if (outcome instanceof Promise) {
      return outcome.then(complete, fail);
    }
    return complete(outcome);
  }

  Object.defineProperty(wrapper, "name", { value: methodName, configurable: true });
  Object.defineProperty(wrapper, "length", { value: original.length, configurable: true });
  Object.defineProperty(wrapper, WRAPPED, { value: true });
  return wrapper;
}
