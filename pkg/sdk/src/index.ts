/**
 * agenttrace-sdk: emitter-side instrumentation for the agenttrace engine.
 *
 * ```ts
 * const sdk = init({ agent: "researcher", localPath: "events.jsonl",
 *                    endpoint: "http://127.0.0.1:9711" });
 * sdk.instrumentAgent(myAgent, "researcher");
 * const answer = myAgent.run("question");   // emits operational + cognitive events
 * await sdk.shutdown;
 * ```
 */

import { instrumentAgent as wrap, UnknownMethodError, selectMethods } from "./instrument.js";
import { TraceLogger, LoggerConfig, ensureParentDir } from "./logger.js";

export * from "./wire.js";
export * from "./extraction.js";
export { currentContext, runWithContext, TraceContext } from "./context.js";
export { TraceLogger, LoggerConfig } from "./logger.js";
export { UnknownMethodError, selectMethods } from "./instrument.js";

export interface SdkConfig extends LoggerConfig {}

export interface Sdk {
  logger: TraceLogger;
  instrumentAgent<T extends object>(target: T, name?: string, allowlist?: string[]): T;
  shutdown(): Promise<void>;
}

/** Configure sinks and return the SDK handle. */
export function init(config: SdkConfig): Sdk {
  if (config.localPath) ensureParentDir(config.localPath);
  const logger = new TraceLogger(config);
  return {
    logger,
    instrumentAgent<T extends object>(target: T, _name?: string, allowlist?: string[]): T {
      return wrap(target, _name ?? config.agent, logger, allowlist);
    },
    shutdown: () => logger.shutdown(),
  };
}
