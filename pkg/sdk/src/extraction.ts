/**
 * Cognitive extraction: the same three strategies the engine applies, so the
 * SDK can hand callers a cleaned answer while logging the reasoning segment.
 *
 * Lossless by construction: cleaned text is the original with the recorded
 * character ranges excised; no hit means byte-identical pass-through.
 */

export type Range = [number, number];

export interface CognitivePayload {
  strategy: "xml_tag" | "json_field" | "marker";
  thought?: string;
  plan?: string;
  reflection?: string;
  sourceOffsets: Range[];
}

export type ExtractionResult = [string, CognitivePayload | null];

export function mergeRanges(ranges: Range[]): Range[] {
  const sorted = ranges.filter(([s, e]) => s < e).sort((a, b) => a[0] - b[0] || a[1] - b[1]);
  const merged: Range[] = [];
  for (const [start, end] of sorted) {
    const last = merged[merged.length - 1];
    if (last && start <= last[1]) {
      last[1] = Math.max(last[1], end);
    } else {
      merged.push([start, end]);
    }
  }
  return merged;
}

export function removeRanges(text: string, ranges: Range[]): string {
  let out = "";
  let cursor = 0;
  for (const [start, end] of ranges) {
    out += text.slice(cursor, start);
    cursor = end;
  }
  return out + text.slice(cursor);
}

// ---------------------------------------------------------------------------
// Strategy 1: <thinking> tags
// ---------------------------------------------------------------------------

const OPEN_TAG = /<\s*thinking\s*>/gi;
const CLOSE_TAG = /<\s*\/\s*thinking\s*>/gi;

export function extractXmlTagged(text: string): ExtractionResult {
  type Token = { start: number; end: number; kind: "open" | "close" };
  const tokens: Token[] = [];
  for (const m of text.matchAll(OPEN_TAG)) {
    tokens.push({ start: m.index!, end: m.index! + m[0].length, kind: "open" });
  }
  for (const m of text.matchAll(CLOSE_TAG)) {
    tokens.push({ start: m.index!, end: m.index! + m[0].length, kind: "close" });
  }
  if (tokens.length === 0) return [text, null];
  tokens.sort((a, b) => a.start - b.start);
  if (tokens.length % 2 !== 0) return [text, null];

  const regions: Range[] = [];
  const inner: string[] = [];
  for (let i = 0; i < tokens.length; i += 2) {
    const opener = tokens[i];
    const closer = tokens[i + 1];
    if (opener.kind !== "open" || closer.kind !== "close") return [text, null];
    regions.push([opener.start, closer.end]);
    inner.push(text.slice(opener.end, closer.start));
  }
  const thought = inner
    .map((block) => block.trim())
    .filter((block) => block.length > 0)
    .join("\n");
  if (!thought) return [text, null];

  let removed = mergeRanges(regions);
  let cleaned = removeRanges(text, removed);
  const stripped = cleaned.trim();
  if (stripped !== cleaned) {
    // Fold the trimmed whitespace into the removed ranges so reinsertion
    // still reconstructs the original exactly.
    const kept: number[] = [];
    let cursor = 0;
    for (const [start, end] of removed) {
      for (let p = cursor; p < start; p++) kept.push(p);
      cursor = end;
    }
    for (let p = cursor; p < text.length; p++) kept.push(p);
    const lead = cleaned.length - cleaned.trimStart().length;
    const trail = cleaned.length - cleaned.trimEnd().length;
    const extra: Range[] = kept.slice(0, lead).map((p) => [p, p + 1] as Range);
    if (trail > 0) {
      extra.push(...kept.slice(kept.length - trail).map((p) => [p, p + 1] as Range));
    }
    removed = mergeRanges([...removed, ...extra]);
    cleaned = stripped;
  }
  return [cleaned, { strategy: "xml_tag", thought, sourceOffsets: removed }];
}

// ---------------------------------------------------------------------------
// Strategy 2: top-level JSON fields
// ---------------------------------------------------------------------------

const FENCE = /```[^\n]*\n([\s\S]*?)```/g;
const TARGET_KEYS = new Set(["thought", "plan", "reflection"]);

function skipWs(src: string, i: number): number {
  while (i < src.length && " \t\r\n".includes(src[i])) i++;
  return i;
}

function skipString(src: string, i: number): number {
  i++; // opening quote
  while (i < src.length) {
    if (src[i] === "\\") {
      i += 2;
      continue;
    }
    if (src[i] === '"') return i + 1;
    i++;
  }
  throw new Error("unterminated string");
}

function skipValue(src: string, i: number): number {
  i = skipWs(src, i);
  if (i >= src.length) throw new Error("missing value");
  const c = src[i];
  if (c === '"') return skipString(src, i);
  if (c === "{" || c === "[") {
    let depth = 0;
    while (i < src.length) {
      const ch = src[i];
      if (ch === '"') {
        i = skipString(src, i);
        continue;
      }
      if (ch === "{" || ch === "[") depth++;
      else if (ch === "}" || ch === "]") {
        depth--;
        if (depth === 0) return i + 1;
      }
      i++;
    }
    throw new Error("unterminated container");
  }
  let j = i;
  while (j < src.length && !",}] \t\r\n".includes(src[j])) j++;
  if (j === i) throw new Error("empty value");
  return j;
}

interface Pair {
  key: string;
  start: number;
  valueStart: number;
  end: number;
  commaAfter: number | null;
  commaBefore: number | null;
}

function scanTopLevelPairs(src: string): Pair[] | null {
  try {
    let i = skipWs(src, 0);
    if (i >= src.length || src[i] !== "{") return null;
    i++;
    const pairs: Pair[] = [];
    let prevComma: number | null = null;
    for (;;) {
      i = skipWs(src, i);
      if (i >= src.length) return null;
      if (src[i] === "}") break;
      if (src[i] !== '"') return null;
      const keyStart = i;
      const keyEnd = skipString(src, i);
      const key = JSON.parse(src.slice(keyStart, keyEnd)) as string;
      i = skipWs(src, keyEnd);
      if (i >= src.length || src[i] !== ":") return null;
      const valueStart = skipWs(src, i + 1);
      const valueEnd = skipValue(src, valueStart);
      const pair: Pair = {
        key,
        start: keyStart,
        valueStart,
        end: valueEnd,
        commaAfter: null,
        commaBefore: prevComma,
      };
      pairs.push(pair);
      i = skipWs(src, valueEnd);
      if (i < src.length && src[i] === ",") {
        pair.commaAfter = i;
        prevComma = i;
        i++;
      } else if (i < src.length && src[i] === "}") {
        break;
      } else {
        return null;
      }
    }
    return pairs;
  } catch {
    return null;
  }
}

function parseObject(source: string): Record<string, unknown> | null {
  try {
    const value = JSON.parse(source);
    if (value !== null && typeof value === "object" && !Array.isArray(value)) {
      return value as Record<string, unknown>;
    }
  } catch {
    /* not JSON */
  }
  return null;
}

function findJsonCandidate(text: string): [number, string] | null {
  const stripped = text.trim();
  if (stripped.startsWith("{") && parseObject(stripped) !== null) {
    const offset = text.length - text.trimStart().length;
    return [offset, stripped];
  }
  const candidates: [number, string][] = [];
  for (const m of text.matchAll(FENCE)) {
    const body = m[1];
    if (parseObject(body) !== null) {
      candidates.push([m.index! + m[0].indexOf("\n") + 1, body]);
    }
  }
  return candidates.length === 1 ? candidates[0] : null;
}

export function extractJsonFields(text: string): ExtractionResult {
  const candidate = findJsonCandidate(text);
  if (candidate === null) return [text, null];
  const [offset, src] = candidate;
  const pairs = scanTopLevelPairs(src);
  if (pairs === null) return [text, null];

  const extracted = new Map<string, string[]>();
  const toRemove: number[] = [];
  pairs.forEach((pair, idx) => {
    if (!TARGET_KEYS.has(pair.key)) return;
    let value: unknown;
    try {
      value = JSON.parse(src.slice(pair.valueStart, pair.end));
    } catch {
      return;
    }
    if (typeof value === "string" && value.length > 0) {
      const bucket = extracted.get(pair.key) ?? [];
      bucket.push(value);
      extracted.set(pair.key, bucket);
      toRemove.push(idx);
    }
  });
  if (toRemove.length === 0) return [text, null];

  const removedSet = new Set(toRemove);
  const spans: Range[] = [];
  for (const idx of toRemove) {
    const pair = pairs[idx];
    let keptAfter = false;
    for (let j = idx + 1; j < pairs.length; j++) {
      if (!removedSet.has(j)) {
        keptAfter = true;
        break;
      }
    }
    if (keptAfter && pair.commaAfter !== null) {
      spans.push([pair.start, skipWs(src, pair.commaAfter + 1)]);
    } else if (pair.commaBefore !== null) {
      spans.push([pair.commaBefore, pair.end]);
    } else {
      spans.push([pair.start, pair.end]);
    }
  }

  const removed = mergeRanges(spans.map(([s, e]) => [offset + s, offset + e] as Range));
  const cleaned = removeRanges(text, removed);
  const payload: CognitivePayload = { strategy: "json_field", sourceOffsets: removed };
  if (extracted.has("thought")) payload.thought = extracted.get("thought")!.join("\n");
  if (extracted.has("plan")) payload.plan = extracted.get("plan")!.join("\n");
  if (extracted.has("reflection")) payload.reflection = extracted.get("reflection")!.join("\n");
  return [cleaned, payload];
}

// ---------------------------------------------------------------------------
// Strategy 3: line-leading markers
// ---------------------------------------------------------------------------

const MARKER =
  /^\s*[*_]{0,2}\s*(thought|plan|reflection|final\s+answer|answer)\s*(?::\s*[*_]{0,2}|[*_]{1,2}\s*:)\s*(.*)$/i;
const GENERIC_LABEL = /^\s*[*_]{0,2}\s*[A-Za-z]+(?:[ \t][A-Za-z]+){0,2}\s*[*_]{0,2}\s*:/;

type LineKind =
  | { kind: "capture"; target: "thought" | "plan" | "reflection"; rest: string }
  | { kind: "terminator" }
  | { kind: "label" }
  | { kind: "plain" };

function classifyLine(line: string): LineKind {
  const m = MARKER.exec(line);
  if (m) {
    const name = m[1].toLowerCase().replace(/\s+/g, " ");
    if (name === "thought" || name === "plan" || name === "reflection") {
      return { kind: "capture", target: name, rest: m[2] };
    }
    return { kind: "terminator" };
  }
  if (GENERIC_LABEL.test(line)) return { kind: "label" };
  return { kind: "plain" };
}

export function extractMarkerSections(text: string): ExtractionResult {
  if (text.length === 0) return [text, null];
  const rawLines = text.split(/(?<=\n)/); // keepends
  const starts: number[] = [];
  let pos = 0;
  for (const raw of rawLines) {
    starts.push(pos);
    pos += raw.length;
  }
  starts.push(pos);

  const contents = rawLines.map((raw) => raw.replace(/\r?\n$/, ""));
  const kinds = contents.map(classifyLine);

  type Section = { target: "thought" | "plan" | "reflection"; value: string; first: number; last: number };
  const sections: Section[] = [];
  let i = 0;
  while (i < rawLines.length) {
    const kind = kinds[i];
    if (kind.kind !== "capture") {
      i++;
      continue;
    }
    let j = i + 1;
    while (j < rawLines.length && kinds[j].kind === "plain") j++;
    const block = [kind.rest, ...contents.slice(i + 1, j)];
    const value = block.join("\n").trim();
    if (value) sections.push({ target: kind.target, value, first: i, last: j });
    i = j;
  }
  if (sections.length === 0) return [text, null];

  const values = new Map<string, string[]>();
  const ranges: Range[] = [];
  for (const section of sections) {
    const bucket = values.get(section.target) ?? [];
    bucket.push(section.value);
    values.set(section.target, bucket);
    ranges.push([starts[section.first], starts[section.last]]);
  }
  const removed = mergeRanges(ranges);
  const cleaned = removeRanges(text, removed);
  const payload: CognitivePayload = { strategy: "marker", sourceOffsets: removed };
  if (values.has("thought")) payload.thought = values.get("thought")!.join("\n");
  if (values.has("plan")) payload.plan = values.get("plan")!.join("\n");
  if (values.has("reflection")) payload.reflection = values.get("reflection")!.join("\n");
  return [cleaned, payload];
}

// ---------------------------------------------------------------------------
// Combined entry point: xml_tag > json_field > marker, first hit wins
// ---------------------------------------------------------------------------

export function maybeExtractCognitive(text: string): ExtractionResult {
  for (const strategy of [extractXmlTagged, extractJsonFields, extractMarkerSections]) {
    const [cleaned, payload] = strategy(text);
    if (payload !== null) return [cleaned, payload];
  }
  return [text, null];
}
