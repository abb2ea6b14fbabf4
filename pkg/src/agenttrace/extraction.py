"""Separating reasoning material from answer text in raw LLM completions.

Three strategies, tried in fixed precedence: explicit ``<thinking>`` tags,
top-level JSON fields (``plan``/``reflection``/``thought``), and line-leading
``Thought:``-style markers. Extraction is lossless by construction: the
cleaned text is always the original with the recorded character ranges
excised, so reinserting those ranges reconstructs the input exactly. When no
strategy applies, the input passes through byte-identical.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Optional

Range = tuple[int, int]


@dataclass(frozen=True)
class CognitivePayload:
    """Extracted thought/plan/reflection material plus provenance offsets.

    ``source_offsets`` are the character ranges removed from the original
    text, non-overlapping and ascending; deleting them from the original
    yields the cleaned text.
    """

    strategy: str
    thought: Optional[str] = None
    plan: Optional[str] = None
    reflection: Optional[str] = None
    source_offsets: tuple[Range, ...] = ()

    def fields(self) -> dict[str, str]:
        out = {}
        for key in ("thought", "plan", "reflection"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out


def merge_ranges(ranges: list[Range]) -> tuple[Range, ...]:
    """Sort and coalesce overlapping/adjacent ranges."""
    merged: list[Range] = []
    for start, end in sorted(r for r in ranges if r[0] < r[1]):
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return tuple(merged)


def remove_ranges(text: str, ranges: tuple[Range, ...]) -> str:
    """Delete the given (sorted, disjoint) ranges from text."""
    pieces = []
    cursor = 0
    for start, end in ranges:
        pieces.append(text[cursor:start])
        cursor = end
    pieces.append(text[cursor:])
    return "".join(pieces)


def reinsert_ranges(cleaned: str, original: str, ranges: tuple[Range, ...]) -> str:
    """Rebuild the original from cleaned text plus the removed ranges.

    Used by tests as the losslessness oracle; inverse of remove_ranges.
    """
    pieces = []
    cleaned_cursor = 0
    orig_cursor = 0
    for start, end in ranges:
        keep = start - orig_cursor
        pieces.append(cleaned[cleaned_cursor : cleaned_cursor + keep])
        pieces.append(original[start:end])
        cleaned_cursor += keep
        orig_cursor = end
    pieces.append(cleaned[cleaned_cursor:])
    return "".join(pieces)


# ---------------------------------------------------------------------------
# Strategy 1: <thinking> tags
# ---------------------------------------------------------------------------

_OPEN_TAG = re.compile(r"<\s*thinking\s*>", re.IGNORECASE)
_CLOSE_TAG = re.compile(r"<\s*/\s*thinking\s*>", re.IGNORECASE)


def extract_xml_tagged(text: str) -> tuple[str, Optional[CognitivePayload]]:
    """Pull all <thinking>...</thinking> regions out of the text.

    Inner texts (stripped) join with a newline into ``thought``; the tagged
    regions plus any leading/trailing whitespace of the remainder are removed.
    Unbalanced tags abort extraction so answers are never corrupted.
    """
    tokens = [(m.start(), m.end(), "open") for m in _OPEN_TAG.finditer(text)]
    tokens += [(m.start(), m.end(), "close") for m in _CLOSE_TAG.finditer(text)]
    if not tokens:
        return text, None
    tokens.sort()
    if len(tokens) % 2 != 0:
        return text, None
    regions: list[Range] = []
    inner: list[str] = []
    for i in range(0, len(tokens), 2):
        opener, closer = tokens[i], tokens[i + 1]
        if opener[2] != "open" or closer[2] != "close":
            return text, None
        regions.append((opener[0], closer[1]))
        inner.append(text[opener[1] : closer[0]])
    thought = "\n".join(block.strip() for block in inner if block.strip())
    if not thought:
        return text, None

    removed = merge_ranges(regions)
    cleaned = remove_ranges(text, removed)
    stripped = cleaned.strip()
    if stripped != cleaned:
        # Fold the trimmed whitespace into the removed ranges so the
        # reconstruction invariant keeps holding.
        kept_positions = _kept_positions(len(text), removed)
        lead = len(cleaned) - len(cleaned.lstrip())
        trail = len(cleaned) - len(cleaned.rstrip())
        extra = [(p, p + 1) for p in kept_positions[:lead]]
        if trail:
            extra += [(p, p + 1) for p in kept_positions[-trail:]]
        removed = merge_ranges(list(removed) + extra)
        cleaned = stripped
    payload = CognitivePayload(strategy="xml_tag", thought=thought, source_offsets=removed)
    return cleaned, payload


def _kept_positions(length: int, removed: tuple[Range, ...]) -> list[int]:
    kept = []
    cursor = 0
    for start, end in removed:
        kept.extend(range(cursor, start))
        cursor = end
    kept.extend(range(cursor, length))
    return kept


# ---------------------------------------------------------------------------
# Strategy 2: top-level JSON fields
# ---------------------------------------------------------------------------

_FENCE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)
_TARGET_KEYS = ("thought", "plan", "reflection")


class _JsonScanError(Exception):
    pass


def _skip_ws(src: str, i: int) -> int:
    while i < len(src) and src[i] in " \t\r\n":
        i += 1
    return i


def _skip_string(src: str, i: int) -> int:
    # src[i] == '"'
    i += 1
    while i < len(src):
        c = src[i]
        if c == "\\":
            i += 2
            continue
        if c == '"':
            return i + 1
        i += 1
    raise _JsonScanError("unterminated string")


def _skip_value(src: str, i: int) -> int:
    i = _skip_ws(src, i)
    if i >= len(src):
        raise _JsonScanError("missing value")
    c = src[i]
    if c == '"':
        return _skip_string(src, i)
    if c in "{[":
        depth = 0
        while i < len(src):
            c = src[i]
            if c == '"':
                i = _skip_string(src, i)
                continue
            if c in "{[":
                depth += 1
            elif c in "}]":
                depth -= 1
                if depth == 0:
                    return i + 1
            i += 1
        raise _JsonScanError("unterminated container")
    # literal or number: run to the next structural character
    j = i
    while j < len(src) and src[j] not in ",}] \t\r\n":
        j += 1
    if j == i:
        raise _JsonScanError("empty value")
    return j


@dataclass
class _Pair:
    key: str
    start: int  # start of the key token
    value_start: int  # start of the value token
    end: int  # end of the value token
    comma_after: Optional[int] = None  # index of the ',' following this pair
    comma_before: Optional[int] = None


def _scan_top_level_pairs(src: str) -> Optional[list[_Pair]]:
    """Locate the top-level key/value pairs of a JSON object source text."""
    try:
        i = _skip_ws(src, 0)
        if i >= len(src) or src[i] != "{":
            return None
        i += 1
        pairs: list[_Pair] = []
        prev_comma: Optional[int] = None
        while True:
            i = _skip_ws(src, i)
            if i >= len(src):
                return None
            if src[i] == "}":
                break
            if src[i] != '"':
                return None
            key_start = i
            key_end = _skip_string(src, i)
            key = json.loads(src[key_start:key_end])
            i = _skip_ws(src, key_end)
            if i >= len(src) or src[i] != ":":
                return None
            value_start = _skip_ws(src, i + 1)
            value_end = _skip_value(src, value_start)
            pair = _Pair(
                key=key,
                start=key_start,
                value_start=value_start,
                end=value_end,
                comma_before=prev_comma,
            )
            pairs.append(pair)
            i = _skip_ws(src, value_end)
            if i < len(src) and src[i] == ",":
                pair.comma_after = i
                prev_comma = i
                i += 1
            elif i < len(src) and src[i] == "}":
                break
            else:
                return None
        return pairs
    except _JsonScanError:
        return None


def _find_json_candidate(text: str) -> Optional[tuple[int, str]]:
    """Find the single candidate JSON object: the whole trimmed text, or the
    body of exactly one fenced code block. Returns (offset, source)."""
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            if isinstance(json.loads(stripped), dict):
                offset = len(text) - len(text.lstrip())
                return offset, stripped
        except json.JSONDecodeError:
            pass
    candidates = []
    for m in _FENCE.finditer(text):
        body = m.group(1)
        try:
            if isinstance(json.loads(body), dict):
                candidates.append((m.start(1), body))
        except json.JSONDecodeError:
            continue
    if len(candidates) == 1:
        return candidates[0]
    return None


def extract_json_fields(text: str) -> tuple[str, Optional[CognitivePayload]]:
    """Lift string-valued ``plan``/``reflection``/``thought`` keys out of the
    text's single top-level JSON object.

    The pairs are excised from the source text (with the neighbouring comma),
    leaving the remaining object intact, so the excision is reversible.
    """
    candidate = _find_json_candidate(text)
    if candidate is None:
        return text, None
    offset, src = candidate
    pairs = _scan_top_level_pairs(src)
    if pairs is None:
        return text, None

    extracted: dict[str, list[str]] = {}
    to_remove: list[int] = []
    for idx, pair in enumerate(pairs):
        if pair.key not in _TARGET_KEYS:
            continue
        try:
            value = json.loads(src[pair.value_start : pair.end])
        except json.JSONDecodeError:
            continue
        if isinstance(value, str) and value:
            extracted.setdefault(pair.key, []).append(value)
            to_remove.append(idx)
    if not to_remove:
        return text, None

    removed_set = set(to_remove)
    spans: list[Range] = []
    for idx in to_remove:
        pair = pairs[idx]
        kept_after = any(j not in removed_set for j in range(idx + 1, len(pairs)))
        if kept_after and pair.comma_after is not None:
            end = _skip_ws(src, pair.comma_after + 1)
            spans.append((pair.start, end))
        elif pair.comma_before is not None:
            spans.append((pair.comma_before, pair.end))
        else:
            spans.append((pair.start, pair.end))

    removed = merge_ranges([(offset + s, offset + e) for s, e in spans])
    cleaned = remove_ranges(text, removed)
    payload = CognitivePayload(
        strategy="json_field",
        thought="\n".join(extracted["thought"]) if "thought" in extracted else None,
        plan="\n".join(extracted["plan"]) if "plan" in extracted else None,
        reflection="\n".join(extracted["reflection"]) if "reflection" in extracted else None,
        source_offsets=removed,
    )
    return cleaned, payload


# ---------------------------------------------------------------------------
# Strategy 3: line-leading markers
# ---------------------------------------------------------------------------

# Known markers, optionally wrapped in markdown bold/italic, colon inside or
# outside the wrapper: "Thought:", "**Plan:**", "__Reflection__: ...".
_MARKER = re.compile(
    r"^\s*[*_]{0,2}\s*(?P<name>thought|plan|reflection|final\s+answer|answer)"
    r"\s*(?::\s*[*_]{0,2}|[*_]{1,2}\s*:)\s*(?P<rest>.*)$",
    re.IGNORECASE,
)
# Any other "Label:" line (1-3 alphabetic words) ends the current capture but
# stays in the cleaned text; this keeps ReAct-style Action:/Observation: lines
# with the answer.
_GENERIC_LABEL = re.compile(
    r"^\s*[*_]{0,2}\s*[A-Za-z]+(?:[ \t][A-Za-z]+){0,2}\s*[*_]{0,2}\s*:"
)

_CAPTURED = {"thought": "thought", "plan": "plan", "reflection": "reflection"}


def _classify_line(line: str) -> tuple[str, Optional[str], str]:
    m = _MARKER.match(line)
    if m:
        name = re.sub(r"\s+", " ", m.group("name").lower())
        if name in _CAPTURED:
            return "capture", _CAPTURED[name], m.group("rest")
        return "terminator", None, ""
    if _GENERIC_LABEL.match(line):
        return "label", None, ""
    return "plain", None, ""


def extract_marker_sections(text: str) -> tuple[str, Optional[CognitivePayload]]:
    """Capture Thought:/Plan:/Reflection: sections from marker-style output.

    A section runs from its marker line to the next labelled line or end of
    text. Answer:/Final Answer: and unrecognized labels stay in the cleaned
    text. Sections that capture nothing non-empty are left in place.
    """
    lines = text.splitlines(keepends=True)
    if not lines:
        return text, None
    starts: list[int] = []
    pos = 0
    for raw in lines:
        starts.append(pos)
        pos += len(raw)
    starts.append(pos)  # end of text

    contents = [raw.rstrip("\r\n") for raw in lines]
    kinds = [_classify_line(c) for c in contents]

    sections: list[tuple[str, str, int, int]] = []  # field, value, first, last+1
    i = 0
    while i < len(lines):
        kind, target, rest = kinds[i]
        if kind != "capture":
            i += 1
            continue
        j = i + 1
        while j < len(lines) and kinds[j][0] == "plain":
            j += 1
        block = [rest] + contents[i + 1 : j]
        value = "\n".join(block).strip()
        if value:
            sections.append((target, value, i, j))
        i = j

    if not sections:
        return text, None

    values: dict[str, list[str]] = {}
    ranges: list[Range] = []
    for target, value, first, last in sections:
        values.setdefault(target, []).append(value)
        ranges.append((starts[first], starts[last]))

    removed = merge_ranges(ranges)
    cleaned = remove_ranges(text, removed)
    payload = CognitivePayload(
        strategy="marker",
        thought="\n".join(values["thought"]) if "thought" in values else None,
        plan="\n".join(values["plan"]) if "plan" in values else None,
        reflection="\n".join(values["reflection"]) if "reflection" in values else None,
        source_offsets=removed,
    )
    return cleaned, payload


# ---------------------------------------------------------------------------
# Combined entry point
# ---------------------------------------------------------------------------

_STRATEGIES = (extract_xml_tagged, extract_json_fields, extract_marker_sections)


def maybe_extract_cognitive(text: str) -> tuple[str, Optional[CognitivePayload]]:
    """Apply the strategies in precedence order; first hit wins.

    With no hit the input is returned unmodified (same object, byte-identical).
    """
    for strategy in _STRATEGIES:
        cleaned, payload = strategy(text)
        if payload is not None:
            return cleaned, payload
    return text, None
