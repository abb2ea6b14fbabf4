"""Append-only segment store for validated events.

Layout (normative): a directory of ``segment-NNNNNN.jsonl`` files in the
standard line encoding plus ``index.json`` mapping trace_id to a list of
(segment number, byte offset) pairs. Appends are serialized behind a lock;
scans see a consistent flushed prefix and never yield a torn line. Duplicate
event ids are rejected idempotently so replay is safe.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
from pathlib import Path
from typing import Iterator, Optional

from .schema import (
    LogEvent,
    ParseError,
    ValidationError,
    decode_line,
    encode_line,
)

logger = logging.getLogger(__name__)

SEGMENT_BYTES = 64 * 1024 * 1024
INDEX_FILE = "index.json"
_SEGMENT_RE = re.compile(r"^segment-(\d{6})\.jsonl$")


class StorageFull(Exception):
    """The underlying filesystem refused the append."""


class CorruptSegment(Exception):
    """A stored line failed re-validation on scan."""

    def __init__(self, segment: str, offset: int, reason: str):
        self.segment = segment
        self.offset = offset
        self.reason = reason
        super().__init__(f"{segment} @ {offset}: {reason}")


def segment_name(number: int) -> str:
    return f"segment-{number:06d}.jsonl"


class EventStore:
    """Append-only event log with an in-memory trace index.

    Thread-safe: appends are serialized; concurrent scans read only up to the
    last flushed offset of each segment.
    """

    def __init__(self, directory: os.PathLike | str, segment_bytes: int = SEGMENT_BYTES):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.segment_bytes = segment_bytes
        self._lock = threading.RLock()
        self._seen_ids: set[str] = set()
        self._index: dict[str, list[tuple[int, int]]] = {}
        self._segments: list[int] = []
        self._flushed: dict[int, int] = {}  # segment number -> flushed byte count
        self._handle = None
        self._current: Optional[int] = None
        self._offset = 0
        self._torn_lines = 0
        self._recover()
        self._open_current()

    # -- startup ------------------------------------------------------------

    def _recover(self) -> None:
        """Rebuild the id set and index by scanning existing segments.

        A partial trailing line (crash mid-append) is tolerated on the last
        segment and will be overwritten by the next append.
        """
        numbers = []
        for entry in self.directory.iterdir():
            m = _SEGMENT_RE.match(entry.name)
            if m:
                numbers.append(int(m.group(1)))
        self._segments = sorted(numbers)
        for pos, number in enumerate(self._segments):
            path = self.directory / segment_name(number)
            data = path.read_bytes()
            valid_end = data.rfind(b"\n") + 1  # 0 when no complete line
            if valid_end != len(data):
                if pos == len(self._segments) - 1:
                    self._torn_lines += 1
                    logger.warning(
                        "truncating torn trailing line in %s (%d bytes)",
                        path.name,
                        len(data) - valid_end,
                    )
                    with open(path, "r+b") as fh:
                        fh.truncate(valid_end)
                else:
                    raise CorruptSegment(path.name, valid_end, "mid-store segment has no final LF")
            offset = 0
            for raw in data[:valid_end].splitlines(keepends=True):
                try:
                    event = decode_line(raw)
                except (ParseError, ValidationError) as exc:
                    raise CorruptSegment(path.name, offset, str(exc)) from exc
                self._seen_ids.add(event.event_id)
                self._index.setdefault(event.trace_id, []).append((number, offset))
                offset += len(raw)
            self._flushed[number] = valid_end

    def _open_current(self) -> None:
        if not self._segments:
            self._segments = [0]
            self._flushed[0] = 0
        self._current = self._segments[-1]
        path = self.directory / segment_name(self._current)
        self._handle = open(path, "ab")
        self._offset = self._handle.tell()

    # -- writing ------------------------------------------------------------

    def append(self, event: LogEvent) -> bool:
        """Store one validated event. Returns False (and stores nothing) for
        a duplicate event_id."""
        line = encode_line(event)
        with self._lock:
            if event.event_id in self._seen_ids:
                return False
            if self._offset + len(line) > self.segment_bytes and self._offset > 0:
                self._rotate()
            try:
                self._handle.write(line)
            except OSError as exc:
                raise StorageFull(f"append failed: {exc}") from exc
            self._index.setdefault(event.trace_id, []).append((self._current, self._offset))
            self._seen_ids.add(event.event_id)
            self._offset += len(line)
            return True

    def _rotate(self) -> None:
        self._handle.flush()
        self._flushed[self._current] = self._offset
        self._handle.close()
        number = self._current + 1
        self._segments.append(number)
        self._flushed[number] = 0
        self._current = number
        self._handle = open(self.directory / segment_name(number), "ab")
        self._offset = 0

    def flush(self) -> None:
        with self._lock:
            self._handle.flush()
            self._flushed[self._current] = self._offset

    def checkpoint(self) -> None:
        """Flush and persist index.json."""
        with self._lock:
            self.flush()
            payload = {
                trace_id: [[seg, off] for seg, off in entries]
                for trace_id, entries in sorted(self._index.items())
            }
            tmp = self.directory / (INDEX_FILE + ".tmp")
            tmp.write_text(json.dumps(payload, indent=0, sort_keys=True) + "\n", encoding="utf-8")
            os.replace(tmp, self.directory / INDEX_FILE)

    def close(self) -> None:
        with self._lock:
            if self._handle is None:
                return
            self.checkpoint()
            os.fsync(self._handle.fileno())
            self._handle.close()
            self._handle = None

    # -- reading ------------------------------------------------------------

    def __len__(self) -> int:
        with self._lock:
            return len(self._seen_ids)

    def __contains__(self, event_id: str) -> bool:
        with self._lock:
            return event_id in self._seen_ids

    @property
    def trace_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._index.keys())

    def _snapshot(self) -> list[tuple[int, int]]:
        with self._lock:
            self.flush()
            return [(n, self._flushed.get(n, 0)) for n in self._segments]

    def scan(
        self,
        *,
        trace_id: Optional[str] = None,
        agent: Optional[str] = None,
        surface: Optional[str] = None,
        since: Optional[str] = None,
        until: Optional[str] = None,
    ) -> Iterator[LogEvent]:
        """Yield stored events in append order, optionally filtered.

        ``since``/``until`` are inclusive RFC3339 bounds (the timestamp
        encoding sorts lexicographically). Lines are re-validated; a failure
        raises CorruptSegment with the segment and byte offset.
        """
        if trace_id is not None:
            with self._lock:
                self.flush()
                entries = list(self._index.get(trace_id, []))
            for number, offset in entries:
                event = self._read_at(number, offset)
                if _matches(event, agent, surface, since, until):
                    yield event
            return
        for number, limit in self._snapshot():
            path = self.directory / segment_name(number)
            offset = 0
            with open(path, "rb") as fh:
                while offset < limit:
                    raw = fh.readline()
                    if not raw:
                        break
                    if offset + len(raw) > limit:
                        break  # unflushed tail
                    try:
                        event = decode_line(raw)
                    except (ParseError, ValidationError) as exc:
                        raise CorruptSegment(path.name, offset, str(exc)) from exc
                    if _matches(event, agent, surface, since, until):
                        yield event
                    offset += len(raw)

    def _read_at(self, number: int, offset: int) -> LogEvent:
        path = self.directory / segment_name(number)
        with open(path, "rb") as fh:
            fh.seek(offset)
            raw = fh.readline()
        try:
            return decode_line(raw)
        except (ParseError, ValidationError) as exc:
            raise CorruptSegment(path.name, offset, str(exc)) from exc

    def scan_trace(self, trace_id: str) -> list[LogEvent]:
        return list(self.scan(trace_id=trace_id))


def _matches(
    event: LogEvent,
    agent: Optional[str],
    surface: Optional[str],
    since: Optional[str],
    until: Optional[str],
) -> bool:
    if agent is not None and event.agent != agent:
        return False
    if surface is not None and event.surface != surface:
        return False
    if since is not None and event.timestamp < since:
        return False
    if until is not None and event.timestamp > until:
        return False
    return True


def load_index(directory: os.PathLike | str) -> dict[str, list[tuple[int, int]]]:
    """Read a persisted index.json (external-consumer view of the store)."""
    raw = json.loads((Path(directory) / INDEX_FILE).read_text(encoding="utf-8"))
    return {tid: [(seg, off) for seg, off in entries] for tid, entries in raw.items()}
