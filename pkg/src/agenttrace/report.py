"""Offline store reports: per-trace stats lines plus rendered figures.

The report directory holds ``stats.jsonl`` (one summary object per trace, in
a fixed key order) alongside PNG figures: a span-duration histogram, event
counts per surface, and a timeline of the busiest (or requested) trace.
Figures are rendered headlessly; no interactive backend is touched.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Optional

from .assembly import TraceTree, assemble_trace, trace_stats
from .store import EventStore

logger = logging.getLogger(__name__)

STATS_FILE = "stats.jsonl"


def write_report(
    store: EventStore, out_dir: Path | str, trace_id: Optional[str] = None
) -> list[str]:
    """Render the report into ``out_dir``; returns the files written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[str] = []

    trace_ids = [trace_id] if trace_id else store.trace_ids
    assembled: dict[str, tuple] = {}
    stats_path = out_dir / STATS_FILE
    with open(stats_path, "w", encoding="utf-8") as fh:
        for tid in trace_ids:
            events = store.scan_trace(tid)
            tree, spans, anomalies = assemble_trace(events)
            assembled[tid] = (tree, spans, anomalies)
            row = {"trace_id": tid}
            row.update(trace_stats(tree, anomalies).to_dict())
            fh.write(json.dumps(row, separators=(",", ":")) + "\n")
    written.append(str(stats_path))

    durations = []
    surface_counts = {"operational": 0, "cognitive": 0, "contextual": 0}
    for tid, (tree, spans, anomalies) in assembled.items():
        for span in spans:
            if span.duration_ms is not None:
                durations.append(span.duration_ms)
        stats = trace_stats(tree, anomalies)
        surface_counts["operational"] += stats.operational_events
        surface_counts["cognitive"] += stats.cognitive_events
        surface_counts["contextual"] += stats.contextual_events

    written.extend(_render_figures(out_dir, durations, surface_counts, assembled))
    return written


def _render_figures(out_dir: Path, durations, surface_counts, assembled) -> list[str]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written: list[str] = []

    fig, ax = plt.subplots(figsize=(6, 4))
    if durations:
        ax.hist(durations, bins=min(40, max(5, len(durations) // 5)), color="#3a6ea5")
    ax.set_xlabel("span duration (ms)")
    ax.set_ylabel("spans")
    ax.set_title("Span durations")
    path = out_dir / "span_durations.png"
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    written.append(str(path))

    fig, ax = plt.subplots(figsize=(5, 4))
    names = list(surface_counts)
    ax.bar(names, [surface_counts[n] for n in names], color=["#3a6ea5", "#b85c38", "#5c8a58"])
    ax.set_ylabel("events")
    ax.set_title("Events per surface")
    path = out_dir / "surface_counts.png"
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    written.append(str(path))

    busiest = _pick_busiest(assembled)
    if busiest is not None:
        tid, tree = busiest
        path = out_dir / "trace_timeline.png"
        _render_timeline(tree, tid, path, plt)
        written.append(str(path))
    return written


def _pick_busiest(assembled) -> Optional[tuple[str, TraceTree]]:
    best = None
    for tid, (tree, spans, _anomalies) in assembled.items():
        if spans and (best is None or len(spans) > best[2]):
            best = (tid, tree, len(spans))
    if best is None:
        return None
    return best[0], best[1]


def _render_timeline(tree: TraceTree, trace_id: str, path: Path, plt) -> None:
    """Horizontal bar per span, depth-first order, offset from trace start."""
    rows = []

    def walk(span, depth):
        rows.append((span, depth))
        for child in tree.children.get(span.span_id, []):
            walk(child, depth + 1)

    for root in tree.roots:
        walk(root, 0)
    for orphan in tree.orphans:
        walk(orphan, 0)
    if not rows:
        return

    t0 = min(span.start_ts for span, _ in rows)
    fig_height = max(2.5, 0.35 * len(rows) + 1)
    fig, ax = plt.subplots(figsize=(8, fig_height))
    for i, (span, depth) in enumerate(rows):
        offset = (span.start_ts - t0).total_seconds() * 1000.0
        width = span.duration_ms if span.duration_ms is not None else 0.05
        color = {"complete": "#3a6ea5", "error": "#b0413e", "open": "#999999"}[span.outcome]
        y = len(rows) - 1 - i
        ax.barh(y, width, left=offset, height=0.6, color=color)
        ax.text(offset, y, "  " * depth + span.method, va="center", fontsize=7)
    ax.set_yticks([])
    ax.set_xlabel("ms since trace start")
    ax.set_title(f"Trace {trace_id[:12]}… timeline ({len(rows)} spans)")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
