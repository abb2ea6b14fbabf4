"""Acceptance gate: one test per stated criterion, at full scale.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS/FAIL line
per criterion. Tolerances and scales are pinned here, not calibrated later.
"""

import functools
import json
import random
import threading
import time
import urllib.request
from datetime import timedelta
from pathlib import Path

import pytest

from agenttrace.assembly import (
    build_trace_tree,
    conservation_accounts,
    pair_events,
    render_tree,
    trace_stats,
)
from agenttrace.cli import extraction_record, main as cli_main
from agenttrace.export import ExporterConfig, SpanExporter, decode_span_line, event_to_span
from agenttrace.extraction import maybe_extract_cognitive, reinsert_ranges, remove_ranges
from agenttrace.ingest import HttpIngestServer, StoreWriter, StreamIngestServer, ingest_file, send_lines
from agenttrace.schema import (
    LogEvent,
    OperationalBody,
    decode_line,
    encode_line,
    event_to_record,
    format_timestamp,
    make_event,
    validate_event,
)
from agenttrace.store import EventStore

from helpers import (
    BASE_TIME,
    brute_force_stats,
    gen_forest,
    mutated_record,
    rand_event,
)

CORPUS = Path(__file__).parent / "fixtures" / "cognitive_corpus"


def criterion(label):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                result = fn(*args, **kwargs)
            except BaseException:
                print(f"\n[ACCEPTANCE] {label}: FAIL", flush=True)
                raise
            print(f"\n[ACCEPTANCE] {label}: PASS", flush=True)
            return result

        return run

    return wrap


@criterion("schema round-trip: 10,000 events, byte-identical, < 5 s")
def test_schema_round_trip():
    rng = random.Random(20260810)
    events = [rand_event(rng) for _ in range(10_000)]
    started = time.perf_counter()
    failures = 0
    for event in events:
        line = encode_line(event)
        decoded = decode_line(line)
        if decoded != event or encode_line(decoded) != line:
            failures += 1
    elapsed = time.perf_counter() - started
    assert failures == 0
    assert elapsed < 5.0, f"round-trip took {elapsed:.2f} s"


@criterion("validation soundness/completeness: 1,000 mutations, 100% precision/recall")
def test_validation_mutation_suite():
    rng = random.Random(7)
    for _ in range(1_000):
        record, name, expected_field = mutated_record(rng)
        result = validate_event(record)
        flagged = result.fields
        assert flagged == {expected_field}, (
            f"mutation {name}: flagged {sorted(flagged)}, expected [{expected_field}]"
        )


@criterion("extraction corpus: >= 50 fixtures, manifest-exact, 100% lossless")
def test_extraction_corpus():
    rows = [
        json.loads(line)
        for line in (CORPUS / "manifest.jsonl").read_text(encoding="utf-8").splitlines()
    ]
    assert len(rows) >= 50
    assert {r["strategy"] for r in rows} == {"xml_tag", "json_field", "marker", "none"}
    for row in rows:
        text = (CORPUS / row["input"]).read_text(encoding="utf-8")
        cleaned, payload = maybe_extract_cognitive(text)
        record = extraction_record(row["input"], text)
        assert record == row, f"{row['input']}: {record} != {row}"
        if payload is None:
            assert cleaned == text
        else:
            assert remove_ranges(text, payload.source_offsets) == cleaned
            assert reinsert_ranges(cleaned, text, payload.source_offsets) == text


@criterion("trace assembly: forests to 1,000 spans, 10% orphans, 10 shuffles each")
def test_assembly_oracle_equivalence():
    for seed, n_spans in ((1, 10), (2, 100), (3, 1_000)):
        rng = random.Random(seed)
        truth = gen_forest(rng, n_spans, orphan_frac=0.1)
        expected_stats = brute_force_stats(truth)
        reference = None
        for shuffle_round in range(10):
            events = list(truth.events)
            random.Random(shuffle_round).shuffle(events)
            spans, anomalies = pair_events(events)
            tree = build_trace_tree(spans)

            assert anomalies == []
            assert sorted(s.span_id for s in tree.roots) == sorted(truth.roots)
            assert sorted(s.span_id for s in tree.orphans) == sorted(truth.orphans)
            assert set(tree.children) == set(truth.children)
            for parent_id, kids in tree.children.items():
                assert [k.span_id for k in kids] == truth.expected_child_order(parent_id)
            for span in spans:
                expected = truth.spans[span.span_id]
                assert span.method == expected.method
                assert span.outcome == expected.outcome
                assert span.attached_events == expected.expected_attachment_ids()

            stats = trace_stats(tree, anomalies).to_dict()
            for key in ("span_count", "depth", "error_count", "operational_events",
                        "cognitive_events", "contextual_events", "unanchored_events"):
                assert stats[key] == expected_stats[key], key
            assert stats["total_duration_ms"] == pytest.approx(expected_stats["total_duration_ms"])
            assert stats["critical_path_ms"] == pytest.approx(expected_stats["critical_path_ms"])

            snapshot = (spans, anomalies, render_tree(tree))
            if reference is None:
                reference = snapshot
            else:
                assert snapshot == reference, "assembly output depends on event order"


@criterion("conservation: paired + attached + anomalous = input count")
def test_conservation():
    for seed in range(6):
        rng = random.Random(1000 + seed)
        truth = gen_forest(rng, 200, orphan_frac=0.1, open_frac=0.1)
        events = list(truth.events)
        if seed % 2:  # half the runs also carry unpaired garbage
            tid = truth.trace_id
            stamp = format_timestamp(BASE_TIME)
            events.append(
                make_event(
                    "x",
                    OperationalBody(method="ghost", status="complete", duration_ms=1.0),
                    trace_id=tid, timestamp=stamp,
                )
            )
        rng.shuffle(events)
        spans, anomalies = pair_events(events)
        paired, attached, anomalous = conservation_accounts(spans, anomalies)
        assert paired + attached + anomalous == len(events)


@criterion("export accounting: 50% batch failure, exact accounting, p99 enqueue < 1 ms")
def test_export_fault_injection(tmp_path):
    class FlakySink:
        def __init__(self):
            self.calls = 0
            self.seen = []
            self.lock = threading.Lock()

        def __call__(self, batch):
            with self.lock:
                self.calls += 1
                if self.calls % 2 == 0:  # 50% batch failure
                    raise ConnectionError("injected")
                self.seen.extend(span.span_id for span in batch)

    sink = FlakySink()
    fallback = tmp_path / "fallback.jsonl"
    exporter = SpanExporter(
        ExporterConfig(endpoint="http://mock", batch_max=128, flush_interval_ms=5,
                       fallback_path=str(fallback)),
        deliver=sink,
    )
    rng = random.Random(55)
    total = 10_000
    latencies = []
    for _ in range(total):
        span = event_to_span(rand_event(rng, surface="cognitive"))
        t0 = time.perf_counter()
        exporter.enqueue(span)
        latencies.append(time.perf_counter() - t0)
    exporter.flush(timeout=60)
    exporter.shutdown()

    accounting = exporter.accounting()
    assert accounting["enqueued"] == total
    assert accounting["delivered"] + accounting["degraded"] + accounting["lost"] == total
    assert accounting["lost"] == 0
    delivered = set(sink.seen)
    degraded = {
        decode_span_line(line).span_id for line in fallback.read_bytes().splitlines()
    }
    assert not delivered & degraded, "a span was both delivered and degraded"
    assert len(delivered) + len(degraded) == total
    latencies.sort()
    p99 = latencies[int(len(latencies) * 0.99)]
    assert p99 < 0.001, f"p99 enqueue latency {p99 * 1e3:.3f} ms"


@criterion("ingest path equivalence: file == socket == HTTP store state")
def test_ingest_path_equivalence(tmp_path):
    rng = random.Random(77)
    events = [rand_event(rng) for _ in range(500)]
    data = b"".join(encode_line(e) for e in events)

    store_file = EventStore(tmp_path / "via-file")
    src = tmp_path / "events.jsonl"
    src.write_bytes(data)
    report = ingest_file(src, store_file)
    assert report.accepted == 500

    store_sock = EventStore(tmp_path / "via-sock")
    writer = StoreWriter(store_sock)
    server = StreamIngestServer("127.0.0.1", 0, writer)
    server.start()
    send_lines(*server.address, data)
    deadline = time.time() + 10
    while time.time() < deadline and writer.snapshot().accepted < 500:
        time.sleep(0.01)
    server.stop()
    writer.close()

    store_http = EventStore(tmp_path / "via-http")
    http_server = HttpIngestServer("127.0.0.1", 0, store_http)
    http_server.start()
    host, port = http_server.address
    request = urllib.request.Request(
        f"http://{host}:{port}/v1/ingest", data=data, method="POST"
    )
    with urllib.request.urlopen(request, timeout=10) as response:
        assert json.loads(response.read())["accepted"] == 500
    http_server.stop()

    states = []
    for store in (store_file, store_sock, store_http):
        states.append(b"".join(encode_line(e) for e in store.scan()))
        store.close()
    assert states[0] == states[1] == states[2]


GOLDEN_TRACE_ID = "aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa1"
GOLDEN_SPANS = {
    "root": "a000000000000001",
    "plan": "a000000000000002",
    "act": "a000000000000003",
    "fetch": "a000000000000004",
}
GOLDEN_TREE = (
    "run [complete, 10.0] a000000000000001\n"
    "  plan [complete, 4.0] a000000000000002\n"
    "  act [error, 3.0] a000000000000003\n"
    "    fetch [open, -] a000000000000004\n"
)


def golden_events():
    def ts(ms):
        return format_timestamp(BASE_TIME + timedelta(milliseconds=ms))

    s = GOLDEN_SPANS
    uid = iter(f"00000000-0000-4000-8000-{i:012d}" for i in range(1, 20))
    make = lambda body, span, parent, at: LogEvent(
        event_id=next(uid), surface="operational", trace_id=GOLDEN_TRACE_ID,
        span_id=span, parent_span_id=parent, timestamp=ts(at), agent="golden",
        level="info", body=body,
    )
    return [
        make(OperationalBody(method="run", status="start"), s["root"], None, 0),
        make(OperationalBody(method="plan", status="start"), s["plan"], s["root"], 1),
        make(OperationalBody(method="plan", status="complete", duration_ms=4.0),
             s["plan"], s["root"], 5),
        make(OperationalBody(method="act", status="start"), s["act"], s["root"], 5),
        make(OperationalBody(method="fetch", status="start"), s["fetch"], s["act"], 6),
        make(OperationalBody(method="act", status="error", duration_ms=3.0,
                             error_repr="Timeout()"), s["act"], s["root"], 8),
        make(OperationalBody(method="run", status="complete", duration_ms=10.0),
             s["root"], None, 10),
    ]


@criterion("CLI consistency: validate == ingest counts; tree golden match")
def test_cli_cross_path_consistency(tmp_path, capsys):
    rng = random.Random(88)
    events = [rand_event(rng) for _ in range(40)]
    mixed = tmp_path / "mixed.jsonl"
    mixed.write_bytes(
        b"".join(encode_line(e) for e in events)
        + b"{broken\n"
        + encode_line(events[0])  # duplicate
        + json.dumps({**event_to_record(events[1]), "level": "fatal"}).encode() + b"\n"
    )

    code_v = cli_main(["validate", str(mixed)])
    out_v = capsys.readouterr().out
    code_i = cli_main(["--store", str(tmp_path / "store"), "ingest", str(mixed)])
    out_i = capsys.readouterr().out
    assert code_v == code_i == 1
    assert json.loads(out_v) == json.loads(out_i)
    report = json.loads(out_v)
    assert report["accepted"] == 40
    assert report["parse_errors"] == 1
    assert report["duplicates"] == 1
    assert report["validation_errors"] == 1

    golden_store = tmp_path / "golden-store"
    store = EventStore(golden_store)
    for event in golden_events():
        store.append(event)
    store.close()
    code_t = cli_main(["--store", str(golden_store), "tree", GOLDEN_TRACE_ID])
    out_t = capsys.readouterr().out
    assert code_t == 0
    assert out_t == GOLDEN_TREE
