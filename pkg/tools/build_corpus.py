#!/usr/bin/env python3
"""Author the cognitive-extraction fixture corpus.

Each case carries a hand-written input AND hand-derived expectations
(strategy, payload fields, exact cleaned text). Nothing here calls the
extraction code: the manifest is an independent oracle the tests compare
against. Rerun after editing cases:

    python tools/build_corpus.py
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

CORPUS_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "cognitive_corpus"


@dataclass
class Case:
    slug: str
    text: str
    strategy: str = "none"
    fields: dict = field(default_factory=dict)
    cleaned: str | None = None  # None means byte-identical pass-through

    @property
    def expected_cleaned(self) -> str:
        return self.text if self.cleaned is None else self.cleaned


CASES: list[Case] = [
    # ------------------------------------------------------------- xml_tag
    Case(
        "xml_single",
        "<thinking>step 1</thinking>Answer: 4",
        "xml_tag",
        {"thought": "step 1"},
        "Answer: 4",
    ),
    Case(
        "xml_prefix_suffix",
        "Intro. <thinking>alpha</thinking> Done.",
        "xml_tag",
        {"thought": "alpha"},
        "Intro.  Done.",
    ),
    Case(
        "xml_spaced_tags",
        "< thinking >x y z</ THINKING >final",
        "xml_tag",
        {"thought": "x y z"},
        "final",
    ),
    Case(
        "xml_two_blocks",
        "<thinking>a</thinking>mid\n<thinking>b</thinking>tail",
        "xml_tag",
        {"thought": "a\nb"},
        "mid\ntail",
    ),
    Case(
        "xml_multiline",
        "<thinking>\nline1\nline2\n</thinking>\nThe answer is 42.",
        "xml_tag",
        {"thought": "line1\nline2"},
        "The answer is 42.",
    ),
    Case("xml_unbalanced_open", "<thinking>oops no close. Answer: 7"),
    Case("xml_close_before_open", "</thinking>x<thinking>"),
    Case("xml_empty_block", "<thinking></thinking>Answer: 9"),
    Case(
        "xml_only_block",
        "<thinking>only thoughts</thinking>",
        "xml_tag",
        {"thought": "only thoughts"},
        "",
    ),
    Case(
        "xml_whitespace_trim",
        "  <thinking>t</thinking>  Answer: A  ",
        "xml_tag",
        {"thought": "t"},
        "Answer: A",
    ),
    Case("xml_nested_open", "<thinking>a<thinking>b</thinking>c"),
    Case(
        "xml_uppercase",
        "<THINKING>Big</THINKING>ans",
        "xml_tag",
        {"thought": "Big"},
        "ans",
    ),
    Case(
        "xml_beats_marker",
        "<thinking>think</thinking>\nThought: also here\nAnswer: ok",
        "xml_tag",
        {"thought": "think"},
        "Thought: also here\nAnswer: ok",
    ),
    Case(
        "xml_tab_inner",
        "<thinking>\tindent</thinking>x",
        "xml_tag",
        {"thought": "indent"},
        "x",
    ),
    # ----------------------------------------------------------- json_field
    Case(
        "json_compact_first",
        '{"plan":"do X","answer":"4"}',
        "json_field",
        {"plan": "do X"},
        '{"answer":"4"}',
    ),
    Case(
        "json_compact_last",
        '{"answer":"4","plan":"do X"}',
        "json_field",
        {"plan": "do X"},
        '{"answer":"4"}',
    ),
    Case("json_only_pair", '{"plan":"p"}', "json_field", {"plan": "p"}, "{}"),
    Case(
        "json_all_three",
        '{"thought":"t","plan":"p","reflection":"r","answer":1}',
        "json_field",
        {"thought": "t", "plan": "p", "reflection": "r"},
        '{"answer":1}',
    ),
    Case(
        "json_pretty_middle",
        '{\n  "plan": "step A",\n  "answer": 42\n}',
        "json_field",
        {"plan": "step A"},
        '{\n  "answer": 42\n}',
    ),
    Case(
        "json_pretty_last",
        '{\n  "answer": 42,\n  "reflection": "hmm"\n}',
        "json_field",
        {"reflection": "hmm"},
        '{\n  "answer": 42\n}',
    ),
    Case(
        "json_fenced",
        'Result:\n```json\n{"plan": "fly", "answer": "yes"}\n```\nThat\'s it.',
        "json_field",
        {"plan": "fly"},
        'Result:\n```json\n{"answer": "yes"}\n```\nThat\'s it.',
    ),
    Case(
        "json_fence_nolang",
        '```\n{"reflection": "deep"}\n```',
        "json_field",
        {"reflection": "deep"},
        "```\n{}\n```",
    ),
    Case(
        "json_two_fences",
        '```json\n{"plan":"a"}\n```\nand\n```json\n{"plan":"b"}\n```',
    ),
    Case("json_no_targets", '{"answer": 1, "note": "x"}'),
    Case("json_nonstring_plan", '{"plan": ["a","b"], "answer": 1}'),
    Case("json_empty_plan", '{"plan": "", "answer": 1}'),
    Case("json_nested_not_toplevel", '{"outer": {"plan": "inner"}, "answer": 2}'),
    Case(
        "json_unicode_escapes",
        '{"plan": "caf\\u00e9 \\"quoted\\"", "answer": "ok"}',
        "json_field",
        {"plan": 'café "quoted"'},
        '{"answer": "ok"}',
    ),
    Case("json_array_toplevel", '[{"plan": "x"}]'),
    Case("json_inline_prose", 'The result {"plan": "x"} done'),
    Case(
        "json_duplicate_keys",
        '{"plan":"one","plan":"two","answer":0}',
        "json_field",
        {"plan": "one\ntwo"},
        '{"answer":0}',
    ),
    Case(
        "json_escaped_newline",
        '{"plan": "a\\nb", "answer": "c"}',
        "json_field",
        {"plan": "a\nb"},
        '{"answer": "c"}',
    ),
    # --------------------------------------------------------------- marker
    Case(
        "marker_single",
        "Thought: check units\nAnswer: 4",
        "marker",
        {"thought": "check units"},
        "Answer: 4",
    ),
    Case(
        "marker_multiline",
        "Thought: first\nsecond line\n\nAnswer: done",
        "marker",
        {"thought": "first\nsecond line"},
        "Answer: done",
    ),
    Case(
        "marker_react",
        "Thought: step one\nAction: search[x]\nObservation: found\n"
        "Thought: step two\nFinal Answer: 42",
        "marker",
        {"thought": "step one\nstep two"},
        "Action: search[x]\nObservation: found\nFinal Answer: 42",
    ),
    Case(
        "marker_bold",
        "**Thought:** bold reasoning\n**Answer:** fine",
        "marker",
        {"thought": "bold reasoning"},
        "**Answer:** fine",
    ),
    Case(
        "marker_bold_colon_outside",
        "__Plan__: plan text\nAnswer: y",
        "marker",
        {"plan": "plan text"},
        "Answer: y",
    ),
    Case(
        "marker_case",
        "THOUGHT: shouting\nANSWER: ok",
        "marker",
        {"thought": "shouting"},
        "ANSWER: ok",
    ),
    Case(
        "marker_plan_reflection",
        "Plan: do a\nReflection: went well\nAnswer: b",
        "marker",
        {"plan": "do a", "reflection": "went well"},
        "Answer: b",
    ),
    Case(
        "marker_trailing",
        "Answer: 1\nThought: trailing",
        "marker",
        {"thought": "trailing"},
        "Answer: 1\n",
    ),
    Case("marker_empty_section", "Thought:\nAnswer: 2"),
    Case("marker_none", "just words\nand more words"),
    Case(
        "marker_leading_prose",
        "Intro text.\nThought: hm\nAnswer: done",
        "marker",
        {"thought": "hm"},
        "Intro text.\nAnswer: done",
    ),
    Case(
        "marker_numbered_steps",
        "Thought: compute\nstep 1: add\nstep 2: multiply\nAnswer: 9",
        "marker",
        {"thought": "compute\nstep 1: add\nstep 2: multiply"},
        "Answer: 9",
    ),
    Case(
        "marker_unknown_label",
        "Plan: fly to moon\nNote: risky\nAnswer: ok",
        "marker",
        {"plan": "fly to moon"},
        "Note: risky\nAnswer: ok",
    ),
    Case(
        "marker_after_json_line",
        '{"plan": "j"}\nThought: m\nAnswer: x',
        "marker",
        {"thought": "m"},
        '{"plan": "j"}\nAnswer: x',
    ),
    Case(
        "marker_indented",
        "  Thought: indented\nAnswer: fine",
        "marker",
        {"thought": "indented"},
        "Answer: fine",
    ),
    # --------------------------------------------------- pass-through & mixed
    Case("plain_prose", "The capital of France is Paris."),
    Case("empty", ""),
    Case("binary_ish", "\x00\x01weird\x7f chars ↯"),
    Case("code_colons", "def f(x):\n    return x * 2"),
    Case("url_colon", "see https://example.com: it works"),
    Case("thought_experiment", "Thought experiment: interesting read"),
    Case(
        "xml_in_json_string",
        '{"plan": "use <thinking> tags", "answer": 1}',
        "json_field",
        {"plan": "use <thinking> tags"},
        '{"answer": 1}',
    ),
    Case(
        "marker_in_xml",
        "<thinking>Thought: inner</thinking>Answer: out",
        "xml_tag",
        {"thought": "Thought: inner"},
        "Answer: out",
    ),
    Case(
        "xml_beats_marker_2",
        "Thought: one\n<thinking>two</thinking>\nAnswer: 3",
        "xml_tag",
        {"thought": "two"},
        "Thought: one\n\nAnswer: 3",
    ),
]


def main() -> None:
    CORPUS_DIR.mkdir(parents=True, exist_ok=True)
    for stale in CORPUS_DIR.glob("*.txt"):
        stale.unlink()
    manifest_path = CORPUS_DIR / "manifest.jsonl"
    seen = set()
    with open(manifest_path, "w", encoding="utf-8") as manifest:
        for i, case in enumerate(CASES):
            assert case.slug not in seen, f"duplicate slug {case.slug}"
            seen.add(case.slug)
            name = f"{i:03d}_{case.slug}.txt"
            (CORPUS_DIR / name).write_text(case.text, encoding="utf-8", newline="")
            record = {"input": name, "strategy": case.strategy}
            for key in ("thought", "plan", "reflection"):
                if key in case.fields:
                    record[key] = case.fields[key]
            record["cleaned_sha256"] = hashlib.sha256(
                case.expected_cleaned.encode("utf-8")
            ).hexdigest()
            manifest.write(json.dumps(record, ensure_ascii=False) + "\n")
    print(f"wrote {len(CASES)} fixtures + manifest to {CORPUS_DIR}")


if __name__ == "__main__":
    main()
