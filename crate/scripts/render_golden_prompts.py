#!/usr/bin/env python3
"""Reference renderer for the prompt templates.

Builds a small fixture (two synthetic transcripts and a list of render
cases), renders every case straight from the template files with plain
string handling, and writes both under crates/core/tests/fixtures/prompts/.
Shares no code with the Rust crate.
"""

import json
import os
import re

ROOT = os.path.join(os.path.dirname(__file__), "..")
TEMPLATES = os.path.join(ROOT, "crates", "core", "templates")
OUT = os.path.join(ROOT, "crates", "core", "tests", "fixtures", "prompts")

SPEAKERS = ["Serena", "Maya Chen", "Oscar", "Ivy"]
TEXTS = [
    "Should we use a bar chart for this?",
    "Yeah, I think that works.",
    "I can help you build the chart. What columns do you want?",
    "Wait, which sheet are we on",
    "Row 12 has a typo: it says \"Sept\" not \"Sep\".",
    "okay",
    "Let's split it:\nI take the pivot table,\nyou take labels.",
    "Oscar, can you sum column C?",
    "Sure! The sum of column C is 418.",
    "Hmm {not} sure about braces {{here}}.",
    "Mm-hmm.",
    "So the final answer goes in the slides?",
]


def make_transcript(tid, n):
    utterances = []
    ts = 2000
    for i in range(1, n + 1):
        ts += 1500 + (i * 7919) % 9000
        if i % 5 == 0:
            ts += 250  # fractional seconds in some timestamps
        utterances.append(
            {
                "index": i,
                "timestamp_ms": ts,
                "speaker": SPEAKERS[(i * 3) % len(SPEAKERS)],
                "text": TEXTS[(i - 1) % len(TEXTS)],
            }
        )
    thread = {}
    for i in range(1, n + 1):
        if i == 1 or i % 9 == 0:
            thread[str(i)] = "-"
        elif i % 7 == 0:
            thread[str(i)] = "(%d, -)" % (i - 3)
        elif i % 4 == 0:
            thread[str(i)] = "(%d, %d)" % (i - 1, i - 2)
        else:
            thread[str(i)] = str(i - 1 - (i % 3 == 0))
    return {"id": tid, "utterances": utterances, "thread": thread}


CASES = [
    {"name": "thread_window", "template": "thread_window", "transcript": "g12", "target": 9, "size": 5},
    {"name": "thread_all_at_once", "template": "thread_all_at_once", "transcript": "g42", "shots": ["g12"]},
    {"name": "thread_all_at_once_zero_shot", "template": "thread_all_at_once", "transcript": "g12", "shots": []},
    {"name": "abcde_window_plain", "template": "abcde_window_plain", "transcript": "g12", "target": 10, "size": 10},
    {"name": "abcde_window_threaded", "template": "abcde_window_threaded", "transcript": "g12", "target": 7, "size": 4},
    {"name": "abcde_full_plain", "template": "abcde_full_plain", "transcript": "g42"},
    {"name": "abcde_full_threaded", "template": "abcde_full_threaded", "transcript": "g12"},
    {"name": "baseline_lee", "template": "baseline_lee", "transcript": "g12", "target": 12, "size": 6},
    {"name": "baseline_qamar", "template": "baseline_qamar", "transcript": "g12", "target": 3, "size": 10},
    {"name": "baseline_martinenghi", "template": "baseline_martinenghi", "transcript": "g12"},
]


def fill(template_text, values):
    lines = template_text.replace("\r\n", "\n").split("\n")
    while lines and lines[0].startswith("%%"):
        lines.pop(0)
    body = "\n".join(lines)
    out = []
    pos = 0
    for m in re.finditer(r"\{\{|\}\}|\{([a-z_][a-z0-9_]*)\}", body):
        out.append(body[pos : m.start()])
        tok = m.group(0)
        if tok == "{{":
            out.append("{")
        elif tok == "}}":
            out.append("}")
        else:
            out.append(values[m.group(1)])
        pos = m.end()
    out.append(body[pos:])
    return "".join(out)


def flat(s):
    return s.replace("\r\n", " ").replace("\n", " ").replace("\r", " ")


def line(u, label=None):
    s = "#%d %s: %s" % (u["index"], flat(u["speaker"]), flat(u["text"]))
    if label is not None:
        s += " [respond_line= %s]" % label
    return s


def clock(ms):
    h, rem = divmod(ms, 3600000)
    m, rem = divmod(rem, 60000)
    s, frac = divmod(rem, 1000)
    out = "%02d:%02d:%02d" % (h, m, s)
    return out + (".%03d" % frac if frac else "")


def render(case, transcripts):
    t = transcripts[case["transcript"]]
    us = t["utterances"]
    labels = t["thread"]
    name = case["template"]
    if "target" in case:
        i = case["target"]
        start = max(1, i + 1 - case["size"])
        ctx = us[start - 1 : i - 1]
        target = us[i - 1]
        labeled = name in ("thread_window", "abcde_window_threaded")
        rows = [line(u, labels[str(u["index"])] if labeled else None) for u in ctx]
        rows.append(line(target, labels[str(i)] if name == "abcde_window_threaded" else None))
        values = {
            "transcript": "\n".join(rows),
            "target_timestamp": clock(target["timestamp_ms"]),
            "target_speaker": flat(target["speaker"]),
            "target_text": flat(target["text"]),
        }
    else:
        threaded = name == "abcde_full_threaded"
        rows = [line(u, labels[str(u["index"])] if threaded else None) for u in us]
        values = {"transcript": "\n".join(rows), "num_utterances": str(len(us))}
        if name == "thread_all_at_once":
            shots = case["shots"]
            examples = ""
            for k, sid in enumerate(shots, start=1):
                s = transcripts[sid]
                body = "\n".join(line(u, s["thread"][str(u["index"])]) for u in s["utterances"])
                examples += "\nExample transcript %d (with labels):\n<<<EXAMPLE_START>>>\n%s\n<<<EXAMPLE_END>>>\n" % (k, body)
            values["examples"] = examples
            values["review_note"] = (
                "Then I will provide the example transcript with labels and new transcript without labels for threading."
                if shots
                else "Then I will provide the new transcript without labels for threading."
            )
    with open(os.path.join(TEMPLATES, name + ".txt"), encoding="utf-8") as f:
        return fill(f.read(), values)


def main():
    transcripts = {t["id"]: t for t in (make_transcript("g12", 12), make_transcript("g42", 42))}
    os.makedirs(OUT, exist_ok=True)
    with open(os.path.join(OUT, "input.json"), "w", encoding="utf-8") as f:
        json.dump({"transcripts": list(transcripts.values()), "cases": CASES}, f, indent=2, ensure_ascii=False)
        f.write("\n")
    for case in CASES:
        with open(os.path.join(OUT, case["name"] + ".txt"), "w", encoding="utf-8", newline="") as f:
            f.write(render(case, transcripts))
    print("wrote %d prompts to %s" % (len(CASES), OUT))


if __name__ == "__main__":
    main()
