#!/usr/bin/env python3
"""Independent reference computation of corpus statistics.

Reads data/corpus/manifest.json and writes the expected statistics fixture
consumed by the Rust test suite. Shares no code with the Rust crate: labels
are parsed with a regex here and gaps are collected as a flat list.
"""

import csv
import json
import os
import re
import sys

ROOT = os.path.join(os.path.dirname(__file__), "..")
CORPUS = os.path.join(ROOT, "data", "corpus")
OUT = os.path.join(ROOT, "crates", "core", "tests", "fixtures", "corpus_stats.json")

LABEL = re.compile(r"^\s*\(?\s*(\d+|-)\s*(?:,\s*(\d+|-)\s*)?\)?\s*$")


def read_records(path):
    with open(path, encoding="utf-8") as f:
        if path.endswith(".jsonl"):
            return [json.loads(l) for l in f if l.strip()]
        return list(csv.DictReader(f))


def targets(raw):
    m = LABEL.match(raw)
    if not m:
        raise ValueError("bad label %r" % raw)
    return [p for p in m.groups() if p is not None]


def stats(utterances, gold):
    labels = {int(g["index"]): targets(str(g["respond_line"])) for g in gold}
    n_words = sum(len(u["text"].split()) for u in utterances)
    gaps = []
    raw_gaps = []
    no_thread = 0
    for pos, _ in enumerate(utterances, start=1):
        ts = labels[pos]
        if ts == ["-"]:
            no_thread += 1
            continue
        for t in ts:
            if t == "-":
                raw_gaps.append(0)
            else:
                gaps.append(pos - int(t))
                raw_gaps.append(pos - int(t))
    return {
        "n_utterances": len(utterances),
        "n_words": n_words,
        "n_no_thread": no_thread,
        "n_links": len(gaps),
        "gaps": gaps,
        "raw_gaps": raw_gaps,
    }


def finish(s):
    g = s.pop("gaps")
    r = s.pop("raw_gaps")
    s["mean_gap"] = (sum(g) / len(g)) if g else None
    s["min_gap"] = min(g) if g else None
    s["max_gap"] = max(g) if g else None
    s["raw_min_gap"] = min(r) if r else None
    return s


def main():
    with open(os.path.join(CORPUS, "manifest.json"), encoding="utf-8") as f:
        manifest = json.load(f)["transcripts"]
    per = {}
    pooled = {"n_utterances": 0, "n_words": 0, "n_no_thread": 0, "n_links": 0, "gaps": [], "raw_gaps": []}
    code_counts = {c: 0 for c in "ABCDE"}
    for entry in manifest:
        utts = read_records(os.path.join(CORPUS, entry["transcript"]))
        gold = read_records(os.path.join(CORPUS, entry["gold"]))
        s = stats(utts, gold)
        for k in pooled:
            pooled[k] = pooled[k] + s[k]
        for g in gold:
            for c in re.findall(r"[A-E]", g.get("abcde") or ""):
                code_counts[c] += 1
        per[entry["id"]] = finish(dict(s))
    total = finish(pooled)
    n_t = len(manifest)
    out = {
        "n_transcripts": n_t,
        "totals": total,
        "mean_utterances_per_dialogue": total["n_utterances"] / n_t,
        "mean_words_per_dialogue": total["n_words"] / n_t,
        "mean_words_per_utterance": total["n_words"] / total["n_utterances"],
        "code_proportions": {c: code_counts[c] / total["n_utterances"] for c in "ABCDE"},
        "per_transcript": dict(sorted(per.items())),
    }
    os.makedirs(os.path.dirname(OUT), exist_ok=True)
    with open(OUT, "w", encoding="utf-8", newline="\n") as f:
        json.dump(out, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    sys.exit(main())
