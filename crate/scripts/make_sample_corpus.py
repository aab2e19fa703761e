#!/usr/bin/env python3
"""Generate the bundled synthetic corpus under data/corpus/.

The generator is seeded, so re-running it reproduces the checked-in files
byte for byte. Each transcript is built from a small conversation state
machine: open threads, questions and answers, backchannels followed by the
interrupted speaker resuming, laggy agent replies, consensus summaries,
transitions, and split contributions. Gold thread links, ABCDE codes and
(for a subset of transcripts) threading subcategories are emitted alongside.
"""

import csv
import json
import os
import random
import sys

OUT = os.path.join(os.path.dirname(__file__), "..", "data", "corpus")

WORKSHOP_TOPICS = [
    "the GPA box plot",
    "the scatter plot of Instagram hours",
    "the outliers in the sleep column",
    "our research question",
    "the axis labels",
    "the shared sheet",
    "the cumulative GPA tab",
    "the presentation slides",
    "the survey data",
    "the histogram bins",
]

CONSENSUS_TOPICS = [
    "the mirror",
    "the fresh water",
    "the nylon rope",
    "the flashlight",
    "the sea chart",
    "the chocolate bars",
    "the mosquito netting",
    "the fishing kit",
]

QUESTIONS = [
    "What do you guys think about {t}?",
    "Should we start with {t}?",
    "Can someone pull up {t}?",
    "Wait, where is {t}?",
    "Does anyone know how to fix {t}?",
    "Where should {t} go on the list?",
]
CONSENSUS_QUESTIONS = [
    "Where should {t} go on the list?",
    "How useful is {t} for getting rescued?",
    "Do we rank {t} above the others?",
    "What do you think about {t}?",
]
ANSWERS = [
    "I think it's in the second tab.",
    "Probably near the top, honestly.",
    "Yeah, I can do that.",
    "It should be under the insert menu.",
    "I would put it pretty high.",
    "Not sure, maybe the last column.",
]
TRANSITIONS = [
    "Okay, let's move on to {t}.",
    "Now let's look at {t}.",
    "Alright, next thing is {t}.",
]
STATEMENTS = [
    "I think {t} is the most important part.",
    "So I was looking at {t} and it seems off.",
    "I made a copy of {t} for us.",
    "We still need to finish {t}.",
]
EXPLICIT = [
    "Because otherwise the numbers don't make sense.",
    "But the values look kind of weird to me.",
    "So that means we need more data first.",
    "Therefore it should probably go first.",
]
IMPLICIT = [
    "The other column only goes up to forty.",
    "It was the same one as the older version.",
    "There are like two hundred rows in there.",
    "The dates are all in one format now.",
]
BUILDS = [
    "And we could also add a title to it.",
    "Plus it would help with the second question.",
    "We could color the points by grade too.",
    "And if we sort it first it gets easier.",
]
AGREES = [
    "Yeah, that makes sense to me.",
    "Okay, good. I agree with that.",
    "True, that's a good point.",
]
DIFFERS = [
    "I don't think that's right though.",
    "Maybe, but the other one looks better.",
    "I'm not sure, it could be the opposite.",
]
CHATS = [
    "That's funny.",
    "Oh, cool.",
    "I'm so tired today.",
    "Did anyone watch the game last night?",
]
BACKCHANNELS = ["yeah", "mhm", "okay", "hmm", "right", "uh-huh", "yeah yeah", "sure"]
RESUMES = [
    "Anyway, like I was saying, {t} needs a label.",
    "And then we just copy it over to the new sheet.",
    "So yeah, that's why I changed it.",
    "And the last part is the legend.",
]
CONSENSUS = [
    "Okay so we agree, {t} goes first.",
    "So the plan is to finish {t} today.",
    "Our current order puts {t} second. What do you think?",
]
AGENT_LAGGY = [
    "Great question! {T} can really help you spot patterns.",
    "Box plots are cool for spotting outliers, right?",
    "I think {t} is a smart choice for your analysis.",
]
AGENT_IRRELEVANT = [
    "Same old sheets, huh?",
    "Did you know pizza is the most popular study snack?",
    "Napoli's is like the pizza place downtown.",
]


def codes_str(codes):
    return "[" + ", ".join(sorted(codes)) + "]"


class Builder:
    def __init__(self, rng, speakers, agent, topics, questions):
        self.rng = rng
        self.speakers = speakers
        self.agent = agent
        self.topics = topics
        self.questions = questions
        self.rows = []  # dicts: speaker, text, label, codes, subcat
        self.last_topic_line = None
        self.topic = rng.choice(topics)

    def n(self):
        return len(self.rows)

    def add(self, speaker, text, label, codes=(), subcat=None):
        self.rows.append(
            {
                "speaker": speaker,
                "text": text,
                "label": label,
                "codes": set(codes),
                "subcat": subcat,
            }
        )
        return self.n()

    def other(self, *exclude):
        pool = [s for s in self.speakers if s not in exclude]
        return self.rng.choice(pool)

    def fmt(self, pattern, topic=None):
        t = topic or self.topic
        return pattern.format(t=t, T=t[0].upper() + t[1:])

    def last_speaker(self):
        return self.rows[-1]["speaker"] if self.rows else None

    def step(self):
        r = self.rng.random()
        n = self.n()
        if n == 0:
            s = self.rng.choice(self.speakers)
            self.add(s, self.fmt(self.rng.choice(STATEMENTS)), "-", subcat="TT")
            self.last_topic_line = 1
            return
        prev = self.last_speaker()
        if r < 0.14:
            # question / answer pair
            q = self.other(prev)
            qi = self.add(q, self.fmt(self.rng.choice(self.questions)), str(n), {"E"}, "AP")
            a = self.other(q)
            self.add(a, self.rng.choice(ANSWERS), str(qi), subcat="AP")
        elif r < 0.24:
            # resumption after a backchannel
            s = self.other(prev)
            si = self.add(s, self.fmt(self.rng.choice(STATEMENTS)), str(n), {"B"}, "I")
            b = self.other(s)
            self.add(b, self.rng.choice(BACKCHANNELS), str(si), subcat="BC")
            self.add(s, self.fmt(self.rng.choice(RESUMES)), str(si), subcat="SC")
        elif r < 0.32:
            # topic transition
            self.topic = self.rng.choice([t for t in self.topics if t != self.topic])
            s = self.other(prev)
            codes = {"E"} if self.rng.random() < 0.3 else set()
            self.last_topic_line = self.add(
                s, self.fmt(self.rng.choice(TRANSITIONS)), "-", codes, "TT"
            )
        elif r < 0.42:
            s = self.other(prev)
            self.add(s, self.rng.choice(EXPLICIT), str(n), subcat="E")
        elif r < 0.50:
            s = self.other(prev)
            self.add(s, self.rng.choice(IMPLICIT), str(n), subcat="I")
        elif r < 0.57:
            s = self.other(prev)
            self.add(s, self.rng.choice(BUILDS), str(n), {"B"}, "I")
        elif r < 0.63:
            s = self.other(prev)
            self.add(s, self.rng.choice(AGREES), str(n), {"A"}, "AP")
        elif r < 0.68:
            s = self.other(prev)
            self.add(s, self.rng.choice(DIFFERS), str(n), {"D"}, "E")
        elif r < 0.74:
            # side chat starts its own short thread
            s = self.other(prev)
            ci = self.add(s, self.rng.choice(CHATS), "-", {"C"}, "TT")
            if self.rng.random() < 0.5:
                c2 = self.other(s)
                self.add(c2, self.rng.choice(CHATS), str(ci), {"C"}, "I")
        elif r < 0.80:
            # laggy agent reply to something several turns back
            back = self.rng.randint(3, min(9, n)) if n >= 3 else n
            target = n - back + 1
            self.add(
                self.agent, self.fmt(self.rng.choice(AGENT_LAGGY)), str(target), subcat="I"
            )
        elif r < 0.84:
            pick = self.rng.choice(AGENT_IRRELEVANT)
            ai = self.add(self.agent, pick, "-", {"C"}, "TT")
            if self.rng.random() < 0.6:
                s = self.other(self.agent)
                self.add(s, "Okay {}.".format(self.agent), str(ai), {"C"}, "BC")
        elif r < 0.91:
            # consensus summary linking to the last relevant line
            s = self.other(prev)
            text = self.fmt(self.rng.choice(CONSENSUS))
            codes = {"E"} if text.endswith("What do you think?") else set()
            self.add(s, text, str(n), codes, "CI")
        else:
            # split: close the current thread and open a new one
            new_topic = self.rng.choice([t for t in self.topics if t != self.topic])
            s = self.other(prev)
            text = "Okay, that works. Also, " + self.fmt("what about {t}?", new_topic)
            self.topic = new_topic
            self.last_topic_line = self.add(s, text, "({}, -)".format(n), {"A", "E"}, "CI")

    def build(self, length):
        while self.n() < length:
            self.step()
        del self.rows[length:]
        # a truncated tail cannot leave forward links, links only point back
        return self.rows


def timestamps(rng, n):
    ms = rng.randint(1, 6) * 1000
    out = []
    for _ in range(n):
        out.append(ms)
        ms += rng.randint(2, 12) * 1000
    return out


def fmt_ts(ms):
    s = ms // 1000
    return "{:02d}:{:02d}:{:02d}".format(s // 3600, (s // 60) % 60, s % 60)


SPECS = [
    ("ws01", "workshop: data science group A", 42, True, "jsonl"),
    ("ws02", "workshop: data science group A", 55, True, "jsonl"),
    ("ws03", "workshop: data science group A", 38, False, "jsonl"),
    ("ws04", "workshop: data science group B", 60, True, "jsonl"),
    ("ws05", "workshop: data science group B", 47, False, "jsonl"),
    ("ws06", "workshop: data science group B", 33, False, "csv"),
    ("ws07", "workshop: data science group A", 51, False, "jsonl"),
    ("ws08", "workshop: data science group B", 44, False, "jsonl"),
    ("cs01", "consensus: sinking ship ranking", 36, False, "jsonl"),
    ("cs02", "consensus: sinking ship ranking", 49, False, "jsonl"),
    ("cs03", "consensus: sinking ship ranking", 40, False, "csv"),
    ("cs04", "consensus: sinking ship ranking", 30, False, "jsonl"),
]

GROUP_A = ["Serena", "Ivy", "Maya Chen"]
GROUP_B = ["Jalen", "Greta", "Katie"]
CONSENSUS_PEOPLE = ["Alex", "Jordan"]


def main():
    rng = random.Random(20240214)
    os.makedirs(OUT, exist_ok=True)
    manifest = []
    for tid, scenario, length, with_subcats, fmt in SPECS:
        if tid.startswith("cs"):
            speakers = CONSENSUS_PEOPLE + ["Red Morgan"]
            agent = "Red Morgan"
            topics, questions = CONSENSUS_TOPICS, CONSENSUS_QUESTIONS
        else:
            group = GROUP_A if "group A" in scenario else GROUP_B
            speakers = group + ["Oscar"]
            agent = "Oscar"
            topics, questions = WORKSHOP_TOPICS, QUESTIONS
        rows = Builder(rng, speakers, agent, topics, questions).build(length)
        ts = timestamps(rng, len(rows))
        tfile = "{}.transcript.{}".format(tid, fmt)
        gfile = "{}.gold.{}".format(tid, fmt)
        records = []
        gold = []
        for i, (row, t) in enumerate(zip(rows, ts), start=1):
            records.append(
                {"index": i, "timestamp": fmt_ts(t), "speaker": row["speaker"], "text": row["text"]}
            )
            g = {"index": i, "respond_line": row["label"], "abcde": codes_str(row["codes"])}
            if with_subcats and row["subcat"]:
                g["subcat"] = row["subcat"]
            gold.append(g)
        write(os.path.join(OUT, tfile), records, fmt, ["index", "timestamp", "speaker", "text"])
        write(os.path.join(OUT, gfile), gold, fmt, ["index", "respond_line", "abcde", "subcat"])
        manifest.append({"id": tid, "scenario": scenario, "transcript": tfile, "gold": gfile})
    with open(os.path.join(OUT, "manifest.json"), "w", encoding="utf-8", newline="\n") as f:
        json.dump({"transcripts": manifest}, f, indent=2, ensure_ascii=False)
        f.write("\n")


def write(path, records, fmt, columns):
    with open(path, "w", encoding="utf-8", newline="") as f:
        if fmt == "jsonl":
            for r in records:
                f.write(json.dumps(r, ensure_ascii=False) + "\n")
        else:
            w = csv.DictWriter(f, fieldnames=columns, lineterminator="\n")
            w.writeheader()
            for r in records:
                w.writerow({c: r.get(c, "") for c in columns})


if __name__ == "__main__":
    sys.exit(main())
