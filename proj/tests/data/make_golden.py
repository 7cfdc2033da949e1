#!/usr/bin/env python3
"""Regenerates the datapipe fixtures and golden files.

Independent reference implementation of the segmentation rules; the C++
tests compare their outputs against these files value-for-value. Timings sit
on a 0.25 s grid so double arithmetic is exact across languages.
"""

import json
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent


# ---- reference pipeline ----------------------------------------------------

def redistribute(start, end, words):
    n = len(words)
    span = end - start
    out = []
    for i, text in enumerate(words):
        w = {
            "text": text,
            "start": start + i * span / n,
            "end": start + (i + 1) * span / n,
        }
        out.append(w)
    out[0]["start"] = start
    out[-1]["end"] = end
    return out


def apply_decisions(sentences):
    timeline = []
    for s in sentences:
        decision = s["decision"]
        realtime = s.get("realtime", True)
        if decision == "delete":
            continue
        if decision == "keep":
            for w in s["words"]:
                timeline.append({**w, "realtime": realtime})
        else:
            for w in redistribute(s["start"], s["end"], decision["edit"]):
                timeline.append({**w, "realtime": realtime})
    return timeline


def timeline_end(timeline):
    return max((w["end"] for w in timeline), default=0.0)


def chunk_transcript(timeline, w, o, min_words):
    duration = timeline_end(timeline)
    stride = w - o
    out = []
    k = 0
    while True:
        start = k * stride
        if start + w > duration + 1e-9:
            break
        words = [t for t in timeline if start <= t["start"] < start + w]
        previous = [t for t in timeline if t["start"] < start]
        if len(words) >= min_words:
            out.append(
                {
                    "start": start,
                    "end": start + w,
                    "w": w,
                    "o": o,
                    "word_count": len(words),
                    "min_words": min_words,
                    "previous_text_words": len(previous),
                    "words": words,
                }
            )
        k += 1
    return out


def select_annealing_clips(timeline, min_duration=16.0, max_duration=64.0,
                           max_silence=3.0, words_per_second=2.0, realtime_min=0.8):
    out = []
    n = len(timeline)
    run_begin = 0
    while run_begin < n:
        run_end = run_begin + 1
        while run_end < n and timeline[run_end]["start"] - timeline[run_end - 1]["end"] <= max_silence:
            run_end += 1
        cursor = run_begin
        while cursor < run_end:
            clip_start = timeline[cursor]["start"]
            last = cursor
            while last + 1 < run_end and timeline[last + 1]["end"] - clip_start <= max_duration:
                last += 1
            words = timeline[cursor:last + 1]
            end = timeline[last]["end"]
            duration = end - clip_start
            max_gap = 0.0
            for i in range(cursor + 1, last + 1):
                max_gap = max(max_gap, timeline[i]["start"] - timeline[i - 1]["end"])
            realtime_fraction = sum(1 for w in words if w["realtime"]) / len(words)
            ok = (
                min_duration <= duration <= max_duration
                and max_gap <= max_silence
                and len(words) >= words_per_second * duration
                and realtime_fraction >= realtime_min
            )
            if ok:
                out.append(
                    {
                        "start": clip_start,
                        "end": end,
                        "duration": duration,
                        "word_count": len(words),
                        "max_internal_silence": max_gap,
                        "realtime_fraction": realtime_fraction,
                        "filters": {
                            "min_duration": min_duration,
                            "max_duration": max_duration,
                            "max_silence": max_silence,
                            "min_words": words_per_second * duration,
                            "realtime_min": realtime_min,
                        },
                    }
                )
            cursor = last + 1
        run_begin = run_end
    return out


def extract_eval_segments(timeline, game_length, seg_len=100.0, min_words=200):
    out = []
    for k in range(int(game_length / seg_len)):
        start = k * seg_len
        end = start + seg_len
        count = sum(1 for w in timeline if start <= w["start"] < end)
        if count >= min_words:
            out.append({"start": start, "end": end, "word_count": count, "min_words": min_words})
    return out


# ---- fixture generation -----------------------------------------------------

def q(x):
    """Snap to the 0.25 s grid."""
    return round(x * 4) / 4


def make_small_transcript():
    rng = random.Random(20251105)
    sentences = []
    t = 0.0
    i = 0
    # 66 s of commentary, dense except for a sparse stretch in [24, 40) that
    # pushes the chunks covering it under the 2W word filter
    while t < 62.0:
        dur = q(rng.choice([2.0, 2.5, 3.0, 3.5]))
        start = q(t)
        end = q(t + dur)
        sparse = 24.0 <= start < 40.0
        wps = 0.5 if sparse else rng.choice([4.0, 4.5, 5.0])
        n_words = max(2, int(dur * wps))
        words = redistribute(start, end, [f"s{i}w{k}" for k in range(n_words)])
        roll = rng.random()
        if roll < 0.50:
            decision = "keep"
        elif roll < 0.87:
            decision = {"edit": [f"e{i}w{k}" for k in range(max(2, n_words - 1))]}
        else:
            decision = "delete"
        sentences.append(
            {
                "start": start,
                "end": end,
                "words": [{"text": w["text"], "start": w["start"], "end": w["end"]} for w in words],
                "decision": decision,
                "realtime": rng.random() > 0.1,
            }
        )
        gap = 0.25 if rng.random() < 0.8 else q(rng.choice([1.0, 2.0, 4.0]))
        t = end + gap
        i += 1
    return {"sentences": sentences}


def make_long_transcript():
    rng = random.Random(777)
    sentences = []
    t = 0.0
    i = 0
    # ~520 s; density drops in [200, 300) so that eval segment 2 fails the
    # 200-word filter; a few 4 s silences split annealing runs
    while t < 516.0:
        dur = q(rng.choice([2.0, 2.5, 3.0]))
        start = q(t)
        end = q(t + dur)
        sparse = 200.0 <= start < 300.0
        wps = 1.0 if sparse else rng.choice([2.5, 3.0])
        n_words = max(2, int(dur * wps))
        words = redistribute(start, end, [f"g{i}w{k}" for k in range(n_words)])
        sentences.append(
            {
                "start": start,
                "end": end,
                "words": [{"text": w["text"], "start": w["start"], "end": w["end"]} for w in words],
                "decision": "keep",
                "realtime": not (440.0 <= start < 470.0),
            }
        )
        if sparse:
            gap = q(rng.choice([1.0, 1.5, 2.0]))
        elif rng.random() < 0.06:
            gap = q(rng.choice([3.5, 4.0, 5.0]))
        else:
            gap = 0.25
        t = end + gap
        i += 1
    return {"sentences": sentences}


def dump_jsonl(path, rows):
    with open(path, "w") as f:
        for row in rows:
            f.write(json.dumps(row, separators=(",", ":")) + "\n")


def main():
    small = make_small_transcript()
    long_t = make_long_transcript()
    (HERE / "transcript_small.json").write_text(json.dumps(small, indent=1) + "\n")
    (HERE / "transcript_long.json").write_text(json.dumps(long_t, indent=1) + "\n")

    small_timeline = apply_decisions(small["sentences"])
    long_timeline = apply_decisions(long_t["sentences"])

    dump_jsonl(HERE / "golden_chunks.jsonl", chunk_transcript(small_timeline, 24.0, 12.0, 48))
    dump_jsonl(HERE / "golden_clips.jsonl", select_annealing_clips(long_timeline))
    dump_jsonl(
        HERE / "golden_evalseg.jsonl",
        extract_eval_segments(long_timeline, timeline_end(long_timeline)),
    )

    # redistribution table: interval, words -> expected per-word spans
    cases = []
    for (start, end, n) in [(10.0, 14.0, 8), (0.0, 3.0, 1), (5.5, 9.25, 3), (2.0, 2.5, 7)]:
        words = [f"r{k}" for k in range(n)]
        cases.append({"start": start, "end": end, "words": words,
                      "expected": redistribute(start, end, words)})
    (HERE / "golden_redistribute.json").write_text(json.dumps(cases, indent=1) + "\n")

    print("small timeline words:", len(small_timeline), "end:", timeline_end(small_timeline))
    print("long timeline words:", len(long_timeline), "end:", timeline_end(long_timeline))
    print("chunks:", sum(1 for _ in open(HERE / "golden_chunks.jsonl")))
    print("clips:", sum(1 for _ in open(HERE / "golden_clips.jsonl")))
    print("evalsegs:", sum(1 for _ in open(HERE / "golden_evalseg.jsonl")))


if __name__ == "__main__":
    main()
