#!/usr/bin/env python3
# Copyright 2026 The mvforge Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Regenerates the fixture songs under tests/fixtures/songs.

Raw analyzer payloads are written on half-second boundaries so that the
expected normalized context (context.json) can be stated exactly here,
independently of the C++ normalizer: frames = seconds * 24.
"""

import json
import pathlib

FPS = 24
ROOT = pathlib.Path(__file__).resolve().parent / "songs"


def frames(seconds):
    f = seconds * FPS
    assert f == int(f), seconds
    return int(f)


def dump(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def song(song_id, duration, caption, sections, lyrics, stems=True, judge=None):
    d = ROOT / song_id
    raw = d / "raw"
    dump(raw / "captioner.json", caption)
    dump(raw / "structure_analyzer.json",
         {"segments": [{"start": s, "end": e, "label": l} for l, s, e in sections]})
    vocals = f"stems/{song_id}.vocals.wav"
    if stems:
        dump(raw / "source_separator.json",
             {"vocals": vocals, "accompaniment": f"stems/{song_id}.accompaniment.wav"})
    if lyrics is not None:
        dump(raw / "lyrics_transcriber.json",
             {"lines": [{"text": t, "start": s, "end": e, "confidence": 0.9} for t, s, e in lyrics]})
    if judge is not None:
        dump(d / "judge.json", judge)

    metadata = {"song_id": song_id, "duration": frames(duration), "sample_rate": 44100,
                "language_tag": "en", "mix_audio_ref": f"audio/{song_id}.wav"}
    if stems:
        metadata["vocal_stem_ref"] = vocals
    dump(d / "context.json", {
        "fps": FPS,
        "metadata": metadata,
        "caption": caption,
        "structure": [{"label": l, "span": {"start": frames(s), "end": frames(e)}}
                      for l, s, e in sections],
        "lyrics": [{"text": t, "span": {"start": frames(s), "end": frames(e)}, "confidence": 0.9}
                   for t, s, e in (lyrics or [])],
    })


def lines(section, start, end, step):
    out, t, n = [], start, 1
    while t + step <= end:
        out.append((f"{section} line {n}", t, t + step - 0.5))
        t += step
        n += 1
    return out


def main():
    sections = [("intro", 0, 12), ("verse", 12, 40), ("chorus", 40, 62), ("verse", 62, 88),
                ("chorus", 88, 110), ("bridge", 110, 128), ("chorus", 128, 144),
                ("outro", 144, 150)]
    lyr = []
    for i, (label, s, e) in enumerate(sections):
        if label in ("verse", "chorus", "bridge"):
            lyr += lines(f"{label} {i}", s + 1, e, 4)
    song("neon-harbor", 150,
         {"genre": "synth-pop", "mood": "wistful", "instrumentation": ["vocals", "synth", "drums"],
          "vocalist_attributes": {"gender": "female", "count": "duet", "age_range": "20s"}},
         sections, lyr,
         judge={
             "default": {"gate_pass": True, "adherence": 3, "alignment": 3, "identity": 3},
             "verdicts": {
                 # Second keyframe of the opening subclip scores best.
                 "shot-001.1:e1:k1:1": {"gate_pass": True, "adherence": 5, "alignment": 3, "identity": 3},
                 # Every first-round clip of shot 2 fails the gate: one regeneration round.
                 "shot-002.1:e1:v1:*": {"gate_pass": False, "adherence": 2, "alignment": 2, "identity": 2},
                 "shot-002.1:e1:v2:2": {"gate_pass": True, "adherence": 4, "alignment": 5, "identity": 4},
                 # Shot 3 never passes: the best-seen fallback is accepted.
                 "shot-003.1:e1:v*": {"gate_pass": False, "adherence": 1, "alignment": 1, "identity": 1},
                 "shot-003.1:e1:v2:0": {"gate_pass": False, "adherence": 2, "alignment": 4, "identity": 3},
                 # The judge times out once on this candidate and recovers on retry.
                 "shot-004.1:e1:v1:0": {"fail_times": 1, "gate_pass": True, "adherence": 4,
                                        "alignment": 4, "identity": 4},
             }})

    quiet = [("intro", 0, 8), ("verse", 8, 26), ("instrumental", 26, 38), ("outro", 38, 45)]
    song("quiet-room", 45,
         {"genre": "folk", "mood": "tender", "instrumentation": ["vocals", "acoustic guitar"],
          "vocalist_attributes": {"gender": "male", "count": "1", "age_range": "40s"}},
         quiet, None)

    evaluation()


CODES = ["CC", "PA", "LS", "VH", "SC", "AC", "MT", "ST", "EM", "VQ", "CR", "AN"]


def evaluation():
    """Scripted stand-ins for the external raters: a rubric judge table,
    human expert cards and an external objective metric. The numbers are
    arbitrary; they exercise the interfaces, not any published result."""
    d = ROOT.parent / "eval"
    videos = {}
    human = []
    metric = {}
    for i in range(1, 7):
        vid = f"v{i:02d}"
        base = [((i * 7 + k * 3) % 5) + 1 for k in range(12)]
        judged = {c: s for c, s in zip(CODES, base)}
        if i == 2:
            judged["PA"] = 3.5   # fractional: rounds half up
        if i == 3:
            judged["VQ"] = 6     # out of range: clamps to 5
        videos[f"videos/{vid}.mp4"] = {"scores": judged}
        human.append({"video_id": vid, "rater": "human",
                      "scores": {c: min(5, max(1, s + (1 if k % 4 == 0 else 0)))
                                 for k, (c, s) in enumerate(zip(CODES, base))}})
        if i == 1:
            human.append({"video_id": vid, "rater": "human", "scores": {c: 3 for c in CODES}})
        metric[vid] = round(15 + i * 1.7, 1)
    dump(d / "rubric_judge.json", {"name": "scripted-gemini", "videos": videos})
    (d / "human.ndjson").write_text("".join(json.dumps(h, sort_keys=True) + "\n" for h in human))
    dump(d / "external_metric.json", metric)


if __name__ == "__main__":
    main()
