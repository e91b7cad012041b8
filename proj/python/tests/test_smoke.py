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

"""Smoke tests for the Python bindings."""

import json
import math
import random
from fractions import Fraction
from pathlib import Path

import pytest

import mvforge

ROOT = Path(__file__).resolve().parents[2]
SONG = ROOT / "tests" / "fixtures" / "songs" / "neon-harbor"

CODES = ["CC", "PA", "LS", "VH", "SC", "AC", "MT", "ST", "EM", "VQ", "CR", "AN"]


def test_quantize_grid():
    assert mvforge.FPS == 24
    assert mvforge.quantize(12.5) == 300
    assert mvforge.quantize(1 / 48) == 1
    assert mvforge.quantize(0.02, "ceil") == 1
    with pytest.raises(mvforge.DomainError):
        mvforge.quantize(-1.0)
    with pytest.raises(mvforge.ConfigError):
        mvforge.quantize(1.0, "sideways")


def test_plan_tiles_fixture_song():
    context = json.loads((SONG / "context.json").read_text())
    plan = mvforge.plan(context)
    t = 0
    for shot in plan["shots"]:
        assert shot["span"]["start"] == t
        assert 72 <= shot["span"]["end"] - t <= 360
        t = shot["span"]["end"]
    assert t == plan["duration"]
    assert [s["span"]["end"] for s in plan["subclips"]][-1] == t


def test_plan_rejects_bad_context():
    with pytest.raises(mvforge.Error):
        mvforge.plan({"metadata": {}})


def test_category_means_exact():
    row = "3.07 2.95 2.67 3.07 2.00 2.10 3.08 2.18 2.60 3.28 1.23 1.83".split()
    scores = mvforge.category_means(dict(zip(CODES, row)))
    art = sum(Fraction(v) for v in row[9:]) / 3
    assert Fraction(scores["art"]["exact"]) == art == Fraction(317, 150)
    assert scores["art"]["value"] == "2.11"


def test_category_scores_match_weighted_sum():
    card = {"video_id": "v", "rater": "human", "scores": dict(zip(CODES, [5, 4, 3, 2, 1, 2, 3, 4, 5, 4, 3, 2]))}
    out = mvforge.category_scores(card)
    tech = Fraction(5 + 4 + 3 + 2, 4)
    assert Fraction(out["technical"]["exact"]) == tech


def test_pearson_against_fractions():
    rng = random.Random(5)
    for _ in range(20):
        n = rng.randint(3, 30)
        x = [rng.uniform(-3, 3) for _ in range(n)]
        y = [xi * 0.5 + rng.uniform(-1, 1) for xi in x]
        fx, fy = [Fraction(v) for v in x], [Fraction(v) for v in y]
        mx, my = sum(fx) / n, sum(fy) / n
        sxy = sum((a - mx) * (b - my) for a, b in zip(fx, fy))
        sxx = sum((a - mx) ** 2 for a in fx)
        syy = sum((b - my) ** 2 for b in fy)
        want = float(sxy) / math.sqrt(float(sxx) * float(syy))
        assert mvforge.pearson(x, y) == pytest.approx(want, rel=1e-12)
    assert mvforge.pearson([1, 1, 1], [1, 2, 3]) is None


def test_correlate_shapes():
    rng = random.Random(9)

    def card(vid, rater):
        return {"video_id": vid, "rater": rater, "scores": {c: rng.randint(1, 5) for c in CODES}}

    human = [card(f"v{i}", "human") for i in range(4)]
    model = [card(f"v{i}", "model:x") for i in range(4)]
    report = mvforge.correlate(human, model)
    assert len(report["metrics"]) == 17
    assert report["raters"]["model:x"]["paired_videos"] == 4


def test_select_index_gate_then_argmax():
    def v(i, ok, a, b):
        return {"candidate_id": f"c{i}", "modality": "video", "gate_pass": ok,
                "adherence": 3, "alignment": a, "identity": b}

    verdicts = [v(0, False, 5, 5), v(1, True, 3, 4), v(2, True, 4, 3), v(3, True, 2, 2)]
    assert mvforge.select_index(verdicts) == 1  # 7 == 7, lowest index wins
    assert mvforge.select_index(verdicts, "feasibility") == 1
    assert mvforge.select_index([v(0, False, 5, 5)]) is None


def test_run_fixture_end_to_end(tmp_path):
    status = mvforge.run_fixture(SONG, tmp_path / "job")
    assert status["stage"] == "done"
    assert not status["failure"]
    assert "failed" not in status["counts"]
    manifest = json.loads((tmp_path / "job" / "manifest.json").read_text())
    spans = [e["span"] for e in manifest["entries"]]
    assert spans[0]["start"] == 0
    assert all(a["end"] == b["start"] for a, b in zip(spans, spans[1:]))
    # Same inputs, same seed: byte-identical manifest.
    mvforge.run_fixture(SONG, tmp_path / "again")
    assert (tmp_path / "again" / "manifest.json").read_bytes() == (tmp_path / "job" / "manifest.json").read_bytes()
