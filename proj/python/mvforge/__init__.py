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

"""Python front end for the mvforge core.

Everything structured goes in and out as plain dicts and lists, shaped like
the JSON documents the pipeline writes to disk.
"""

from __future__ import annotations

import json
import os
from typing import Any, Iterable, Mapping, Optional, Sequence

from . import _core
from ._core import FPS, ConfigError, DomainError, Error, ValidationError, pearson, quantize

__all__ = [
    "FPS",
    "ConfigError",
    "DomainError",
    "Error",
    "ValidationError",
    "category_means",
    "category_scores",
    "correlate",
    "pearson",
    "plan",
    "quantize",
    "run_fixture",
    "select_index",
]


def plan(context: Mapping[str, Any]) -> dict:
    """Segments a music context (context.json) into shots and subclips."""
    return json.loads(_core.plan_json(json.dumps(context)))


def category_means(means: Mapping[str, Any]) -> dict:
    """Category and weighted scores from per-criterion means.

    Values are decimal strings (or numbers, converted through str) so the
    arithmetic stays exact.
    """
    return json.loads(_core.category_means_json({k: str(v) for k, v in means.items()}))


def category_scores(card: Mapping[str, Any]) -> dict:
    return json.loads(_core.category_scores_json(json.dumps(card)))


def correlate(human: Iterable[Mapping[str, Any]], model: Iterable[Mapping[str, Any]]) -> dict:
    return json.loads(_core.correlate_json(json.dumps(list(human)), json.dumps(list(model))))


def select_index(verdicts: Sequence[Mapping[str, Any]], scoring: str = "full") -> Optional[int]:
    """Gate, then argmax of the combined score; ties go to the lowest index."""
    return _core.select_index_json(json.dumps(list(verdicts)), scoring)


def run_fixture(fixture: str | os.PathLike, job_dir: str | os.PathLike,
                config: Optional[Mapping[str, Any]] = None) -> dict:
    """Runs the whole pipeline on mock backends and returns the job status."""
    cfg = json.dumps(config) if config is not None else ""
    return json.loads(_core.run_fixture_json(os.fspath(fixture), os.fspath(job_dir), cfg))
