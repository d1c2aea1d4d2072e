"""Landmark pipeline: extraction prompts, response parsing, and the
standardized-score visibility classifier.

Raw image-text similarity scores are biased per landmark, so visibility is
decided on scores standardized against a per-landmark training distribution:
``z = (raw - mu) / sigma``, visible when ``z > tau``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import IO, Iterable

from .graph import NodeId

DEFAULT_TAU = 3.5

VIEW_OFFSETS_DEG = (-90, -45, 0, 45, 90)

DIRECTION_LITERALS = {
    -90: "left",
    -45: "slightly left",
    0: "ahead",
    45: "slightly right",
    90: "right",
}

DATASET_STYLES = ("touchdown", "map2seq")

_ITEM_RE = re.compile(r"^\s*\d+\.\s*(.*\S)\s*$")


class ExtractionParseError(ValueError):
    """Extractor response had no recognizable landmark list."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


class ScoreTableError(ValueError):
    """Malformed score-table file or degenerate statistics."""


@dataclass(frozen=True)
class LandmarkSet:
    landmarks: tuple[str, ...]

    def __post_init__(self):
        for lm in self.landmarks:
            if not lm:
                raise ValueError("empty landmark string")

    def __iter__(self):
        return iter(self.landmarks)

    def __len__(self):
        return len(self.landmarks)


def build_extraction_prompt(instructions: str, dataset_style: str) -> str:
    """Fill the five-shot extraction template with one instance's instructions.

    The result ends with the instructions, a newline and the bare
    ``Landmarks:`` marker awaiting the model's list.
    """
    if not instructions or not instructions.strip():
        raise ValueError("instructions must be non-empty")
    if dataset_style not in DATASET_STYLES:
        raise ValueError(f"unknown dataset style {dataset_style!r}; expected one of {DATASET_STYLES}")
    template = resources.files("streetnav.data").joinpath(
        f"extraction_prompt_{dataset_style}.txt").read_text(encoding="utf-8")
    return template.replace("{instructions}", instructions.strip()).rstrip("\n")


def parse_extraction_response(resp: str) -> LandmarkSet:
    """Parse a numbered landmark list; a lone ``None`` means no landmarks.

    Collection stops at the first blank (or otherwise non-matching) line
    after the list has started.
    """
    lines = resp.splitlines()
    idx = 0
    while idx < len(lines) and not lines[idx].strip():
        idx += 1
    if idx < len(lines) and lines[idx].strip() == "None":
        return LandmarkSet(())
    items = []
    for line in lines[idx:]:
        m = _ITEM_RE.match(line)
        if not m:
            break
        items.append(m.group(1))
    if not items:
        raise ExtractionParseError("no landmark list found in response", resp)
    return LandmarkSet(tuple(items))


@dataclass(frozen=True)
class Sighting:
    landmark: str
    direction_literal: str
    z: float


@dataclass
class ScoreTable:
    """Per-landmark training stats plus raw per-view similarity scores.

    ``raw`` is keyed by (landmark, node, view offset); a missing key means
    the landmark was not scored there and counts as not visible.
    """

    stats: dict[str, tuple[float, float]] = field(default_factory=dict)
    raw: dict[tuple[str, NodeId, int], float] = field(default_factory=dict)

    def add_stats(self, landmark: str, mu: float, sigma: float) -> None:
        if sigma <= 0:
            raise ScoreTableError(
                f"landmark {landmark!r}: sigma must be strictly positive, got {sigma:g}")
        self.stats[landmark] = (float(mu), float(sigma))

    def add_raw(self, landmark: str, node: NodeId, offset_deg: int, score: float) -> None:
        offset = int(offset_deg)
        if offset not in VIEW_OFFSETS_DEG:
            raise ScoreTableError(
                f"landmark {landmark!r} at node {node!r}: offset {offset_deg!r} "
                f"is not one of {VIEW_OFFSETS_DEG}")
        self.raw[(landmark, node, offset)] = float(score)

    def has_stats(self, landmark: str) -> bool:
        return landmark in self.stats


def z_score(table: ScoreTable, landmark: str, node: NodeId, offset_deg: int) -> float | None:
    """Standardized score for one view, or None when no raw score exists."""
    if landmark not in table.stats:
        raise ScoreTableError(f"no statistics for landmark {landmark!r}")
    raw = table.raw.get((landmark, node, int(offset_deg)))
    if raw is None:
        return None
    mu, sigma = table.stats[landmark]
    return (raw - mu) / sigma


def visible_sightings(table: ScoreTable, lms: LandmarkSet | Iterable[str],
                      state, tau: float = DEFAULT_TAU) -> list[Sighting]:
    """One sighting per landmark whose best view clears the threshold.

    The five view offsets are evaluated relative to the current heading; the
    maximal-z view wins, ties preferring the offset closest to straight ahead
    and then the negative (left) side. Landmarks without table statistics are
    treated as never visible, which keeps sparse desk-scale tables usable.
    """
    sightings = []
    for lm in lms:
        if not table.has_stats(lm):
            continue
        best = None
        best_key = None
        for offset in VIEW_OFFSETS_DEG:
            z = z_score(table, lm, state.node, offset)
            if z is None or z <= tau:
                continue
            key = (-z, abs(offset), offset)
            if best_key is None or key < best_key:
                best, best_key = (offset, z), key
        if best is not None:
            offset, z = best
            sightings.append(Sighting(lm, DIRECTION_LITERALS[offset], z))
    return sightings


def load_stats(path_or_file: str | IO[str], table: ScoreTable | None = None) -> ScoreTable:
    """Read per-landmark stats JSON-lines: {"landmark", "mu", "sigma"}."""
    table = table if table is not None else ScoreTable()
    for lineno, raw in enumerate(_iter_jsonl(path_or_file), start=1):
        try:
            table.add_stats(str(raw["landmark"]), float(raw["mu"]), float(raw["sigma"]))
        except KeyError as exc:
            raise ScoreTableError(f"stats line {lineno}: missing field {exc}") from exc
    return table


def load_raw_scores(path_or_file: str | IO[str], table: ScoreTable | None = None) -> ScoreTable:
    """Read raw view scores JSON-lines: {"landmark", "node", "offset_deg", "score"}."""
    table = table if table is not None else ScoreTable()
    for lineno, raw in enumerate(_iter_jsonl(path_or_file), start=1):
        try:
            table.add_raw(str(raw["landmark"]), str(raw["node"]),
                          int(raw["offset_deg"]), float(raw["score"]))
        except KeyError as exc:
            raise ScoreTableError(f"raw scores line {lineno}: missing field {exc}") from exc
    return table


def store_stats(table: ScoreTable, path_or_file: str | IO[str]) -> None:
    _write_jsonl(path_or_file,
                 ({"landmark": lm, "mu": mu, "sigma": sigma}
                  for lm, (mu, sigma) in sorted(table.stats.items())))


def store_raw_scores(table: ScoreTable, path_or_file: str | IO[str]) -> None:
    _write_jsonl(path_or_file,
                 ({"landmark": lm, "node": node, "offset_deg": offset, "score": score}
                  for (lm, node, offset), score in sorted(table.raw.items())))


def _iter_jsonl(path_or_file: str | IO[str]):
    if hasattr(path_or_file, "read"):
        lines = path_or_file.read().splitlines()
    else:
        with open(path_or_file, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    for line in lines:
        if line.strip():
            yield json.loads(line)


def _write_jsonl(path_or_file: str | IO[str], records) -> None:
    if hasattr(path_or_file, "write"):
        for rec in records:
            path_or_file.write(json.dumps(rec) + "\n")
    else:
        with open(path_or_file, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec) + "\n")
