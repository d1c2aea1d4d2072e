"""Score landmarks against panorama views and derive training statistics.

Outputs use the navigation toolkit's score-table file formats, bit for bit:
raw scores are JSON-lines ``{"landmark", "node", "offset_deg", "score"}``
and statistics are ``{"landmark", "mu", "sigma"}`` with the population
standard deviation (with training sets of ~100k views the sample/population
distinction is noise, but it is pinned here for reproducibility).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .embedder import cosine_similarity, load_embedder

VIEW_OFFSETS_DEG = (-90, -45, 0, 45, 90)

TEXT_TEMPLATE = "picture of {landmark}"


class ScoringError(ValueError):
    pass


class SkippedViewWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ViewSpec:
    node: str
    offset_deg: int
    image: str

    def __post_init__(self):
        if int(self.offset_deg) not in VIEW_OFFSETS_DEG:
            raise ScoringError(
                f"view at node {self.node!r}: offset {self.offset_deg!r} "
                f"is not one of {VIEW_OFFSETS_DEG}")


@dataclass(frozen=True)
class RawScore:
    landmark: str
    node: str
    offset_deg: int
    score: float


@dataclass(frozen=True)
class SkippedView:
    view: ViewSpec
    error: str


def load_landmarks(path_or_file: str | IO[str]) -> list[str]:
    """Landmark list: plain text, one landmark per line."""
    if hasattr(path_or_file, "read"):
        lines = path_or_file.read().splitlines()
    else:
        with open(path_or_file, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    landmarks = [line.strip() for line in lines if line.strip()]
    if not landmarks:
        raise ScoringError("no landmarks in input")
    return landmarks


def load_views_manifest(path_or_file: str | IO[str]) -> list[ViewSpec]:
    """Views manifest: JSON-lines of {"node", "offset_deg", "image"}."""
    if hasattr(path_or_file, "read"):
        lines = path_or_file.read().splitlines()
    else:
        with open(path_or_file, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    views = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            views.append(ViewSpec(str(raw["node"]), int(raw["offset_deg"]),
                                  str(raw["image"])))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ScoringError(f"views manifest line {lineno}: {exc}") from exc
    return views


def score_views(landmarks: Sequence[str], views: Sequence[ViewSpec],
                model_id: str) -> tuple[list[RawScore], list[SkippedView]]:
    """One similarity score per (landmark, decodable view).

    Undecodable images are skipped with a warning and reported in the
    returned skip manifest rather than failing the batch.
    """
    embedder = load_embedder(model_id)
    text_vecs = {lm: embedder.embed_text(TEXT_TEMPLATE.format(landmark=lm))
                 for lm in landmarks}
    scores: list[RawScore] = []
    skipped: list[SkippedView] = []
    for view in views:
        try:
            with Image.open(view.image) as img:
                image_vec = embedder.embed_image(img)
        except (FileNotFoundError, UnidentifiedImageError, OSError, ValueError) as exc:
            warnings.warn(f"skipping undecodable view image {view.image!r}: {exc}",
                          SkippedViewWarning, stacklevel=2)
            skipped.append(SkippedView(view, str(exc)))
            continue
        for lm in landmarks:
            scores.append(RawScore(lm, view.node, view.offset_deg,
                                   cosine_similarity(text_vecs[lm], image_vec)))
    return scores, skipped


def compute_stats(scores: Iterable[RawScore]) -> dict[str, tuple[float, float]]:
    """Per-landmark mean and population standard deviation.

    Landmarks with fewer than two scores or a degenerate (zero-spread)
    distribution are rejected by name.
    """
    by_landmark: dict[str, list[float]] = {}
    for s in scores:
        by_landmark.setdefault(s.landmark, []).append(s.score)
    stats = {}
    for lm, values in sorted(by_landmark.items()):
        if len(values) < 2:
            raise ScoringError(
                f"landmark {lm!r} has {len(values)} score(s); need at least 2")
        mu = float(np.mean(values))
        sigma = float(np.std(values))
        if sigma == 0.0:
            raise ScoringError(f"landmark {lm!r} has zero score spread")
        stats[lm] = (mu, sigma)
    return stats


def standardize(scores: Iterable[RawScore],
                stats: dict[str, tuple[float, float]]) -> list[tuple[RawScore, float]]:
    out = []
    for s in scores:
        if s.landmark not in stats:
            raise ScoringError(f"no statistics for landmark {s.landmark!r}")
        mu, sigma = stats[s.landmark]
        out.append((s, (s.score - mu) / sigma))
    return out


def store_raw_scores(scores: Iterable[RawScore], path_or_file: str | IO[str]) -> None:
    _write_jsonl(path_or_file,
                 ({"landmark": s.landmark, "node": s.node, "offset_deg": s.offset_deg,
                   "score": s.score}
                  for s in sorted(scores, key=lambda s: (s.landmark, s.node, s.offset_deg))))


def load_raw_scores(path_or_file: str | IO[str]) -> list[RawScore]:
    if hasattr(path_or_file, "read"):
        lines = path_or_file.read().splitlines()
    else:
        with open(path_or_file, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    return [RawScore(str(r["landmark"]), str(r["node"]), int(r["offset_deg"]),
                     float(r["score"]))
            for r in map(json.loads, (l for l in lines if l.strip()))]


def store_stats(stats: dict[str, tuple[float, float]],
                path_or_file: str | IO[str]) -> None:
    _write_jsonl(path_or_file,
                 ({"landmark": lm, "mu": mu, "sigma": sigma}
                  for lm, (mu, sigma) in sorted(stats.items())))


def store_skip_manifest(skipped: Iterable[SkippedView],
                        path_or_file: str | IO[str]) -> None:
    _write_jsonl(path_or_file,
                 ({"image": s.view.image, "node": s.view.node,
                   "offset_deg": s.view.offset_deg, "error": s.error}
                  for s in skipped))


def _write_jsonl(path_or_file, records) -> None:
    if hasattr(path_or_file, "write"):
        for rec in records:
            path_or_file.write(json.dumps(rec) + "\n")
    else:
        with open(path_or_file, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec) + "\n")
