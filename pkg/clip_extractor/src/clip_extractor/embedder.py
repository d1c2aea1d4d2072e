"""Pluggable image/text embedding backends.

The scoring pipeline only needs two callables (embed_image, embed_text) and
cosine similarity, so any contrastive image-text checkpoint can be slotted
in. The built-in backend is a deterministic desk-scale stand-in: images are
described by a soft histogram over named colors plus an edge-density
channel, texts by the color words they mention plus an object-word flag.
It is no vision model, but it is an honest similarity: a photo of "a red
square" really does land nearer that caption than a gray rectangle does.
"""

from __future__ import annotations

import re

import numpy as np
from PIL import Image

TOY_MODEL_ID = "toy-color-v1"

# Named color anchors, RGB in [0, 1].
_COLOR_ANCHORS = {
    "black": (0.05, 0.05, 0.05),
    "white": (0.97, 0.97, 0.97),
    "gray": (0.5, 0.5, 0.5),
    "red": (0.85, 0.1, 0.1),
    "green": (0.1, 0.7, 0.15),
    "blue": (0.1, 0.2, 0.85),
    "yellow": (0.95, 0.9, 0.1),
    "orange": (0.95, 0.55, 0.1),
    "purple": (0.55, 0.15, 0.7),
    "brown": (0.45, 0.3, 0.15),
    "pink": (0.95, 0.6, 0.75),
}
_COLOR_NAMES = tuple(_COLOR_ANCHORS)

_WORD_RE = re.compile(r"[a-z]+")


class ToyColorTextEmbedder:
    """Shared 12-d space: 11 named-color channels + one busyness channel."""

    model_id = TOY_MODEL_ID

    def embed_image(self, image: Image.Image) -> np.ndarray:
        rgb = np.asarray(image.convert("RGB"), dtype=np.float64) / 255.0
        if rgb.size == 0:
            raise ValueError("empty image")
        pixels = rgb.reshape(-1, 3)
        anchors = np.array([_COLOR_ANCHORS[c] for c in _COLOR_NAMES])
        # Soft assignment of every pixel to its nearest color anchors.
        d2 = ((pixels[:, None, :] - anchors[None, :, :]) ** 2).sum(axis=2)
        weights = np.exp(-d2 / 0.02)
        weights /= weights.sum(axis=1, keepdims=True)
        hist = weights.mean(axis=0)

        gray = rgb.mean(axis=2)
        edges = np.abs(np.diff(gray, axis=0)).mean() + np.abs(np.diff(gray, axis=1)).mean()
        busy = min(1.0, float(edges) * 20.0)
        vec = np.concatenate([hist, [busy]])
        return vec / np.linalg.norm(vec)

    def embed_text(self, text: str) -> np.ndarray:
        words = _WORD_RE.findall(text.lower())
        hist = np.zeros(len(_COLOR_NAMES))
        non_color_nouns = 0
        skip = {"picture", "of", "a", "an", "the", "and", "on", "with"}
        for w in words:
            if w in _COLOR_ANCHORS:
                hist[_COLOR_NAMES.index(w)] += 1.0
            elif w not in skip:
                non_color_nouns += 1
        busy = 1.0 if non_color_nouns else 0.0
        vec = np.concatenate([hist, [busy]])
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            # Caption with no recognized words: a neutral direction.
            vec = np.ones(len(vec))
            norm = np.linalg.norm(vec)
        return vec / norm


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a, b))


def load_embedder(model_id: str):
    """Resolve a model id to an embedder instance.

    ``toy-color-v1`` is built in; ``open-clip:<checkpoint>`` binds a real
    contrastive model when the open_clip package is installed.
    """
    if model_id == TOY_MODEL_ID:
        return ToyColorTextEmbedder()
    if model_id.startswith("open-clip:"):
        try:
            from .openclip_backend import OpenClipEmbedder
        except ImportError as exc:
            raise ValueError(
                f"model {model_id!r} needs the open_clip_torch package: {exc}") from exc
        return OpenClipEmbedder(model_id.partition(":")[2])
    raise ValueError(f"unknown model id {model_id!r}")
