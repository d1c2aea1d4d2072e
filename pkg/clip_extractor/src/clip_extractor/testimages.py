"""Tiny drawn images for smoke probes and tests (no external assets)."""

from __future__ import annotations

from PIL import Image, ImageDraw

from .embedder import _COLOR_ANCHORS

SIZE = (64, 48)


def _rgb(color: str) -> tuple[int, int, int]:
    r, g, b = _COLOR_ANCHORS[color]
    return int(r * 255), int(g * 255), int(b * 255)


def solid(color: str = "gray") -> Image.Image:
    return Image.new("RGB", SIZE, _rgb(color))


def shape_photo(color: str, shape: str = "square") -> Image.Image:
    """A colored shape on a white background, with a little clutter."""
    img = Image.new("RGB", SIZE, _rgb("white"))
    draw = ImageDraw.Draw(img)
    w, h = SIZE
    box = (w // 4, h // 4, 3 * w // 4, 3 * h // 4)
    if shape == "circle":
        draw.ellipse(box, fill=_rgb(color), outline=_rgb("black"))
    elif shape == "triangle":
        draw.polygon([(w // 2, h // 4), (w // 4, 3 * h // 4), (3 * w // 4, 3 * h // 4)],
                     fill=_rgb(color), outline=_rgb("black"))
    else:
        draw.rectangle(box, fill=_rgb(color), outline=_rgb("black"))
    draw.line([(2, h - 4), (w - 2, h - 4)], fill=_rgb("black"))
    return img


PROBE_LANDMARKS = [
    ("a red square", shape_photo("red", "square")),
    ("a blue circle", shape_photo("blue", "circle")),
    ("a green triangle", shape_photo("green", "triangle")),
    ("a yellow square", shape_photo("yellow", "square")),
    ("an orange circle", shape_photo("orange", "circle")),
    ("a purple triangle", shape_photo("purple", "triangle")),
    ("a pink square", shape_photo("pink", "square")),
    ("a brown circle", shape_photo("brown", "circle")),
    ("a black triangle", shape_photo("black", "triangle")),
    ("a red circle", shape_photo("red", "circle")),
]
