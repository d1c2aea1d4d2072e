"""Circular-angle helpers shared by the graph and environment code.

All headings are degrees in [0, 360). Deltas are signed degrees in
[-180, 180), negative meaning counter-clockwise (to the left).
"""

from __future__ import annotations


def normalize_heading(deg: float) -> float:
    """Map any angle to [0, 360)."""
    h = float(deg) % 360.0
    # Rounding can push tiny negatives to exactly 360.0.
    return h if h < 360.0 else 0.0


def signed_delta(from_deg: float, to_deg: float) -> float:
    """Shortest signed rotation from one heading to another, in [-180, 180)."""
    return ((float(to_deg) - float(from_deg) + 180.0) % 360.0) - 180.0
