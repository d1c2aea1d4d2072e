"""Agent state machine: five actions and two selectable transition functions.

``step_original`` reproduces the legacy behavior where the agent's heading
always snaps to an outgoing edge (including an automatic rotation after
moving forward). ``step_modified`` removes the auto-rotation: the heading is
free, and turning selects among the edges inside the in-front window.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .angles import normalize_heading, signed_delta
from .graph import Edge, NavGraph, NodeId

# Half-angle of the in-front window for the modified transitions. An edge is
# "in front" when its |signed delta| is strictly below this. The comparison
# must be strict: boundary edges at exactly +/-90 deg would otherwise shift
# the forward-median at the canonical intersection fixtures.
IN_FRONT_HALF_ANGLE_DEG = 90.0

HEADING_MATCH_TOLERANCE_DEG = 1e-9


class TransitionError(RuntimeError):
    """Invariant breach inside a transition (not a navigation dead end)."""


class Action(enum.Enum):
    FORWARD = "forward"
    LEFT = "left"
    RIGHT = "right"
    TURN_AROUND = "turn_around"
    STOP = "stop"

    @property
    def literal(self) -> str:
        return self.value

    @classmethod
    def from_literal(cls, text: str) -> "Action":
        for a in cls:
            if a.value == text:
                return a
        raise ValueError(f"unknown action literal {text!r}")


ACTIONS = tuple(Action)


class StepNote(enum.Enum):
    OK = "ok"
    NOOP_NO_TURN_TARGET = "noop_no_turn_target"
    NOOP_DEAD_END = "noop_dead_end"


@dataclass(frozen=True)
class AgentState:
    node: NodeId
    heading_deg: float

    def __post_init__(self):
        object.__setattr__(self, "heading_deg", normalize_heading(self.heading_deg))


@dataclass(frozen=True)
class StepOutcome:
    next_state: AgentState
    done: bool
    note: StepNote = StepNote.OK


def in_front_edges(g: NavGraph, s: AgentState,
                   half_angle_deg: float = IN_FRONT_HALF_ANGLE_DEG) -> list[tuple[float, Edge]]:
    """Outgoing edges within the in-front window, sorted by signed delta."""
    pairs = [(signed_delta(s.heading_deg, e.heading_deg), e) for e in g.edges_from(s.node)]
    front = [(d, e) for d, e in pairs if abs(d) < half_angle_deg]
    front.sort(key=lambda de: (de[0], de[1].heading_deg, de[1].to))
    return front


def _forward_choice(front: list[tuple[float, Edge]]) -> Edge:
    """Middle edge of the in-front set; even sizes prefer the central edge
    with the smaller absolute delta (ties break toward the smaller delta)."""
    n = len(front)
    if n % 2 == 1:
        return front[n // 2][1]
    lo, hi = front[n // 2 - 1], front[n // 2]
    return lo[1] if abs(lo[0]) <= abs(hi[0]) else hi[1]


def step_modified(g: NavGraph, s: AgentState, a: Action,
                  half_angle_deg: float = IN_FRONT_HALF_ANGLE_DEG) -> StepOutcome:
    """Transition without heading snap; turns pick within the in-front window."""
    if a is Action.STOP:
        return StepOutcome(s, done=True)
    if a is Action.TURN_AROUND:
        return StepOutcome(AgentState(s.node, s.heading_deg - 180.0), done=False)

    front = in_front_edges(g, s, half_angle_deg)
    if a is Action.FORWARD:
        if not front:
            return StepOutcome(s, done=False, note=StepNote.NOOP_DEAD_END)
        edge = _forward_choice(front)
        return StepOutcome(AgentState(edge.to, edge.heading_deg), done=False)

    if a in (Action.LEFT, Action.RIGHT):
        if not front:
            return StepOutcome(s, done=False, note=StepNote.NOOP_NO_TURN_TARGET)
        delta, edge = front[0] if a is Action.LEFT else front[-1]
        if len(front) == 1 and abs(signed_delta(s.heading_deg, edge.heading_deg)) <= HEADING_MATCH_TOLERANCE_DEG:
            # A lone straight-ahead edge offers nothing to turn to; reversing
            # is TURN_AROUND's job.
            return StepOutcome(s, done=False, note=StepNote.NOOP_NO_TURN_TARGET)
        return StepOutcome(AgentState(s.node, edge.heading_deg), done=False)

    raise TransitionError(f"unhandled action {a!r}")


def _snap_nearest(edges: tuple[Edge, ...], reference_deg: float) -> Edge:
    """Edge whose heading is angularly nearest to the reference.

    Ties break toward the positive (clockwise) delta.
    """
    best = None
    best_key = None
    for e in edges:
        d = signed_delta(reference_deg, e.heading_deg)
        key = (abs(d), 0 if d >= 0 else 1)
        if best_key is None or key < best_key:
            best, best_key = e, key
    assert best is not None
    return best


def step_original(g: NavGraph, s: AgentState, a: Action) -> StepOutcome:
    """Legacy snap-to-edge transition.

    The heading is assumed to equal an outgoing edge heading. Turning rotates
    to the strictly next edge clockwise (RIGHT) or counter-clockwise (LEFT);
    forward traverses the aligned edge and then auto-rotates toward the
    outgoing edge of the new node nearest to the previous heading.
    """
    if a is Action.STOP:
        return StepOutcome(s, done=True)

    edges = g.edges_from(s.node)
    if a is Action.FORWARD:
        matching = [e for e in edges
                    if abs(signed_delta(s.heading_deg, e.heading_deg)) <= HEADING_MATCH_TOLERANCE_DEG]
        if not matching:
            raise TransitionError(
                f"forward at {s.node!r}: heading {s.heading_deg:g} matches no outgoing edge")
        dest = matching[0].to
        arrival = g.edges_from(dest)
        if arrival:
            snapped = _snap_nearest(arrival, matching[0].heading_deg)
            return StepOutcome(AgentState(dest, snapped.heading_deg), done=False)
        return StepOutcome(AgentState(dest, matching[0].heading_deg), done=False,
                           note=StepNote.NOOP_DEAD_END)

    if a in (Action.LEFT, Action.RIGHT):
        best = None
        best_cw = None
        for e in edges:
            cw = normalize_heading(e.heading_deg - s.heading_deg) if a is Action.RIGHT \
                else normalize_heading(s.heading_deg - e.heading_deg)
            if cw <= HEADING_MATCH_TOLERANCE_DEG:
                continue
            if best_cw is None or cw < best_cw:
                best, best_cw = e, cw
        if best is None:
            return StepOutcome(s, done=False, note=StepNote.NOOP_NO_TURN_TARGET)
        return StepOutcome(AgentState(s.node, best.heading_deg), done=False)

    if a is Action.TURN_AROUND:
        # Not part of the legacy action set; exposed here as snap-to-reverse
        # so both semantics accept the same actions in comparisons.
        if not edges:
            return StepOutcome(s, done=False, note=StepNote.NOOP_NO_TURN_TARGET)
        snapped = _snap_nearest(edges, s.heading_deg - 180.0)
        if abs(signed_delta(s.heading_deg, snapped.heading_deg)) <= HEADING_MATCH_TOLERANCE_DEG:
            return StepOutcome(s, done=False, note=StepNote.NOOP_NO_TURN_TARGET)
        return StepOutcome(AgentState(s.node, snapped.heading_deg), done=False)

    raise TransitionError(f"unhandled action {a!r}")


class Semantics(enum.Enum):
    ORIGINAL = "original"
    MODIFIED = "modified"

    @property
    def step(self):
        return step_original if self is Semantics.ORIGINAL else step_modified


def get_step_fn(name: str):
    return Semantics(name).step
