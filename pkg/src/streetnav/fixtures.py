"""Canonical 3/4/5-way intersection fixtures and their regression table.

Each fixture is a star intersection at ``v3`` approached along
``v1 -> v2 -> v3``. The nine table rows give, per route through the
intersection, the action sequence required under both transition semantics.
Geometries were hand-derived so that every row replays exactly; they double
as the primary regression suite for the environment.
"""

from __future__ import annotations

from dataclasses import dataclass

from .angles import normalize_heading
from .env import Action, AgentState, Semantics
from .graph import NavGraph, NodeId, build_graph

F, L, R, TA = Action.FORWARD, Action.LEFT, Action.RIGHT, Action.TURN_AROUND


def _star(approach_deg: float, branch_headings: dict[NodeId, float]) -> NavGraph:
    """Chain v1->v2->v3 at the approach heading plus one branch per entry."""
    nodes = ["v1", "v2", "v3"] + sorted(branch_headings)
    edges = [
        ("v1", "v2", approach_deg),
        ("v2", "v1", approach_deg + 180.0),
        ("v2", "v3", approach_deg),
        ("v3", "v2", approach_deg + 180.0),
    ]
    for node, heading in branch_headings.items():
        edges.append(("v3", node, heading))
        edges.append((node, "v3", heading + 180.0))
    edges = [(a, b, normalize_heading(h)) for a, b, h in edges]
    return build_graph(nodes, edges, lint=False)


def three_way() -> NavGraph:
    return _star(0.0, {"v4": 315.0, "v5": 40.0})


def four_way() -> NavGraph:
    return _star(20.0, {"v4": 320.0, "v5": 345.0, "v6": 50.0})


def five_way() -> NavGraph:
    return _star(20.0, {"v4": 285.0, "v5": 345.0, "v6": 50.0, "v7": 115.0})


APPROACH_HEADINGS = {"3-way": 0.0, "4-way": 20.0, "5-way": 20.0}

FIXTURE_BUILDERS = {"3-way": three_way, "4-way": four_way, "5-way": five_way}


@dataclass(frozen=True)
class ComparisonRow:
    fixture: str
    path: tuple[NodeId, ...]
    original: tuple[Action, ...]
    modified: tuple[Action, ...]


COMPARISON_TABLE: tuple[ComparisonRow, ...] = (
    ComparisonRow("3-way", ("v2", "v3", "v4"), (F, L, F), (F, L, F)),
    ComparisonRow("3-way", ("v2", "v3", "v5"), (F, F), (F, R, F)),
    ComparisonRow("4-way", ("v2", "v3", "v4"), (F, L, L, F), (F, L, F)),
    ComparisonRow("4-way", ("v2", "v3", "v5"), (F, L, F), (F, F)),
    ComparisonRow("4-way", ("v2", "v3", "v6"), (F, F), (F, R, F)),
    ComparisonRow("5-way", ("v2", "v3", "v4"), (F, L, L, F), (F, L, L, F)),
    ComparisonRow("5-way", ("v2", "v3", "v5"), (F, L, F), (F, L, F)),
    ComparisonRow("5-way", ("v2", "v3", "v6"), (F, F), (F, R, F)),
    ComparisonRow("5-way", ("v2", "v3", "v7"), (F, R, F), (F, R, R, F)),
)


def start_state(fixture: str) -> AgentState:
    return AgentState("v2", APPROACH_HEADINGS[fixture])


def replay(g: NavGraph, state: AgentState, actions, semantics: Semantics) -> list[NodeId]:
    """Apply actions and return the node sequence visited (incl. the start)."""
    step = semantics.step
    visited = [state.node]
    for a in actions:
        out = step(g, state, a)
        state = out.next_state
        if state.node != visited[-1]:
            visited.append(state.node)
        if out.done:
            break
    return visited


@dataclass(frozen=True)
class RowResult:
    row: ComparisonRow
    semantics: Semantics
    expected_path: tuple[NodeId, ...]
    visited: tuple[NodeId, ...]

    @property
    def ok(self) -> bool:
        return self.visited == self.expected_path


def check_comparison_table(table=COMPARISON_TABLE, builders=None) -> list[RowResult]:
    """Replay every table row under both semantics; used by ``env-check``."""
    builders = builders or FIXTURE_BUILDERS
    results = []
    for row in table:
        g = builders[row.fixture]()
        for semantics, actions in ((Semantics.ORIGINAL, row.original),
                                   (Semantics.MODIFIED, row.modified)):
            visited = replay(g, start_state(row.fixture), actions, semantics)
            results.append(RowResult(row, semantics, row.path, tuple(visited)))
    return results
