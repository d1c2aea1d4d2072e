"""Navigation graph model, instance schema, loaders and shortest-path queries.

The world is a directed graph of panorama nodes. Every edge carries the
heading (degrees, [0, 360)) an agent faces while traversing it. Real street
layouts are bidirectional, so the loader lints (but does not reject) edges
without a near-reverse counterpart.
"""

from __future__ import annotations

import json
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

from .angles import normalize_heading, signed_delta

NodeId = str

REVERSE_LINT_TOLERANCE_DEG = 15.0


class GraphError(ValueError):
    """Malformed graph file or violated graph invariant."""


class InstanceError(ValueError):
    """Navigation instance inconsistent with its graph."""


class GraphLintWarning(UserWarning):
    """Non-fatal oddity in a loaded graph (e.g. missing reverse edge)."""


@dataclass(frozen=True)
class Edge:
    to: NodeId
    heading_deg: float


@dataclass(frozen=True)
class NavGraph:
    """Immutable directed graph; safe to share across concurrent episodes."""

    nodes: frozenset[NodeId]
    out_edges: dict[NodeId, tuple[Edge, ...]]

    def edges_from(self, node: NodeId) -> tuple[Edge, ...]:
        return self.out_edges.get(node, ())

    def out_degree(self, node: NodeId) -> int:
        return len(self.edges_from(node))

    def has_edge(self, a: NodeId, b: NodeId) -> bool:
        return any(e.to == b for e in self.edges_from(a))

    def edge_heading(self, a: NodeId, b: NodeId) -> float:
        for e in self.edges_from(a):
            if e.to == b:
                return e.heading_deg
        raise GraphError(f"no edge {a!r} -> {b!r}")

    def undirected_neighbors(self, node: NodeId) -> set[NodeId]:
        nbrs = {e.to for e in self.edges_from(node)}
        for src, edges in self.out_edges.items():
            if any(e.to == node for e in edges):
                nbrs.add(src)
        nbrs.discard(node)
        return nbrs

    def iter_edges(self) -> Iterator[tuple[NodeId, Edge]]:
        for src in sorted(self.out_edges):
            for e in self.out_edges[src]:
                yield src, e


def build_graph(nodes: Iterable[NodeId], edges: Iterable[tuple[NodeId, NodeId, float]],
                check_connected: bool = True, lint: bool = True) -> NavGraph:
    """Validate and assemble a NavGraph from raw node/edge data."""
    node_set = frozenset(str(n) for n in nodes)
    if not node_set:
        raise GraphError("graph has no nodes")
    out: dict[NodeId, list[Edge]] = {n: [] for n in node_set}
    seen: set[tuple[NodeId, NodeId, float]] = set()
    for src, dst, heading in edges:
        src, dst = str(src), str(dst)
        if src not in node_set:
            raise GraphError(f"edge {src!r} -> {dst!r}: unknown source node {src!r}")
        if dst not in node_set:
            raise GraphError(f"edge {src!r} -> {dst!r}: unknown target node {dst!r}")
        h = normalize_heading(heading)
        key = (src, dst, h)
        if key in seen:
            raise GraphError(
                f"duplicate edge {src!r} -> {dst!r} at heading {h:g}")
        seen.add(key)
        out[src].append(Edge(dst, h))
    graph = NavGraph(node_set, {n: tuple(es) for n, es in out.items()})
    if check_connected and not _weakly_connected(graph):
        raise GraphError("graph is not weakly connected")
    if lint:
        _lint_reverse_edges(graph)
    return graph


def _weakly_connected(g: NavGraph) -> bool:
    if not g.nodes:
        return False
    undirected: dict[NodeId, set[NodeId]] = {n: set() for n in g.nodes}
    for src, e in g.iter_edges():
        undirected[src].add(e.to)
        undirected[e.to].add(src)
    start = next(iter(g.nodes))
    seen = {start}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for nxt in undirected[cur]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return len(seen) == len(g.nodes)


def _lint_reverse_edges(g: NavGraph) -> None:
    for src, e in g.iter_edges():
        wanted = normalize_heading(e.heading_deg + 180.0)
        back = [b for b in g.edges_from(e.to) if b.to == src]
        if not any(abs(signed_delta(wanted, b.heading_deg)) <= REVERSE_LINT_TOLERANCE_DEG
                   for b in back):
            warnings.warn(
                f"edge {src!r} -> {e.to!r}@{e.heading_deg:g} has no reverse edge "
                f"within {REVERSE_LINT_TOLERANCE_DEG:g} deg of {wanted:g}",
                GraphLintWarning,
                stacklevel=3,
            )


def load_graph(path_or_file: str | IO[str], check_connected: bool = True,
               lint: bool = True) -> NavGraph:
    """Read a graph from the JSON wire format.

    Format: one JSON document ``{"nodes": ["id", ...],
    "edges": [{"from": ..., "to": ..., "heading_deg": ...}, ...]}``.
    """
    if hasattr(path_or_file, "read"):
        text = path_or_file.read()
        source = "<stream>"
    else:
        source = str(path_or_file)
        with open(path_or_file, "r", encoding="utf-8") as fh:
            text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphError(f"{source}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict) or "nodes" not in doc or "edges" not in doc:
        raise GraphError(f"{source}: expected object with 'nodes' and 'edges'")
    edges = []
    for i, raw in enumerate(doc["edges"]):
        try:
            edges.append((raw["from"], raw["to"], float(raw["heading_deg"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphError(f"{source}: edge #{i}: {exc}") from exc
    return build_graph(doc["nodes"], edges, check_connected=check_connected, lint=lint)


def store_graph(g: NavGraph, path_or_file: str | IO[str]) -> None:
    doc = {
        "nodes": sorted(g.nodes),
        "edges": [{"from": src, "to": e.to, "heading_deg": e.heading_deg}
                  for src, e in g.iter_edges()],
    }
    if hasattr(path_or_file, "write"):
        json.dump(doc, path_or_file, indent=2)
        path_or_file.write("\n")
    else:
        with open(path_or_file, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")


@dataclass
class NavInstance:
    """One navigation task: start state, gold route, target and instructions."""

    id: str
    start_node: NodeId
    start_heading_deg: float
    target_node: NodeId
    gold_path: list[NodeId]
    instructions: str
    landmarks: list[str] | None = None

    def validate(self, g: NavGraph) -> None:
        if self.start_node not in g.nodes:
            raise InstanceError(f"{self.id}: unknown start node {self.start_node!r}")
        if self.target_node not in g.nodes:
            raise InstanceError(f"{self.id}: unknown target node {self.target_node!r}")
        if not self.gold_path:
            raise InstanceError(f"{self.id}: empty gold path")
        if self.gold_path[0] != self.start_node:
            raise InstanceError(
                f"{self.id}: gold path starts at {self.gold_path[0]!r}, "
                f"not the start node {self.start_node!r}")
        if self.gold_path[-1] != self.target_node:
            raise InstanceError(
                f"{self.id}: gold path ends at {self.gold_path[-1]!r}, "
                f"not the target node {self.target_node!r}")
        for a, b in zip(self.gold_path, self.gold_path[1:]):
            if not g.has_edge(a, b):
                raise InstanceError(f"{self.id}: gold path uses missing edge {a!r} -> {b!r}")


def load_instances(path_or_file: str | IO[str], g: NavGraph | None = None) -> list[NavInstance]:
    """Read instances from JSON-lines; validates against the graph if given."""
    if hasattr(path_or_file, "read"):
        lines = path_or_file.read().splitlines()
        source = "<stream>"
    else:
        source = str(path_or_file)
        with open(path_or_file, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    out = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            inst = NavInstance(
                id=str(raw["id"]),
                start_node=str(raw["start_node"]),
                start_heading_deg=normalize_heading(float(raw["start_heading_deg"])),
                target_node=str(raw["target_node"]),
                gold_path=[str(n) for n in raw["gold_path"]],
                instructions=str(raw["instructions"]),
                landmarks=[str(s) for s in raw["landmarks"]] if raw.get("landmarks") is not None else None,
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise InstanceError(f"{source}: line {lineno}: {exc}") from exc
        if g is not None:
            inst.validate(g)
        out.append(inst)
    return out


def store_instances(instances: Iterable[NavInstance], path_or_file: str | IO[str]) -> None:
    def dump(fh: IO[str]) -> None:
        for inst in instances:
            rec = {
                "id": inst.id,
                "start_node": inst.start_node,
                "start_heading_deg": inst.start_heading_deg,
                "target_node": inst.target_node,
                "gold_path": inst.gold_path,
                "instructions": inst.instructions,
            }
            if inst.landmarks is not None:
                rec["landmarks"] = inst.landmarks
            fh.write(json.dumps(rec) + "\n")

    if hasattr(path_or_file, "write"):
        dump(path_or_file)
    else:
        with open(path_or_file, "w", encoding="utf-8") as fh:
            dump(fh)


def shortest_path_len(g: NavGraph, a: NodeId, b: NodeId) -> int:
    """Number of edges on a shortest undirected path between two nodes."""
    if a not in g.nodes:
        raise GraphError(f"unknown node {a!r}")
    if b not in g.nodes:
        raise GraphError(f"unknown node {b!r}")
    if a == b:
        return 0
    undirected: dict[NodeId, set[NodeId]] = {n: set() for n in g.nodes}
    for src, e in g.iter_edges():
        undirected[src].add(e.to)
        undirected[e.to].add(src)
    dist = {a: 0}
    queue = deque([a])
    while queue:
        cur = queue.popleft()
        for nxt in undirected[cur]:
            if nxt not in dist:
                dist[nxt] = dist[cur] + 1
                if nxt == b:
                    return dist[nxt]
                queue.append(nxt)
    raise GraphError(f"nodes {a!r} and {b!r} are not connected")


@dataclass(frozen=True)
class GoldActionSequence:
    """Actions that replay the gold path under the modified transitions.

    Always ends in STOP; ``node_for_step[i]`` is the node the agent stands on
    when emitting ``actions[i]``.
    """

    actions: tuple

    node_for_step: tuple[NodeId, ...] = field(default=(), compare=False)

    def __len__(self) -> int:
        return len(self.actions)


def derive_gold_actions(g: NavGraph, inst: NavInstance):
    """Turn a gold node path into the action sequence realizing it.

    Datasets ship node paths; training needs actions. At each node a shortest
    prefix of turn actions is searched (breadth-first over reachable headings)
    such that FORWARD then traverses the wanted edge under the modified
    transition function.
    """
    from .env import Action, AgentState, step_modified

    inst.validate(g)
    state = AgentState(inst.start_node, inst.start_heading_deg)
    actions: list[Action] = []
    nodes_at: list[NodeId] = []
    turn_actions = (Action.LEFT, Action.RIGHT, Action.TURN_AROUND)
    for nxt in inst.gold_path[1:]:
        plan = _turn_plan(g, state, nxt, turn_actions)
        if plan is None:
            raise InstanceError(
                f"{inst.id}: no modified-environment action sequence reaches "
                f"{nxt!r} from node {state.node!r} (heading {state.heading_deg:g})")
        for act in plan:
            nodes_at.append(state.node)
            actions.append(act)
            out = step_modified(g, state, act)
            state = out.next_state
        if state.node != nxt:
            raise InstanceError(
                f"{inst.id}: derived actions left the gold path at node {state.node!r}")
    nodes_at.append(state.node)
    actions.append(Action.STOP)
    return GoldActionSequence(tuple(actions), tuple(nodes_at))


def _turn_plan(g: NavGraph, state, target: NodeId, turn_actions):
    """Shortest turn prefix after which FORWARD moves to ``target``.

    Returns the full plan including the final FORWARD, or None when no
    reachable heading makes FORWARD take the wanted edge.
    """
    from .env import Action, step_modified

    queue = deque([(state, ())])
    seen = {round(state.heading_deg, 9)}
    while queue:
        cur, plan = queue.popleft()
        fwd = step_modified(g, cur, Action.FORWARD)
        if fwd.next_state.node == target:
            return list(plan) + [Action.FORWARD]
        for act in turn_actions:
            out = step_modified(g, cur, act)
            key = round(out.next_state.heading_deg, 9)
            if key not in seen:
                seen.add(key)
                queue.append((out.next_state, plan + (act,)))
    return None
