"""Deterministic synthetic street worlds for desk-scale experiments.

Graphs are grown as street chains: a spine plus side streets branching at
30-85 degrees, every edge paired with its reverse. Instances are simple
routes along those streets; their instructions are template text mentioning
the turns and planted landmark names, and ``build_score_table`` fabricates
the similarity scores that make those landmarks visible where the route
needs them:

* each turned intersection shows its marker landmark at the +/-45 view on
  the turning side while the agent is at that node;
* the stop landmark is visible straight ahead from two nodes before the
  target (it comes into view early) and from the target itself, and off to
  the side one node past the target ("you have gone too far");
* everything else is sub-threshold decoy noise.

The stop geometry makes exact gold imitation a poor way to learn stopping:
seen from the agent, the early sighting and the at-target sighting are the
same observation, once labeled go-on and once labeled stop. Walking past,
turning around and stopping on the return visit resolves it, and that
behavior is only ever taught by rollouts with stepwise-oracle corrections.

A desk-scale quirk worth knowing: raw scores are keyed by (landmark, node,
view offset) with no heading, so a sighting reads the same from every
approach direction. The planted directions above are relative to the gold
walking direction.
"""

from __future__ import annotations

import random

from .angles import normalize_heading, signed_delta
from .env import Action, AgentState, step_modified
from .episode import run_episode
from .graph import NavGraph, NavInstance, NodeId, build_graph, derive_gold_actions
from .landmarks import DEFAULT_TAU, ScoreTable
from .metrics import evaluate_episode
from .policies import OraclePolicy

MIN_HEADING_SEPARATION_DEG = 30.0
SIDE_ANGLE_RANGE_DEG = (40.0, 85.0)
JITTER_DEG = 8.0

ROUTE_EDGES_RANGE = (6, 14)
FIRST_TURN_MIN_EDGES = 3
FINAL_SEGMENT_MIN_EDGES = 5

VISIBLE_Z_MARGIN = 1.5
DECOY_Z_RANGE = (-2.0, 2.5)

_MARKER_ADJECTIVES = ("red", "blue", "green", "yellow", "white", "black", "orange",
                      "purple", "gray", "brown", "pink", "golden")
_MARKER_NOUNS = ("awning", "mural", "fire hydrant", "newsstand", "flower stand",
                 "phone booth", "mailbox", "bus shelter", "bike rack", "fountain",
                 "statue", "billboard", "scaffolding", "food cart")
_STOP_PLACES = ("bakery", "library", "barber shop", "fire hall", "pharmacy",
                "record store", "tea house", "hardware store", "laundromat",
                "pizzeria", "bookshop", "diner", "florist", "arcade")


class GenerationError(RuntimeError):
    """The generator could not satisfy its constraints for these parameters."""


def _grow_graph(rng: random.Random, n_nodes: int, intersection_ratio: float):
    """Street-chain growth; returns (nodes, directed edge list)."""
    headings_at: dict[NodeId, list[float]] = {}
    edges: list[tuple[NodeId, NodeId, float]] = []
    nodes: list[NodeId] = []

    def new_node() -> NodeId:
        node = f"n{len(nodes):03d}"
        nodes.append(node)
        headings_at[node] = []
        return node

    def connect(a: NodeId, b: NodeId, heading: float) -> None:
        edges.append((a, b, normalize_heading(heading)))
        edges.append((b, a, normalize_heading(heading + 180.0)))
        headings_at[a].append(normalize_heading(heading))
        headings_at[b].append(normalize_heading(heading + 180.0))

    def heading_ok(node: NodeId, heading: float) -> bool:
        return all(abs(signed_delta(heading, h)) >= MIN_HEADING_SEPARATION_DEG
                   for h in headings_at[node])

    def grow_chain(start: NodeId, heading: float, length: int) -> None:
        cur, h = start, heading
        for _ in range(length):
            if len(nodes) >= n_nodes:
                return
            nxt = new_node()
            connect(cur, nxt, h)
            cur = nxt
            h = normalize_heading(h + rng.uniform(-JITTER_DEG, JITTER_DEG))

    spine_heading = rng.uniform(0.0, 360.0)
    first = new_node()
    grow_chain(first, spine_heading, min(n_nodes - 1, max(12, n_nodes // 3)))

    stall = 0
    while len(nodes) < n_nodes and stall < 1000:
        stall += 1
        branching = [n for n in nodes if 2 <= len(headings_at[n]) <= 3]
        if branching and rng.random() < intersection_ratio:
            node = rng.choice(branching)
            base = rng.choice(headings_at[node])
            side = rng.choice((-1.0, 1.0))
            heading = normalize_heading(base + side * rng.uniform(*SIDE_ANGLE_RANGE_DEG))
            if not heading_ok(node, heading):
                continue
            grow_chain(node, heading, rng.randint(4, 8))
        else:
            tips = [n for n in nodes if len(headings_at[n]) == 1]
            if not tips:
                continue
            node = rng.choice(tips)
            heading = normalize_heading(
                headings_at[node][0] + 180.0 + rng.uniform(-JITTER_DEG, JITTER_DEG))
            if not heading_ok(node, heading):
                continue
            grow_chain(node, heading, rng.randint(1, 3))
        stall = 0
    return nodes, edges


def _straight_continuation(g: NavGraph, node: NodeId, heading: float):
    """The outgoing edge best aligned with the heading, ignoring the reverse."""
    best = None
    best_abs = None
    for e in g.edges_from(node):
        d = abs(signed_delta(heading, e.heading_deg))
        if d > 100.0:
            continue
        if best_abs is None or d < best_abs:
            best, best_abs = e, d
    return best


def _side_edges(g: NavGraph, node: NodeId, heading: float):
    sides = []
    for e in g.edges_from(node):
        d = signed_delta(heading, e.heading_deg)
        if MIN_HEADING_SEPARATION_DEG <= abs(d) <= SIDE_ANGLE_RANGE_DEG[1]:
            sides.append((d, e))
    return sides


def _walk_route(rng: random.Random, g: NavGraph):
    """One random route: straight stretches joined by single turns.

    Walks as far as the streets allow (turning opportunistically), then cuts
    the route at a target index that leaves at least five straight edges
    after the last turn and one more street node past the target. Returns
    (path, turns) with ``turns`` mapping path index -> turn Action, or None
    when no cut point satisfies the layout rules.
    """
    start = rng.choice(sorted(g.nodes))
    out = g.edges_from(start)
    if not out:
        return None
    edge = rng.choice(sorted(out, key=lambda e: e.heading_deg))
    path = [start, edge.to]
    headings = [edge.heading_deg, edge.heading_deg]
    heading = edge.heading_deg
    turns: dict[int, Action] = {}
    next_turn_at = FIRST_TURN_MIN_EDGES + rng.randint(0, 3)

    max_edges = ROUTE_EDGES_RANGE[1] + FINAL_SEGMENT_MIN_EDGES
    while len(path) - 1 < max_edges:
        node = path[-1]
        edges_walked = len(path) - 1
        step_edge = None
        if edges_walked >= next_turn_at and rng.random() < 0.8:
            sides = [se for se in _side_edges(g, node, heading) if se[1].to not in path]
            if sides:
                d, e = rng.choice(sorted(sides, key=lambda se: se[0]))
                turns[edges_walked] = Action.RIGHT if d > 0 else Action.LEFT
                next_turn_at = edges_walked + 2 + rng.randint(0, 4)
                step_edge = e
        if step_edge is None:
            step_edge = _straight_continuation(g, node, heading)
            if step_edge is None or step_edge.to in path:
                break
        path.append(step_edge.to)
        heading = step_edge.heading_deg
        headings.append(heading)

    lo, hi = ROUTE_EDGES_RANGE
    candidates = [i for i in range(lo, min(hi, len(path) - 2) + 1)
                  if i >= _last_turn_before(turns, i) + FINAL_SEGMENT_MIN_EDGES
                  and _straight_continuation(g, path[i], headings[i]) is not None
                  and _straight_continuation(g, path[i], headings[i]).to == path[i + 1]]
    if not candidates:
        return None
    target_idx = rng.choice(candidates)
    kept_turns = {i: a for i, a in turns.items() if i < target_idx}
    return path[:target_idx + 1], kept_turns


def _last_turn_before(turns: dict[int, Action], idx: int) -> int:
    prior = [i for i in turns if i < idx]
    return max(prior) if prior else 0


class _NamePool:
    def __init__(self, rng: random.Random):
        mods = ("", "old ", "little ", "corner ", "grand ", "new ", "twin ", "tall ")
        markers = [f"the {mod}{adj} {noun}" for mod in mods
                   for adj in _MARKER_ADJECTIVES for noun in _MARKER_NOUNS]
        stops = [f"the {mod}{adj} {place}" for mod in mods
                 for adj in _MARKER_ADJECTIVES for place in _STOP_PLACES]
        rng.shuffle(markers)
        rng.shuffle(stops)
        self._markers = markers
        self._stops = stops

    def marker(self) -> str:
        if not self._markers:
            raise GenerationError("marker name pool exhausted")
        return self._markers.pop()

    def stop(self) -> str:
        if not self._stops:
            raise GenerationError("stop name pool exhausted")
        return self._stops.pop()


def _instructions_for(path, turns, markers, stop_name, g: NavGraph) -> str:
    sentences = ["Head straight down the street."]
    last = 0
    for idx in sorted(turns):
        node = path[idx]
        word = "right" if turns[idx] is Action.RIGHT else "left"
        arity = g.out_degree(node)
        blocks = idx - last
        sentences.append(
            f"After {blocks} blocks turn {word} at the {arity}-way intersection "
            f"with {markers[idx]}.")
        last = idx
    sentences.append(f"Continue until you see {stop_name}.")
    sentences.append(f"Stop at {stop_name}.")
    return " ".join(sentences)


def generate_synthetic(seed: int, n_nodes: int, intersection_ratio: float,
                       n_instances: int = 20):
    """Deterministically generate a street graph plus navigation instances.

    Every instance is verified before being emitted: its gold actions replay
    onto the gold path, and a shortest-path oracle run scores perfectly on
    it, so oracle soundness holds by construction across the whole set.
    """
    if n_nodes < 4:
        raise ValueError("need at least 4 nodes")
    rng = random.Random(seed)
    nodes, edges = _grow_graph(rng, n_nodes, intersection_ratio)
    g = build_graph(nodes, edges, lint=False)

    names = _NamePool(rng)
    oracle = OraclePolicy()
    instances: list[NavInstance] = []
    n_turny = 0
    # Keep the instance mix useful for training: at least half the routes
    # turn somewhere, at least a fifth run straight.
    turny_min = n_instances // 2
    straight_min = n_instances // 5
    attempts = 0
    while len(instances) < n_instances:
        attempts += 1
        if attempts > 400 * n_instances:
            raise GenerationError(
                f"could not build {n_instances} instances on this graph "
                f"(got {len(instances)}); try another seed or a larger graph")
        walked = _walk_route(rng, g)
        if walked is None:
            continue
        path, turns = walked
        # Balance quotas are best-effort: past half the attempt budget, any
        # valid route beats stalling on a graph that can't satisfy the mix.
        enforce_quota = attempts <= 200 * n_instances
        n_straight = len(instances) - n_turny
        if enforce_quota and turns and n_turny >= n_instances - straight_min:
            continue
        if enforce_quota and not turns and n_straight >= n_instances - turny_min:
            continue
        draft = NavInstance(
            id="draft",
            start_node=path[0],
            start_heading_deg=g.edge_heading(path[0], path[1]),
            target_node=path[-1],
            gold_path=list(path),
            instructions="draft",
            landmarks=None,
        )
        try:
            gold = derive_gold_actions(g, draft)
        except Exception:
            continue
        if _has_double_turn(gold.actions):
            continue
        # The planted markers assume the walk's turns are exactly the turns
        # the gold actions make; reject geometries where the forward median
        # slides through a bend on its own.
        if not _turns_match(g, draft, gold, path, turns):
            continue
        # Oracle metrics ignore observations, so the plain intersection
        # observer suffices for the perfection check.
        episode = run_episode(g, draft, oracle)
        result = evaluate_episode(g, episode, draft, gold)
        if not (result.tc == 1 and result.spd == 0 and result.kpa == 1.0):
            continue
        markers = {idx: names.marker() for idx in sorted(turns)}
        stop_name = names.stop()
        instances.append(NavInstance(
            id=f"syn{seed}-{len(instances):04d}",
            start_node=draft.start_node,
            start_heading_deg=draft.start_heading_deg,
            target_node=draft.target_node,
            gold_path=list(path),
            instructions=_instructions_for(path, turns, markers, stop_name, g),
            landmarks=[markers[i] for i in sorted(turns)] + [stop_name],
        ))
        if turns:
            n_turny += 1
    return g, instances


def _turns_match(g: NavGraph, inst: NavInstance, gold, path, turns) -> bool:
    gold_turns = [(node, a) for node, a in zip(gold.node_for_step, gold.actions)
                  if a in (Action.LEFT, Action.RIGHT, Action.TURN_AROUND)]
    wanted = [(path[i], turns[i]) for i in sorted(turns)]
    return gold_turns == wanted


def _has_double_turn(actions) -> bool:
    prev_turn = False
    for a in actions:
        is_turn = a in (Action.LEFT, Action.RIGHT, Action.TURN_AROUND)
        if is_turn and prev_turn:
            return True
        prev_turn = is_turn
    return False


def route_turn_nodes(g: NavGraph, inst: NavInstance):
    """(node, turn action, approach heading) per turned intersection."""
    gold = derive_gold_actions(g, inst)
    state = AgentState(inst.start_node, inst.start_heading_deg)
    out = []
    for a in gold.actions:
        if a in (Action.LEFT, Action.RIGHT):
            out.append((state.node, a, state.heading_deg))
        state = step_modified(g, state, a).next_state
    return out


def build_score_table(g: NavGraph, instances, seed: int,
                      tau: float = DEFAULT_TAU, decoys_per_landmark: int = 4) -> ScoreTable:
    """Fabricate stats and raw scores realizing each instance's landmarks."""
    rng = random.Random(seed ^ 0x5EED)
    table = ScoreTable()
    node_list: list[NodeId] = sorted(g.nodes)

    def ensure_stats(landmark: str) -> tuple[float, float]:
        if not table.has_stats(landmark):
            table.add_stats(landmark, mu=rng.uniform(5.0, 30.0),
                            sigma=rng.uniform(0.5, 3.0))
        return table.stats[landmark]

    def plant(landmark: str, node: NodeId, offset: int, z: float) -> None:
        mu, sigma = ensure_stats(landmark)
        table.raw[(landmark, node, offset)] = mu + z * sigma

    for inst in instances:
        if not inst.landmarks:
            continue
        # Turn markers are the instance's landmarks in route order, the stop
        # landmark coming last (how generate_synthetic lays them out).
        turn_nodes = route_turn_nodes(g, inst)
        if len(turn_nodes) > len(inst.landmarks) - 1:
            raise GenerationError(
                f"{inst.id}: {len(turn_nodes)} turns but only "
                f"{len(inst.landmarks) - 1} marker landmarks")
        for k, (node, action, _heading) in enumerate(turn_nodes):
            offset = 45 if action is Action.RIGHT else -45
            plant(inst.landmarks[k], node, offset, tau + VISIBLE_Z_MARGIN)

        stop_name = inst.landmarks[-1]
        early = inst.gold_path[-3]
        target = inst.target_node
        arrival = g.edge_heading(inst.gold_path[-2], target)
        plant(stop_name, early, 0, tau + VISIBLE_Z_MARGIN)
        plant(stop_name, target, 0, tau + VISIBLE_Z_MARGIN)
        past = step_modified(g, AgentState(target, arrival), Action.FORWARD)
        if past.next_state.node != target:
            side = rng.choice((-90, 90))
            plant(stop_name, past.next_state.node, side, tau + VISIBLE_Z_MARGIN)

        for lm in inst.landmarks:
            ensure_stats(lm)
            for _ in range(decoys_per_landmark):
                key = (lm, rng.choice(node_list), rng.choice((-90, -45, 0, 45, 90)))
                if key not in table.raw:
                    mu, sigma = table.stats[lm]
                    table.raw[key] = mu + rng.uniform(*DECOY_Z_RANGE) * sigma
    return table


