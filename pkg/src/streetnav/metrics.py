"""Navigation metrics over finished episodes: TC, SPD and KPA.

Task completion is forgiving by one node: stopping on the target or any of
its undirected neighbors counts. Shortest-path distance counts edges from
the stop node to the target. Key point accuracy scores the decisions at the
first step, at gold-route intersections, and at the target.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable

from .env import Action
from .episode import EpisodeLog, replay_final_state
from .graph import GoldActionSequence, NavGraph, NavInstance, NodeId, shortest_path_len


@dataclass(frozen=True)
class KeypointVerdict:
    label: str
    node: NodeId
    expected: Action
    observed: Action | None
    correct: bool


@dataclass(frozen=True)
class EvalResult:
    tc: int
    spd: int
    kpa: float
    verdicts: tuple[KeypointVerdict, ...]


def episode_final_node(g: NavGraph, inst: NavInstance, episode: EpisodeLog) -> NodeId:
    if episode.final_state is not None:
        return episode.final_state.node
    return replay_final_state(g, inst, episode).node


def task_completion(g: NavGraph, episode: EpisodeLog, inst: NavInstance) -> int:
    """1 iff the agent emitted STOP within one node of the target.

    Episodes cut off by the step cap never completed the task.
    """
    if not episode.stopped:
        return 0
    return int(shortest_path_len(g, episode_final_node(g, inst, episode),
                                 inst.target_node) <= 1)


def spd(g: NavGraph, episode: EpisodeLog, inst: NavInstance) -> int:
    """Shortest undirected path length from the stop (or last) node to the target."""
    return shortest_path_len(g, episode_final_node(g, inst, episode), inst.target_node)


def _first_gold_action_at(gold: GoldActionSequence, node: NodeId) -> Action:
    for n, a in zip(gold.node_for_step, gold.actions):
        if n == node:
            return a
    raise ValueError(f"gold actions never visit node {node!r}")


def _first_visit_action(episode: EpisodeLog, node: NodeId) -> Action | None:
    for rec in episode.steps:
        if rec.node == node:
            return rec.action
    return None


def keypoints(g: NavGraph, inst: NavInstance,
              gold: GoldActionSequence) -> list[tuple[str, NodeId, Action]]:
    """(label, node, expected action) triples for an instance.

    The initial step and the target are always key points; gold-route
    intersections (>= 3 outgoing edges) in between are scored at the first
    decision made there. Start and target nodes are not double-counted as
    intersections.
    """
    pts = [("initial", inst.start_node, gold.actions[0])]
    seen = {inst.start_node, inst.target_node}
    for node in inst.gold_path:
        if node in seen or g.out_degree(node) < 3:
            continue
        seen.add(node)
        pts.append(("intersection", node, _first_gold_action_at(gold, node)))
    pts.append(("target", inst.target_node, Action.STOP))
    return pts


def kpa(g: NavGraph, episode: EpisodeLog, inst: NavInstance,
        gold: GoldActionSequence) -> tuple[float, tuple[KeypointVerdict, ...]]:
    """Ratio of key points where the agent's first-visit action matched gold.

    Key points the agent never reached count as incorrect; revisit decisions
    are ignored since they reflect recovery, not the key-point choice.
    """
    verdicts = []
    for label, node, expected in keypoints(g, inst, gold):
        if label == "initial":
            observed = episode.steps[0].action if episode.steps else None
        else:
            observed = _first_visit_action(episode, node)
        verdicts.append(KeypointVerdict(label, node, expected, observed,
                                        observed is not None and observed == expected))
    correct = sum(v.correct for v in verdicts)
    return correct / len(verdicts), tuple(verdicts)


def evaluate_episode(g: NavGraph, episode: EpisodeLog, inst: NavInstance,
                     gold: GoldActionSequence) -> EvalResult:
    ratio, verdicts = kpa(g, episode, inst, gold)
    return EvalResult(
        tc=task_completion(g, episode, inst),
        spd=spd(g, episode, inst),
        kpa=ratio,
        verdicts=verdicts,
    )


@dataclass(frozen=True)
class Report:
    n: int
    tc: float
    spd: float
    kpa: float


def aggregate(results: Iterable[EvalResult]) -> Report:
    results = list(results)
    if not results:
        raise ValueError("no results to aggregate")
    n = len(results)
    return Report(
        n=n,
        tc=sum(r.tc for r in results) / n,
        spd=sum(r.spd for r in results) / n,
        kpa=sum(r.kpa for r in results) / n,
    )


def store_report(report: Report, path_or_file: str | IO[str]) -> None:
    doc = {"n": report.n, "tc": report.tc, "spd": report.spd, "kpa": report.kpa}
    if hasattr(path_or_file, "write"):
        json.dump(doc, path_or_file)
        path_or_file.write("\n")
    else:
        with open(path_or_file, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
            fh.write("\n")
