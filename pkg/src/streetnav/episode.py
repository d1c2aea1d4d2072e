"""Episode runner: observe, verbalize, score, decode, step, log.

Episodes are strictly sequential; many may run concurrently against the same
immutable graph and frozen policy. A policy failure aborts the episode but
the partial log is preserved.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO

from .env import Action, AgentState, Semantics, StepNote
from .graph import NavGraph, NavInstance
from .landmarks import ScoreTable, visible_sightings, DEFAULT_TAU
from .policies import EpisodeContext, LiteralScores, Policy, PolicyError, decode_action
from .verbalize import Observation, PromptParts, assemble_prompt, extend_prompt, render_observation

# Trajectories average around 40 steps; 55 leaves headroom without letting
# runaway policies spin forever.
DEFAULT_MAX_STEPS = 55

INTERSECTION_MIN_ARITY = 3


class ObservationBuilder:
    """Produces the per-step Observation: intersection arity from the graph
    plus landmark sightings from a score table (when one is supplied)."""

    def __init__(self, table: ScoreTable | None = None, tau: float = DEFAULT_TAU):
        self.table = table
        self.tau = tau

    def observe(self, g: NavGraph, inst: NavInstance, state: AgentState) -> Observation:
        arity = g.out_degree(state.node)
        sightings = ()
        if self.table is not None and inst.landmarks:
            sightings = tuple(visible_sightings(self.table, inst.landmarks, state, self.tau))
        return Observation(
            intersection_arity=arity if arity >= INTERSECTION_MIN_ARITY else None,
            sightings=sightings,
        )


@dataclass
class StepRecord:
    t: int
    node: str
    heading_deg: float
    observation: str
    action: Action
    scores: LiteralScores
    note: StepNote
    # In-memory extras for training; not serialized.
    prompt: str = field(default="", repr=False)
    context: EpisodeContext | None = field(default=None, repr=False)


@dataclass
class EpisodeLog:
    instance_id: str
    semantics: Semantics
    steps: list[StepRecord] = field(default_factory=list)
    stopped: bool = False
    aborted: bool = False
    final_state: AgentState | None = None
    abort_reason: str = ""

    @property
    def final_node(self) -> str:
        if self.final_state is not None:
            return self.final_state.node
        raise ValueError("episode has no final state")

    def actions(self) -> list[Action]:
        return [rec.action for rec in self.steps]


def run_episode(g: NavGraph, inst: NavInstance, policy: Policy,
                semantics: Semantics = Semantics.MODIFIED,
                max_steps: int = DEFAULT_MAX_STEPS,
                observer: ObservationBuilder | None = None,
                prompt_parts: PromptParts | None = None) -> EpisodeLog:
    """Run one navigation episode until STOP, the step cap, or policy failure."""
    inst.validate(g)
    observer = observer or ObservationBuilder()
    parts = prompt_parts or PromptParts(instructions=inst.instructions)
    step_fn = semantics.step

    log = EpisodeLog(inst.id, semantics)
    state = AgentState(inst.start_node, inst.start_heading_deg)
    prompt = None
    steps_since_turn = 0
    for t in range(1, max_steps + 1):
        obs = observer.observe(g, inst, state)
        obs_text = render_observation(obs, parts.templates)
        if prompt is None:
            prompt = assemble_prompt(parts, [], obs)
        context = EpisodeContext(g, inst, state, t, obs, steps_since_turn)
        try:
            scores = policy.score(prompt, context)
        except PolicyError as exc:
            log.aborted = True
            log.abort_reason = str(exc)
            break
        action = decode_action(scores)
        outcome = step_fn(g, state, action)
        log.steps.append(StepRecord(t, state.node, state.heading_deg, obs_text,
                                    action, scores, outcome.note,
                                    prompt=prompt, context=context))
        state = outcome.next_state
        if outcome.done:
            log.stopped = True
            break
        steps_since_turn = 0 if action in (Action.LEFT, Action.RIGHT, Action.TURN_AROUND) \
            else steps_since_turn + 1
        next_obs = observer.observe(g, inst, state)
        prompt = extend_prompt(prompt, action, next_obs, parts.templates)
    log.final_state = state
    return log


def store_episode(log: EpisodeLog, path_or_file: str | IO[str]) -> None:
    """Write an episode as JSON-lines: one record per step plus a summary."""
    def dump(fh: IO[str]) -> None:
        for rec in log.steps:
            fh.write(json.dumps({
                "t": rec.t,
                "node": rec.node,
                "heading_deg": rec.heading_deg,
                "observation": rec.observation,
                "action": rec.action.literal,
                "scores": {a.literal: v for a, v in rec.scores.items()},
                "note": rec.note.value,
            }) + "\n")
        fh.write(json.dumps({"stopped": log.stopped, "steps": len(log.steps)}) + "\n")

    if hasattr(path_or_file, "write"):
        dump(path_or_file)
    else:
        with open(path_or_file, "w", encoding="utf-8") as fh:
            dump(fh)


def load_episode(path_or_file: str | IO[str], instance_id: str = "",
                 semantics: Semantics = Semantics.MODIFIED) -> EpisodeLog:
    if hasattr(path_or_file, "read"):
        lines = path_or_file.read().splitlines()
    else:
        with open(path_or_file, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    log = EpisodeLog(instance_id, semantics)
    summary = None
    for line in lines:
        if not line.strip():
            continue
        rec = json.loads(line)
        if "stopped" in rec and "t" not in rec:
            summary = rec
            continue
        log.steps.append(StepRecord(
            t=int(rec["t"]),
            node=str(rec["node"]),
            heading_deg=float(rec["heading_deg"]),
            observation=str(rec["observation"]),
            action=Action.from_literal(rec["action"]),
            scores={Action.from_literal(k): float(v) for k, v in rec["scores"].items()},
            note=StepNote(rec["note"]),
        ))
    if summary is None:
        raise ValueError("episode file has no summary line")
    log.stopped = bool(summary["stopped"])
    if len(log.steps) != int(summary["steps"]):
        raise ValueError(
            f"episode summary says {summary['steps']} steps, file has {len(log.steps)}")
    return log


def replay_final_state(g: NavGraph, inst: NavInstance, log: EpisodeLog) -> AgentState:
    """Recompute the end state of a (possibly deserialized) episode."""
    state = AgentState(inst.start_node, inst.start_heading_deg)
    step_fn = log.semantics.step
    for rec in log.steps:
        state = step_fn(g, state, rec.action).next_state
    return state
