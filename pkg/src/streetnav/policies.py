"""Action policies: the scoring interface and its implementations.

A policy maps the current prompt (and episode context) to one score per
action literal; the decision is the argmax. Scores may be log-probabilities
or any unnormalized values, since the argmax is invariant under monotone
transforms.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
import urllib.error
import urllib.request
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .env import ACTIONS, Action, AgentState, StepNote, step_modified
from .graph import NavGraph, NavInstance, NodeId
from .verbalize import Observation

LiteralScores = dict[Action, float]


class PolicyError(RuntimeError):
    """Policy could not produce scores (endpoint failure, cassette miss...)."""


@dataclass
class EpisodeContext:
    """Everything a non-textual policy may need at one decision point."""

    graph: NavGraph
    instance: NavInstance
    state: AgentState
    t: int
    observation: Observation
    steps_since_turn: int


def validate_scores(scores: LiteralScores) -> None:
    missing = [a for a in ACTIONS if a not in scores]
    if missing:
        raise ValueError(f"scores missing actions: {[a.literal for a in missing]}")
    for a, v in scores.items():
        if not math.isfinite(v):
            raise ValueError(f"non-finite score for {a.literal!r}: {v!r}")


def decode_action(scores: LiteralScores) -> Action:
    """Highest-scoring action; ties break in declaration order (FORWARD first)."""
    validate_scores(scores)
    best_i = max(range(len(ACTIONS)), key=lambda i: (scores[ACTIONS[i]], -i))
    return ACTIONS[best_i]


class Policy:
    """Base policy: deterministic scoring, optional learning hook."""

    def score(self, prompt: str, context: EpisodeContext) -> LiteralScores:
        raise NotImplementedError

    def update(self, batch) -> None:
        """Consume a batch of ReferenceStep records; frozen policies ignore it."""


# ---------------------------------------------------------------------------
# Shortest-path oracle


_SEARCH_ACTIONS = (Action.FORWARD, Action.LEFT, Action.RIGHT, Action.TURN_AROUND)


def oracle_plan(g: NavGraph, s: AgentState, target: NodeId) -> list[Action]:
    """Shortest action sequence reaching and stopping exactly on the target.

    Breadth-first search over (node, heading) states under the modified
    transitions; every action costs one step, so turns are paid for like
    moves, matching how the environment consumes actions.
    """
    if target not in g.nodes:
        raise ValueError(f"unknown target node {target!r}")
    if s.node == target:
        return [Action.STOP]
    start_key = (s.node, round(s.heading_deg, 6))
    seen = {start_key}
    queue = deque([(s, ())])
    while queue:
        cur, plan = queue.popleft()
        for act in _SEARCH_ACTIONS:
            out = step_modified(g, cur, act)
            if out.note is not StepNote.OK:
                continue
            key = (out.next_state.node, round(out.next_state.heading_deg, 6))
            if key in seen:
                continue
            seen.add(key)
            if out.next_state.node == target:
                return list(plan) + [act, Action.STOP]
            queue.append((out.next_state, plan + (act,)))
    raise ValueError(f"target {target!r} unreachable from {s.node!r}")


def oracle_next_action(g: NavGraph, s: AgentState, target: NodeId) -> Action:
    """Optimal next action on a shortest action path to the target."""
    return oracle_plan(g, s, target)[0]


def scores_for_action(action: Action, hot: float = 0.0, cold: float = -1e6) -> LiteralScores:
    return {a: (hot if a is action else cold) for a in ACTIONS}


class OraclePolicy(Policy):
    """Follows shortest action paths; caches plans per target for speed."""

    def __init__(self):
        self._cache: dict[tuple, Action] = {}
        self._graphs: dict[int, NavGraph] = {}  # keeps ids stable while cached

    def score(self, prompt: str, context: EpisodeContext) -> LiteralScores:
        target = context.instance.target_node
        self._graphs.setdefault(id(context.graph), context.graph)
        key = (id(context.graph), target, context.state.node,
               round(context.state.heading_deg, 6))
        action = self._cache.get(key)
        if action is None:
            plan = oracle_plan(context.graph, context.state, target)
            state = context.state
            for act in plan:
                k = (id(context.graph), target, state.node, round(state.heading_deg, 6))
                self._cache.setdefault(k, act)
                if act is Action.STOP:
                    break
                state = step_modified(context.graph, state, act).next_state
            action = self._cache[key]
        return scores_for_action(action)


class ScriptedPolicy(Policy):
    """Replays a fixed action sequence; emits STOP once the script runs out."""

    def __init__(self, actions):
        self.actions = list(actions)

    def score(self, prompt: str, context: EpisodeContext) -> LiteralScores:
        i = context.t - 1
        action = self.actions[i] if i < len(self.actions) else Action.STOP
        return scores_for_action(action)


class ConstantPolicy(Policy):
    def __init__(self, action: Action):
        self.action = action

    def score(self, prompt: str, context: EpisodeContext) -> LiteralScores:
        return scores_for_action(self.action)


# ---------------------------------------------------------------------------
# Toy trainable policy


N_FEATURES = 16

_DIRECTION_INDEX = {"left": 0, "slightly left": 1, "ahead": 2, "slightly right": 3,
                    "right": 4}


def featurize(context: EpisodeContext) -> np.ndarray:
    """Hand-coded features of the last observation plus step bookkeeping.

    Layout: bias; intersection arity one-hot (none/3/4/5+); a flag per
    sighting direction; whether the instance's final landmark (the stop cue)
    is currently seen; steps-since-last-turn bucket one-hot (0/1/2/3+); step
    parity.
    """
    phi = np.zeros(N_FEATURES)
    phi[0] = 1.0
    arity = context.observation.intersection_arity
    if arity is None:
        phi[1] = 1.0
    else:
        phi[2 + min(arity - 3, 2)] = 1.0
    goal_landmark = (context.instance.landmarks or [None])[-1]
    for s in context.observation.sightings:
        phi[5 + _DIRECTION_INDEX[s.direction_literal]] = 1.0
        if goal_landmark is not None and s.landmark == goal_landmark:
            phi[10] = 1.0
    phi[11 + min(context.steps_since_turn, 3)] = 1.0
    phi[15] = float(context.t % 2)
    return phi


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max()
    return z - np.log(np.exp(z).sum())


@dataclass
class ReferenceStep:
    """One supervised decision: the prompt and context the policy saw, and
    the action it should have scored highest."""

    prompt: str
    context: EpisodeContext
    action: Action
    features: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.features is None:
            self.features = featurize(self.context)


class ToyPolicy(Policy):
    """Linear scores over hand-coded features; trains by one cross-entropy
    gradient step per update call."""

    def __init__(self, learning_rate: float = 2.0, seed: int | None = None,
                 init_scale: float = 0.0):
        self.learning_rate = learning_rate
        if init_scale > 0.0:
            rng = np.random.default_rng(seed)
            self.weights = rng.normal(0.0, init_scale, size=(len(ACTIONS), N_FEATURES))
        else:
            self.weights = np.zeros((len(ACTIONS), N_FEATURES))

    def score(self, prompt: str, context: EpisodeContext) -> LiteralScores:
        z = self.weights @ featurize(context)
        return {a: float(z[i]) for i, a in enumerate(ACTIONS)}

    def score_features(self, phi: np.ndarray) -> np.ndarray:
        return self.weights @ phi

    def loss(self, batch: list[ReferenceStep]) -> float:
        """Mean cross-entropy of current scores against the reference actions."""
        total = 0.0
        for step in batch:
            logp = _log_softmax(self.weights @ step.features)
            total -= logp[ACTIONS.index(step.action)]
        return total / len(batch)

    def gradient(self, batch: list[ReferenceStep]) -> np.ndarray:
        grad = np.zeros_like(self.weights)
        for step in batch:
            p = np.exp(_log_softmax(self.weights @ step.features))
            p[ACTIONS.index(step.action)] -= 1.0
            grad += np.outer(p, step.features)
        return grad / len(batch)

    def update(self, batch: list[ReferenceStep]) -> None:
        if batch:
            self.weights -= self.learning_rate * self.gradient(batch)

    def snapshot(self) -> np.ndarray:
        return self.weights.copy()

    def restore(self, weights: np.ndarray) -> None:
        self.weights = weights.copy()


# ---------------------------------------------------------------------------
# External text-completion endpoint


def prompt_key(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class Cassette:
    """Record/replay store for endpoint responses, keyed by prompt hash.

    File format: JSON-lines of {"key", "request", "response"}.
    """

    def __init__(self, path: str):
        self.path = path
        self._responses: dict[str, dict] = {}
        try:
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        rec = json.loads(line)
                        self._responses[rec["key"]] = rec["response"]
        except FileNotFoundError:
            pass

    def get(self, key: str) -> dict | None:
        return self._responses.get(key)

    def put(self, key: str, request: dict, response: dict) -> None:
        self._responses[key] = response
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({"key": key, "request": request, "response": response}) + "\n")


@dataclass
class EndpointConfig:
    url: str
    timeout_s: float = 10.0
    attempts: int = 3
    backoff_s: float = 0.2


def post_json(url: str, payload: dict, timeout_s: float) -> dict:
    data = json.dumps(payload).encode("utf-8")
    req = urllib.request.Request(url, data=data,
                                 headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req, timeout=timeout_s) as resp:
        return json.loads(resp.read().decode("utf-8"))


def external_lm_score(config: EndpointConfig, prompt: str,
                      sleep=time.sleep) -> LiteralScores:
    """Score the five literals as continuations via the scoring endpoint.

    Wire format: POST {"prompt", "continuations": [5 literals]} and the
    endpoint answers {"logprobs": [5 floats]}. Three attempts with
    exponential backoff; whatever still fails aborts the episode.
    """
    request = {"prompt": prompt, "continuations": [a.literal for a in ACTIONS]}
    last_error = None
    for attempt in range(config.attempts):
        if attempt:
            sleep(config.backoff_s * (2 ** (attempt - 1)))
        try:
            response = post_json(config.url, request, config.timeout_s)
            return _scores_from_response(response)
        except (urllib.error.URLError, OSError, json.JSONDecodeError, ValueError) as exc:
            last_error = exc
    raise PolicyError(
        f"endpoint {config.url} failed after {config.attempts} attempts: {last_error}")


def _scores_from_response(response: dict) -> LiteralScores:
    logprobs = response["logprobs"]
    if len(logprobs) != len(ACTIONS):
        raise ValueError(f"expected {len(ACTIONS)} logprobs, got {len(logprobs)}")
    scores = {a: float(lp) for a, lp in zip(ACTIONS, logprobs)}
    validate_scores(scores)
    return scores


class ExternalPolicy(Policy):
    """Scores literals through a text-completion endpoint, with an optional
    cassette for record/replay of the raw responses."""

    def __init__(self, config: EndpointConfig, cassette: Cassette | None = None,
                 replay_only: bool = False, sleep=time.sleep):
        self.config = config
        self.cassette = cassette
        self.replay_only = replay_only
        self._sleep = sleep

    def score(self, prompt: str, context: EpisodeContext) -> LiteralScores:
        key = prompt_key(prompt)
        if self.cassette is not None:
            cached = self.cassette.get(key)
            if cached is not None:
                return _scores_from_response(cached)
            if self.replay_only:
                raise PolicyError(f"cassette has no response for prompt key {key}")
        request = {"prompt": prompt, "continuations": [a.literal for a in ACTIONS]}
        scores = external_lm_score(self.config, prompt, sleep=self._sleep)
        if self.cassette is not None:
            self.cassette.put(key, request,
                              {"logprobs": [scores[a] for a in ACTIONS]})
        return scores
