"""Template rendering of observations and assembly of the step prompt.

The prompt for step t is one string: task prefix, instructions, task suffix,
then for every step its observation text (when any) and a numbered action
line. The serialization is frozen so prompts are byte-stable and each step's
prompt is a strict prefix of the next one with the chosen action literal in
between; that prefix property is what makes next-word decoding valid.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import IO, Sequence

from .env import Action
from .landmarks import Sighting

DEFAULT_TASK_PREFIX = ("Navigate to the described target location following "
                       "the provided instructions.")
DEFAULT_TASK_SUFFIX = "Trajectory:"
DEFAULT_INTERSECTION_TEMPLATE = "There is a {arity}-way intersection."
DEFAULT_LANDMARK_SIDE_TEMPLATE = "There is {landmark} on your {direction}."
DEFAULT_LANDMARK_AHEAD_TEMPLATE = "There is {landmark} ahead."


@dataclass(frozen=True)
class Observation:
    """What the agent perceives at one step: intersection arity (when the
    node has three or more outgoing edges) plus landmark sightings."""

    intersection_arity: int | None = None
    sightings: tuple[Sighting, ...] = ()

    def __post_init__(self):
        if self.intersection_arity is not None and self.intersection_arity < 3:
            raise ValueError("intersection arity below 3 is not an intersection")
        object.__setattr__(self, "sightings", tuple(self.sightings))


EMPTY_OBSERVATION = Observation()


@dataclass(frozen=True)
class Templates:
    intersection: str = DEFAULT_INTERSECTION_TEMPLATE
    landmark_side: str = DEFAULT_LANDMARK_SIDE_TEMPLATE
    landmark_ahead: str = DEFAULT_LANDMARK_AHEAD_TEMPLATE


@dataclass(frozen=True)
class PromptParts:
    task_prefix: str = DEFAULT_TASK_PREFIX
    task_suffix: str = DEFAULT_TASK_SUFFIX
    instructions: str = ""
    templates: Templates = field(default_factory=Templates)


def render_observation(obs: Observation, templates: Templates | None = None) -> str:
    """Render an observation as sentences; empty string when nothing is seen.

    The intersection sentence comes first, then one sentence per sighting in
    input order. 'ahead' gets its own phrasing since "on your ahead" is not
    English.
    """
    t = templates or Templates()
    parts = []
    if obs.intersection_arity is not None:
        parts.append(t.intersection.format(arity=obs.intersection_arity))
    for s in obs.sightings:
        if s.direction_literal == "ahead":
            parts.append(t.landmark_ahead.format(landmark=s.landmark))
        else:
            parts.append(t.landmark_side.format(landmark=s.landmark,
                                                direction=s.direction_literal))
    return " ".join(parts)


def assemble_prompt(parts: PromptParts,
                    history: Sequence[tuple[Observation | str, Action]],
                    current_obs: Observation | str = EMPTY_OBSERVATION) -> str:
    """Build the full prompt for step ``len(history) + 1``.

    ``history`` holds the completed (observation, action) pairs; the current
    step's observation is rendered last and the prompt ends with the bare
    step number awaiting the next action literal.
    """
    t = parts.templates
    lines = [parts.task_prefix, parts.instructions, parts.task_suffix]
    for i, (obs, action) in enumerate(history, start=1):
        text = obs if isinstance(obs, str) else render_observation(obs, t)
        if text:
            lines.append(text)
        lines.append(f"{i}. {action.literal}")
    text = current_obs if isinstance(current_obs, str) else render_observation(current_obs, t)
    if text:
        lines.append(text)
    lines.append(f"{len(history) + 1}.")
    return "\n".join(lines)


def extend_prompt(prompt: str, action: Action,
                  next_obs: Observation | str = EMPTY_OBSERVATION,
                  templates: Templates | None = None) -> str:
    """Append a chosen action and the next observation to an existing prompt.

    Equivalent to reassembling with one more history entry; kept incremental
    so long episodes don't re-render their whole past every step.
    """
    text = next_obs if isinstance(next_obs, str) else render_observation(next_obs, templates)
    step = int(prompt.rsplit("\n", 1)[-1].rstrip("."))
    middle = f" {action.literal}\n"
    if text:
        middle += text + "\n"
    return prompt + middle + f"{step + 1}."


def load_template_config(path_or_file: str | IO[str],
                         base: PromptParts | None = None) -> PromptParts:
    """Apply a key=value config file on top of the default prompt parts.

    Recognized keys: task_prefix, task_suffix, intersection_template,
    landmark_side_template, landmark_ahead_template. ``\\n`` escapes are
    honored so multi-line prefixes stay expressible.
    """
    if hasattr(path_or_file, "read"):
        text = path_or_file.read()
    else:
        with open(path_or_file, "r", encoding="utf-8") as fh:
            text = fh.read()
    parts = base or PromptParts()
    templates = parts.templates
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"template config line {lineno}: expected key=value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip().replace("\\n", "\n")
        if key == "task_prefix":
            parts = replace(parts, task_prefix=value)
        elif key == "task_suffix":
            parts = replace(parts, task_suffix=value)
        elif key == "intersection_template":
            templates = replace(templates, intersection=value)
        elif key == "landmark_side_template":
            templates = replace(templates, landmark_side=value)
        elif key == "landmark_ahead_template":
            templates = replace(templates, landmark_ahead=value)
        else:
            raise ValueError(f"template config line {lineno}: unknown key {key!r}")
    return replace(parts, templates=templates)
