import io
import random
import re
from pathlib import Path

import pytest

from streetnav.env import Action
from streetnav.landmarks import Sighting
from streetnav.verbalize import (Observation, PromptParts, Templates, assemble_prompt,
                                 extend_prompt, load_template_config,
                                 render_observation)

GOLDEN = Path(__file__).parent / "data" / "golden_prompt.txt"


def sighting(name, direction, z=4.2):
    return Sighting(name, direction, z)


class TestRenderObservation:
    def test_intersection_only(self):
        assert render_observation(Observation(intersection_arity=4)) == \
            "There is a 4-way intersection."

    def test_ahead_sighting_has_no_on_your(self):
        obs = Observation(sightings=(sighting("Chase", "ahead"),))
        assert render_observation(obs) == "There is Chase ahead."

    def test_side_sighting(self):
        obs = Observation(sightings=(sighting("a church", "slightly left"),))
        assert render_observation(obs) == "There is a church on your slightly left."

    def test_empty_observation(self):
        assert render_observation(Observation()) == ""

    def test_intersection_sentence_comes_first(self):
        obs = Observation(intersection_arity=3,
                          sightings=(sighting("a park", "right"),))
        assert render_observation(obs) == \
            "There is a 3-way intersection. There is a park on your right."

    def test_arity_below_three_rejected(self):
        with pytest.raises(ValueError):
            Observation(intersection_arity=2)

    def test_no_double_spaces_or_orphan_punctuation(self):
        rng = random.Random(4)
        directions = ["left", "slightly left", "ahead", "slightly right", "right"]
        for _ in range(200):
            sights = tuple(sighting(f"lm{i}", rng.choice(directions))
                           for i in range(rng.randint(0, 4)))
            arity = rng.choice([None, 3, 4, 5])
            text = render_observation(Observation(arity, sights))
            assert "  " not in text
            assert not text.startswith(" ") and not text.endswith(" ")
            if text:
                assert text.endswith(".")
                assert not re.search(r"\s[.,]", text)


class TestAssemblePrompt:
    def parts(self):
        return PromptParts(instructions="Go to the end and stop.")

    def test_step_one_empty_history_ends_with_number(self):
        prompt = assemble_prompt(self.parts(), [], Observation())
        assert prompt.endswith("1.")
        assert prompt.splitlines()[0] == PromptParts().task_prefix
        assert "Go to the end and stop." in prompt

    def test_golden_snapshot(self):
        obs1 = Observation(intersection_arity=4)
        obs2 = Observation()
        obs3 = Observation(intersection_arity=3,
                           sightings=(sighting("the old clock", "slightly right"),))
        history = [(obs1, Action.FORWARD), (obs2, Action.RIGHT)]
        prompt = assemble_prompt(self.parts(), history, obs3)
        assert prompt == GOLDEN.read_text(encoding="utf-8")

    def test_byte_stable_across_runs(self):
        history = [(Observation(intersection_arity=4), Action.LEFT)]
        a = assemble_prompt(self.parts(), history, Observation())
        b = assemble_prompt(self.parts(), history, Observation())
        assert a == b

    def test_prefix_monotone_over_fuzzed_histories(self):
        rng = random.Random(12)
        directions = ["left", "slightly left", "ahead", "slightly right", "right"]
        for _ in range(100):
            history = []
            parts = self.parts()
            prev = assemble_prompt(parts, history, Observation())
            for t in range(1, rng.randint(2, 7)):
                obs = Observation(
                    rng.choice([None, 3, 4, 5]),
                    tuple(sighting(f"lm{i}", rng.choice(directions))
                          for i in range(rng.randint(0, 2))))
                action = rng.choice(list(Action))
                nxt_obs = Observation()
                history.append((obs, action))
                # Rebuild from scratch; must extend the previous prompt.
                prev_full = assemble_prompt(parts, history[:-1], obs)
                assert prev_full.startswith(prev[: len(prev) - 2])
                nxt = assemble_prompt(parts, history, nxt_obs)
                assert nxt.startswith(prev_full)
                assert nxt[len(prev_full):].startswith(f" {action.literal}\n")
                prev = nxt

    def test_extend_matches_full_reassembly(self):
        rng = random.Random(13)
        parts = self.parts()
        history = []
        prompt = assemble_prompt(parts, [], Observation())
        current = Observation()
        for _ in range(6):
            action = rng.choice(list(Action))
            nxt = Observation(rng.choice([None, 3]), ())
            history.append((current, action))
            prompt = extend_prompt(prompt, action, nxt)
            assert prompt == assemble_prompt(parts, history, nxt)
            current = nxt


class TestTemplateConfig:
    def test_overrides(self):
        cfg = io.StringIO(
            "task_prefix=Find the goal.\n"
            "task_suffix=Steps:\n"
            "intersection_template=Intersection of {arity} streets.\n"
            "landmark_side_template={landmark} to your {direction}.\n"
            "landmark_ahead_template={landmark} straight ahead.\n")
        parts = load_template_config(cfg)
        assert parts.task_prefix == "Find the goal."
        assert parts.task_suffix == "Steps:"
        obs = Observation(intersection_arity=5, sightings=(sighting("a mural", "left"),))
        assert render_observation(obs, parts.templates) == \
            "Intersection of 5 streets. a mural to your left."

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown key"):
            load_template_config(io.StringIO("task=nope\n"))

    def test_comments_and_blanks_ignored(self):
        parts = load_template_config(io.StringIO("# comment\n\ntask_suffix=Log:\n"))
        assert parts.task_suffix == "Log:"
        assert parts.task_prefix == PromptParts().task_prefix
