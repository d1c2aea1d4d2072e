"""Acceptance suite: one test per acceptance criterion, each printing a
PASS/FAIL line with its measured numbers. Tolerances are pinned here.

Paper-scale corpus results are out of reach at desk scale, so acceptance is
property- and fixture-based: exact intersection-table replay, oracle
perfection on seeded synthetic worlds, metric/standardization identities
against independent re-implementations, prompt stability, and the training
loop's measured improvement over its untrained self and over pure teacher
forcing.
"""

import math
import random
import time

import numpy as np
import pytest

from streetnav.cli import main as cli_main
from streetnav.env import ACTIONS, Action, AgentState, step_modified, step_original
from streetnav.episode import ObservationBuilder, run_episode
from streetnav.fixtures import check_comparison_table, four_way
from streetnav.graph import derive_gold_actions
from streetnav.landmarks import (ScoreTable, VIEW_OFFSETS_DEG, parse_extraction_response,
                                 visible_sightings, z_score)
from streetnav.metrics import evaluate_episode
from streetnav.policies import (OraclePolicy, ReferenceStep, ScriptedPolicy, ToyPolicy)
from streetnav.synthetic import build_score_table, generate_synthetic
from streetnav.training import TrainingConfig, evaluate_tc, train
from streetnav.verbalize import Observation, PromptParts, assemble_prompt

from test_metrics import brute_force_metrics, random_walk_episode
from test_verbalize import sighting


def report(name: str, ok: bool, detail: str = "") -> None:
    print(f"ACCEPTANCE {'PASS' if ok else 'FAIL'}: {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


def test_intersection_table_reproduction(capsys):
    start = time.monotonic()
    results = check_comparison_table()
    exact = all(r.ok for r in results) and len(results) == 18
    exit_code = cli_main(["env-check"])
    elapsed = time.monotonic() - start
    with capsys.disabled():
        report("intersection comparison table (9 paths, both semantics)",
               exact and exit_code == 0 and elapsed < 1.0,
               f"{len(results)} replays, env-check exit {exit_code}, {elapsed:.2f}s")


def test_four_way_snap_vs_explicit_right(capsys):
    g = four_way()
    snapped = step_original(g, AgentState("v2", 20.0), Action.FORWARD).next_state
    turned = step_modified(g, AgentState("v3", 20.0), Action.RIGHT).next_state
    ok = snapped.node == "v3" and snapped.heading_deg == 50.0 \
        and turned.heading_deg == 50.0 and turned.node == "v3"
    with capsys.disabled():
        report("4-way regression: legacy forward auto-snaps to the 50-degree edge, "
               "modified right selects it explicitly", ok,
               f"snap->{snapped.heading_deg:g}, right->{turned.heading_deg:g}")


def test_oracle_soundness_on_200_instances(capsys):
    start = time.monotonic()
    g, instances = generate_synthetic(seed=7, n_nodes=60, intersection_ratio=0.45,
                                      n_instances=200)
    table = build_score_table(g, instances, seed=7)
    observer = ObservationBuilder(table)
    oracle = OraclePolicy()
    perfect = 0
    for inst in instances:
        log = run_episode(g, inst, oracle, observer=observer)
        res = evaluate_episode(g, log, inst, derive_gold_actions(g, inst))
        perfect += (res.tc, res.spd, res.kpa) == (1, 0, 1.0)
    elapsed = time.monotonic() - start
    with capsys.disabled():
        report("oracle policy scores TC=1.0 SPD=0 KPA=1.0 on 200 seeded instances",
               perfect == 200 and elapsed < 30.0,
               f"{perfect}/200 perfect, {elapsed:.1f}s")


def test_metrics_match_brute_force(capsys, synthetic_world):
    g, instances, _ = synthetic_world
    rng = random.Random(99)
    exact = 0
    for k in range(50):
        inst = instances[k % len(instances)]
        gold = derive_gold_actions(g, inst)
        ep = random_walk_episode(g, inst, rng)
        res = evaluate_episode(g, ep, inst, gold)
        bf = brute_force_metrics(g, ep, inst, gold)
        exact += (res.tc, res.spd, res.kpa) == bf
    invariant_violations = 0
    for k in range(1000):
        inst = instances[k % len(instances)]
        ep = random_walk_episode(g, inst, rng, max_steps=8)
        res = evaluate_episode(g, ep, inst, derive_gold_actions(g, inst))
        if res.tc == 1 and res.spd > 1:
            invariant_violations += 1
        if ep.stopped and res.spd == 0 and res.tc != 1:
            invariant_violations += 1
    with capsys.disabled():
        report("TC/SPD/KPA match an independent brute-force scorer and invariants hold",
               exact == 50 and invariant_violations == 0,
               f"{exact}/50 exact, {invariant_violations} violations in 1000 fuzzed")


def test_standardization_identities(capsys):
    rng = random.Random(123)
    table = ScoreTable()
    worst = 0.0
    for i in range(1000):
        lm = f"lm{i}"
        mu, sigma, raw = rng.uniform(-40, 40), rng.uniform(0.05, 8), rng.uniform(-60, 60)
        table.add_stats(lm, mu, sigma)
        table.add_raw(lm, "n", 0, raw)
        worst = max(worst, abs(z_score(table, lm, "n", 0) - (raw - mu) / sigma))

    affine_ok = True
    c, d = 2.5, 7.0
    base, scaled = ScoreTable(), ScoreTable()
    for i in range(100):
        lm = f"a{i}"
        mu, sigma = rng.uniform(-10, 10), rng.uniform(0.2, 5)
        base.add_stats(lm, mu, sigma)
        scaled.add_stats(lm, c * mu + d, c * sigma)
        for off in VIEW_OFFSETS_DEG:
            raw = rng.uniform(-20, 20)
            base.add_raw(lm, "n", off, raw)
            scaled.add_raw(lm, "n", off, c * raw + d)
            if abs(z_score(base, lm, "n", off) - z_score(scaled, lm, "n", off)) > 1e-9:
                affine_ok = False

    mono_ok = True
    state = AgentState("n", 0.0)
    for _ in range(200):
        t = ScoreTable()
        t.add_stats("x", 0, 1)
        for off in VIEW_OFFSETS_DEG:
            t.add_raw("x", "n", off, rng.uniform(-5, 8))
        taus = sorted(rng.uniform(-6, 9) for _ in range(2))
        if len(visible_sightings(t, ["x"], state, taus[1])) > \
                len(visible_sightings(t, ["x"], state, taus[0])):
            mono_ok = False

    with capsys.disabled():
        report("standardization identities (1e-9), affine invariance, tau monotonicity",
               worst <= 1e-9 and affine_ok and mono_ok,
               f"max |z - recomputed| = {worst:.2e}")


def test_prompt_goldens_and_prefix_monotonicity(capsys):
    parts = PromptParts(instructions="Go to the end and stop.")
    hist = [(Observation(intersection_arity=4), Action.FORWARD)]
    stable = all(assemble_prompt(parts, hist, Observation()) ==
                 assemble_prompt(parts, hist, Observation()) for _ in range(10))

    rng = random.Random(321)
    directions = ["left", "slightly left", "ahead", "slightly right", "right"]
    monotone = True
    for _ in range(100):
        history = []
        prev = assemble_prompt(parts, history, Observation())
        for t in range(rng.randint(1, 8)):
            obs = Observation(rng.choice([None, 3, 4, 5]),
                              tuple(sighting(f"lm{j}", rng.choice(directions))
                                    for j in range(rng.randint(0, 2))))
            action = rng.choice(list(Action))
            cur = assemble_prompt(parts, history, obs)
            if not cur.startswith(prev[:-2]):
                monotone = False
            history.append((obs, action))
            nxt = assemble_prompt(parts, history, Observation())
            if not nxt.startswith(cur + f" {action.literal}\n"):
                monotone = False
            prev = nxt
    with capsys.disabled():
        report("prompt assembly byte-stable and prefix-monotone over 100 fuzzed histories",
               stable and monotone)


def test_training_improves_task_completion(capsys):
    start = time.monotonic()
    passes = []
    details = []
    for seed in (0, 1, 2):
        g, instances = generate_synthetic(seed=100 + seed, n_nodes=60,
                                          intersection_ratio=0.45, n_instances=80)
        table = build_score_table(g, instances, seed=100 + seed)
        observer = ObservationBuilder(table)
        train_set, heldout = instances[:50], instances[50:]

        untrained_tc = evaluate_tc(g, heldout, ToyPolicy(), observer)
        mixed = ToyPolicy()
        train(g, train_set, mixed,
              TrainingConfig(mixing_ratio=0.5, epochs=20, seed=seed),
              dev_instances=heldout, observer=observer)
        mixed_tc = evaluate_tc(g, heldout, mixed, observer)
        teacher = ToyPolicy()
        train(g, train_set, teacher,
              TrainingConfig(mixing_ratio=0.0, epochs=20, seed=seed),
              dev_instances=heldout, observer=observer)
        teacher_tc = evaluate_tc(g, heldout, teacher, observer)

        ok = (mixed_tc - untrained_tc >= 0.20) and (mixed_tc - teacher_tc >= 0.05)
        passes.append(ok)
        details.append(f"seed {seed}: untrained {untrained_tc:.2f} mixed {mixed_tc:.2f} "
                       f"teacher-only {teacher_tc:.2f} -> {'pass' if ok else 'fail'}")
    elapsed = time.monotonic() - start
    with capsys.disabled():
        for line in details:
            print("  " + line)
        report("mixed forcing beats untrained by >=20 TC points and pure teacher "
               "forcing by >=5 on held-out instances (majority of 3 seeds)",
               sum(passes) >= 2 and elapsed < 300.0,
               f"{sum(passes)}/3 seeds, {elapsed:.0f}s")


def test_toy_gradient_matches_finite_differences(capsys, line_graph):
    from streetnav.graph import NavInstance
    from streetnav.policies import EpisodeContext
    inst = NavInstance("i", "A", 90.0, "E", ["A", "B", "C", "D", "E"], "go",
                       landmarks=["the cafe"])
    rng = random.Random(55)
    rng_np = np.random.default_rng(55)
    directions = ["left", "slightly left", "ahead", "slightly right", "right"]
    batch = []
    for t in range(1, 7):
        obs = Observation(rng.choice([None, 3, 4]),
                          tuple(sighting("the cafe", rng.choice(directions))
                                for _ in range(rng.randint(0, 1))))
        ctx = EpisodeContext(line_graph, inst, AgentState("B", 90.0), t, obs,
                             rng.randint(0, 5))
        batch.append(ReferenceStep("", ctx, rng.choice(list(Action))))
    eps, worst = 1e-6, 0.0
    for _ in range(20):
        pol = ToyPolicy()
        pol.weights = rng_np.normal(0, 1, size=pol.weights.shape)
        analytic = pol.gradient(batch)
        for i in range(pol.weights.shape[0]):
            for j in range(pol.weights.shape[1]):
                w0 = pol.weights[i, j]
                pol.weights[i, j] = w0 + eps
                hi = pol.loss(batch)
                pol.weights[i, j] = w0 - eps
                lo = pol.loss(batch)
                pol.weights[i, j] = w0
                worst = max(worst, abs(analytic[i, j] - (hi - lo) / (2 * eps)))
    with capsys.disabled():
        report("toy policy analytic gradient matches central finite differences (1e-5)",
               worst < 1e-5, f"max abs diff {worst:.2e} over 20 weight draws")


def test_extraction_response_worked_examples(capsys):
    four = parse_extraction_response(
        "1. a market\n2. a cathedral\n3. a Delicatessen\n4. a fire hall")
    none = parse_extraction_response("None")
    ok = list(four) == ["a market", "a cathedral", "a Delicatessen", "a fire hall"] \
        and len(none) == 0
    with capsys.disabled():
        report("extraction parsing reproduces the worked examples "
               "(4-landmark list; lone None)", ok)
