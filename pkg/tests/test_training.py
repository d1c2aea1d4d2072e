import io
import json
import random

import pytest

from streetnav.env import Action, AgentState, step_modified
from streetnav.episode import ObservationBuilder, run_episode
from streetnav.graph import NavInstance, build_graph, derive_gold_actions
from streetnav.landmarks import ScoreTable
from streetnav.metrics import task_completion
from streetnav.policies import ConstantPolicy, OraclePolicy, PolicyError, ToyPolicy
from streetnav.training import (Branch, TrainingConfig, cross_entropy, evaluate_tc,
                                forcing_step, store_training_report, train)

from conftest import make_line_graph


def straight_world(n=8, cue_at_target_only=True):
    """Tiny hand-built world: one straight street, stop cue at the target."""
    g = make_line_graph(n)
    names = sorted(g.nodes)
    inst = NavInstance("tiny", names[0], 90.0, names[-2],
                       gold_path=names[:-1], instructions="Stop at the cafe.",
                       landmarks=["the cafe"])
    table = ScoreTable()
    table.add_stats("the cafe", 10.0, 2.0)
    table.add_raw("the cafe", inst.target_node, 0, 10.0 + 2.0 * 5.0)
    if not cue_at_target_only:
        table.add_raw("the cafe", inst.gold_path[-3], 0, 10.0 + 2.0 * 5.0)
    return g, inst, ObservationBuilder(table)


class TestForcingStep:
    def test_zero_ratio_always_teacher(self, synthetic_world, synthetic_observer):
        g, instances, _ = synthetic_world
        cfg = TrainingConfig(mixing_ratio=0.0, seed=1)
        rng = random.Random(1)
        pol = ToyPolicy()
        for inst in instances[:10]:
            ref, _ = forcing_step(g, inst, pol, cfg, rng, synthetic_observer)
            assert ref.branch is Branch.TEACHER

    def test_teacher_references_are_gold(self, synthetic_world, synthetic_observer):
        g, instances, _ = synthetic_world
        inst = instances[0]
        cfg = TrainingConfig(mixing_ratio=0.0, seed=1)
        ref, _ = forcing_step(g, inst, ToyPolicy(), cfg, random.Random(1),
                              synthetic_observer)
        gold = derive_gold_actions(g, inst)
        assert [s.action for s in ref.steps] == list(gold.actions)

    def test_full_ratio_with_oracle_policy_is_student_self(self, synthetic_world,
                                                           synthetic_observer):
        g, instances, _ = synthetic_world
        cfg = TrainingConfig(mixing_ratio=1.0, seed=2)
        rng = random.Random(2)
        oracle = OraclePolicy()
        for inst in instances[:10]:
            ref, loss = forcing_step(g, inst, oracle, cfg, rng, synthetic_observer)
            assert ref.branch is Branch.STUDENT_SELF
            # references are the rollout's own actions
            assert ref.steps[-1].action is Action.STOP
            assert loss == pytest.approx(0.0, abs=1e-6)

    def test_failed_student_gets_oracle_references(self, synthetic_world,
                                                   synthetic_observer):
        g, instances, _ = synthetic_world
        turny = next(i for i in instances
                     if any(a in (Action.LEFT, Action.RIGHT)
                            for a in derive_gold_actions(g, i).actions))
        cfg = TrainingConfig(mixing_ratio=1.0, seed=3)
        ref, _ = forcing_step(g, turny, ConstantPolicy(Action.FORWARD), cfg,
                              random.Random(3), synthetic_observer)
        assert ref.branch is Branch.STUDENT_ORACLE
        # Hand-trace: the forward-only rollout leaves the gold route at the
        # turn, so at least one oracle reference must be a non-forward action.
        assert any(s.action is not Action.FORWARD for s in ref.steps)

    def test_oracle_references_reach_target_closed_loop(self, synthetic_world,
                                                        synthetic_observer):
        g, instances, _ = synthetic_world
        inst = next(i for i in instances
                    if any(a in (Action.LEFT, Action.RIGHT)
                           for a in derive_gold_actions(g, i).actions))
        cfg = TrainingConfig(mixing_ratio=1.0, seed=4)
        ref, _ = forcing_step(g, inst, ConstantPolicy(Action.FORWARD), cfg,
                              random.Random(4), synthetic_observer)
        # Replaying oracle-next-action from the rollout's start state reaches
        # the target (oracle soundness inside the training loop).
        from streetnav.policies import oracle_next_action
        state = AgentState(inst.start_node, inst.start_heading_deg)
        for _ in range(100):
            a = oracle_next_action(g, state, inst.target_node)
            if a is Action.STOP:
                break
            state = step_modified(g, state, a).next_state
        assert state.node == inst.target_node

    def test_student_self_rollout_completed_task(self, synthetic_world,
                                                 synthetic_observer):
        g, instances, _ = synthetic_world
        cfg = TrainingConfig(mixing_ratio=1.0, seed=5)
        oracle = OraclePolicy()
        ref, _ = forcing_step(g, instances[0], oracle, cfg, random.Random(5),
                              synthetic_observer)
        assert ref.branch is Branch.STUDENT_SELF
        log = run_episode(g, instances[0], oracle, observer=synthetic_observer)
        assert task_completion(g, log, instances[0]) == 1

    def test_policy_failure_propagates(self, synthetic_world, synthetic_observer):
        g, instances, _ = synthetic_world

        class Broken(ToyPolicy):
            def score(self, prompt, context):
                raise PolicyError("endpoint unreachable")

        cfg = TrainingConfig(mixing_ratio=1.0, seed=6)
        with pytest.raises(PolicyError):
            forcing_step(g, instances[0], Broken(), cfg, random.Random(6),
                         synthetic_observer)

    def test_oracle_branch_hand_trace_on_fixture(self):
        # Always-forward student on the 4-way fixture route v2->v3->v6: the
        # rollout drifts to v5 (forward median), misses the target, and the
        # oracle references at the visited states must read forward at v2,
        # right at v3 (toward the 50-degree edge), then corrections.
        from streetnav.fixtures import four_way
        g = four_way()
        inst = NavInstance("fix", "v2", 20.0, "v6", ["v2", "v3", "v6"],
                           "Turn right at the intersection.")
        cfg = TrainingConfig(mixing_ratio=1.0, seed=20, max_steps=6)
        ref, _ = forcing_step(g, inst, ConstantPolicy(Action.FORWARD), cfg,
                              random.Random(20))
        assert ref.branch is Branch.STUDENT_ORACLE
        assert [s.context.state.node for s in ref.steps[:2]] == ["v2", "v3"]
        assert ref.steps[0].action is Action.FORWARD
        assert ref.steps[1].action is Action.RIGHT

    def test_branch_frequencies_within_binomial_bound(self, synthetic_world,
                                                      synthetic_observer):
        g, instances, _ = synthetic_world
        cfg = TrainingConfig(mixing_ratio=0.5, seed=7)
        rng = random.Random(7)
        pol = OraclePolicy()
        n = 400
        teacher = 0
        for k in range(n):
            ref, _ = forcing_step(g, instances[k % len(instances)], pol, cfg, rng,
                                  synthetic_observer)
            teacher += ref.branch is Branch.TEACHER
        # 3 sigma of Binomial(400, 0.5)
        assert abs(teacher - n * 0.5) <= 3 * (n * 0.25) ** 0.5


class TestCrossEntropy:
    def test_uniform_scores_give_log_k(self, synthetic_world, synthetic_observer):
        g, instances, _ = synthetic_world
        cfg = TrainingConfig(mixing_ratio=0.0, seed=8)
        pol = ToyPolicy()
        ref, loss = forcing_step(g, instances[0], pol, cfg, random.Random(8),
                                 synthetic_observer)
        # loss reported before the update: uniform over 5 actions
        import math
        assert loss == pytest.approx(math.log(5), abs=1e-9)


class TestTrain:
    def test_deterministic_loss_curves(self, synthetic_world, synthetic_observer):
        g, instances, _ = synthetic_world
        cfg = TrainingConfig(mixing_ratio=0.5, epochs=4, seed=9)
        r1 = train(g, instances[:10], ToyPolicy(), cfg, dev_instances=instances[10:14],
                   observer=synthetic_observer)
        r2 = train(g, instances[:10], ToyPolicy(), cfg, dev_instances=instances[10:14],
                   observer=synthetic_observer)
        assert [r.mean_loss for r in r1] == [r.mean_loss for r in r2]
        assert [r.dev_tc for r in r1] == [r.dev_tc for r in r2]
        assert [r.branches for r in r1] == [r.branches for r in r2]

    def test_single_trivial_instance_reaches_tc_one_quickly(self):
        g, inst, observer = straight_world()
        pol = ToyPolicy()
        cfg = TrainingConfig(mixing_ratio=0.5, epochs=5, seed=10)
        train(g, [inst], pol, cfg, dev_instances=[inst], observer=observer)
        assert evaluate_tc(g, [inst], pol, observer) == 1.0

    def test_best_epoch_weights_restored(self, synthetic_world, synthetic_observer):
        g, instances, _ = synthetic_world
        cfg = TrainingConfig(mixing_ratio=0.5, epochs=6, seed=11)
        pol = ToyPolicy()
        reports = train(g, instances[:12], pol, cfg, dev_instances=instances[12:18],
                        observer=synthetic_observer)
        best = max(r.dev_tc for r in reports)
        final = evaluate_tc(g, instances[12:18], pol, synthetic_observer,
                            cfg.max_steps)
        assert final == pytest.approx(best)

    def test_report_serialization(self, synthetic_world, synthetic_observer):
        g, instances, _ = synthetic_world
        cfg = TrainingConfig(mixing_ratio=0.5, epochs=2, seed=12)
        reports = train(g, instances[:6], ToyPolicy(), cfg,
                        dev_instances=instances[6:9], observer=synthetic_observer)
        buf = io.StringIO()
        store_training_report(reports, buf)
        lines = [json.loads(l) for l in buf.getvalue().splitlines()]
        assert [l["epoch"] for l in lines] == [1, 2]
        for line in lines:
            assert set(line) == {"epoch", "mean_loss", "dev_tc", "branches"}
            assert set(line["branches"]) == {"teacher", "self", "oracle"}

    def test_invalid_mixing_ratio_rejected(self):
        with pytest.raises(ValueError):
            TrainingConfig(mixing_ratio=1.5)

    def test_skipped_instances_counted(self, synthetic_world, synthetic_observer):
        g, instances, _ = synthetic_world

        class Flaky(ToyPolicy):
            def score(self, prompt, context):
                raise PolicyError("down")

        cfg = TrainingConfig(mixing_ratio=1.0, epochs=1, seed=13)
        reports = train(g, instances[:5], Flaky(), cfg, dev_instances=instances[5:7],
                        observer=synthetic_observer)
        assert reports[0].skipped == 5
