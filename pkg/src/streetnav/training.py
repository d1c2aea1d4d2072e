"""Training harness mixing teacher forcing with student-forced rollouts.

Each training step flips a mixing-ratio coin. Teacher passes replay the gold
action sequence and use it as the reference. Student passes let the policy
drive; when the rollout completes the task its own actions become the
reference (stopping anywhere within one node of the target is rewarded, not
penalized), otherwise a shortest-path oracle supplies the optimal
counterfactual action at every state the student actually visited. The loss
is the mean cross-entropy of the policy's scores against the references, and
the policy's update hook is invoked once per step with the reference batch.
"""

from __future__ import annotations

import enum
import json
import math
import random
from dataclasses import dataclass, field
from typing import IO, Sequence

from .env import Semantics
from .episode import DEFAULT_MAX_STEPS, EpisodeLog, ObservationBuilder, run_episode
from .graph import GoldActionSequence, NavGraph, NavInstance, derive_gold_actions
from .metrics import task_completion
from .policies import (ACTIONS, EpisodeContext, OraclePolicy, Policy, PolicyError,
                       ReferenceStep, ScriptedPolicy, decode_action)


class Branch(enum.Enum):
    TEACHER = "teacher"
    STUDENT_SELF = "self"
    STUDENT_ORACLE = "oracle"


@dataclass
class TrainingConfig:
    mixing_ratio: float = 0.5
    epochs: int = 20
    seed: int = 0
    learning_rate: float = 2.0
    max_steps: int = DEFAULT_MAX_STEPS
    dev_fraction: float = 0.2

    def __post_init__(self):
        if not 0.0 <= self.mixing_ratio <= 1.0:
            raise ValueError(f"mixing ratio must be in [0, 1], got {self.mixing_ratio}")


@dataclass
class TrainingReference:
    branch: Branch
    steps: list[ReferenceStep]


def cross_entropy(policy: Policy, steps: Sequence[ReferenceStep]) -> float:
    """Mean cross-entropy of the policy's current scores vs the references."""
    total = 0.0
    for step in steps:
        scores = policy.score(step.prompt, step.context)
        zs = [scores[a] for a in ACTIONS]
        zmax = max(zs)
        logsum = zmax + math.log(sum(math.exp(z - zmax) for z in zs))
        total -= scores[step.action] - logsum
    return total / len(steps) if steps else 0.0


def forcing_step(g: NavGraph, inst: NavInstance, policy: Policy, cfg: TrainingConfig,
                 rng: random.Random, observer: ObservationBuilder | None = None,
                 gold: GoldActionSequence | None = None,
                 oracle: OraclePolicy | None = None) -> tuple[TrainingReference, float]:
    """One mixed-forcing training step on one instance.

    Raises PolicyError when the driving policy fails mid-rollout; the caller
    counts the skip and moves on.
    """
    gold = gold or derive_gold_actions(g, inst)
    oracle = oracle or OraclePolicy()

    if rng.random() < cfg.mixing_ratio:
        log = run_episode(g, inst, policy, Semantics.MODIFIED, cfg.max_steps, observer)
        if log.aborted:
            raise PolicyError(log.abort_reason or "student rollout aborted")
        if task_completion(g, log, inst) == 1:
            assert log.stopped, "task completion implies the rollout stopped"
            reference = TrainingReference(
                Branch.STUDENT_SELF,
                [ReferenceStep(rec.prompt, rec.context, rec.action) for rec in log.steps])
        else:
            reference = TrainingReference(
                Branch.STUDENT_ORACLE,
                [ReferenceStep(rec.prompt, rec.context,
                               decode_action(oracle.score(rec.prompt, rec.context)))
                 for rec in log.steps])
    else:
        log = run_episode(g, inst, ScriptedPolicy(gold.actions), Semantics.MODIFIED,
                          max(cfg.max_steps, len(gold.actions)), observer)
        reference = TrainingReference(
            Branch.TEACHER,
            [ReferenceStep(rec.prompt, rec.context, rec.action) for rec in log.steps])

    loss = cross_entropy(policy, reference.steps)
    policy.update(reference.steps)
    return reference, loss


@dataclass
class EpochReport:
    epoch: int
    mean_loss: float
    dev_tc: float
    branches: dict[str, int] = field(default_factory=dict)
    skipped: int = 0


def evaluate_tc(g: NavGraph, instances: Sequence[NavInstance], policy: Policy,
                observer: ObservationBuilder | None = None,
                max_steps: int = DEFAULT_MAX_STEPS) -> float:
    if not instances:
        return 0.0
    total = 0
    for inst in instances:
        log = run_episode(g, inst, policy, Semantics.MODIFIED, max_steps, observer)
        total += task_completion(g, log, inst)
    return total / len(instances)


def train(g: NavGraph, instances: Sequence[NavInstance], policy: Policy,
          cfg: TrainingConfig, dev_instances: Sequence[NavInstance] | None = None,
          observer: ObservationBuilder | None = None) -> list[EpochReport]:
    """Run the full training loop; returns the per-epoch report.

    Deterministic for a fixed config seed. When the policy exposes
    snapshot/restore, the weights scoring best on the held-out split are
    restored at the end (ties keep the earliest epoch).
    """
    if not instances:
        raise ValueError("no training instances")
    rng = random.Random(cfg.seed)
    instances = list(instances)
    if dev_instances is None:
        pool = instances[:]
        rng.shuffle(pool)
        n_dev = max(1, int(len(pool) * cfg.dev_fraction))
        dev_instances, instances = pool[:n_dev], pool[n_dev:]
        if not instances:
            raise ValueError("dev split consumed every instance")

    gold = {inst.id: derive_gold_actions(g, inst) for inst in instances}
    oracle = OraclePolicy()
    can_snapshot = hasattr(policy, "snapshot") and hasattr(policy, "restore")
    best_tc, best_weights = -1.0, None
    reports: list[EpochReport] = []
    for epoch in range(1, cfg.epochs + 1):
        order = instances[:]
        rng.shuffle(order)
        losses: list[float] = []
        branches = {b.value: 0 for b in Branch}
        skipped = 0
        for inst in order:
            try:
                reference, loss = forcing_step(g, inst, policy, cfg, rng, observer,
                                               gold=gold[inst.id], oracle=oracle)
            except PolicyError:
                skipped += 1
                continue
            branches[reference.branch.value] += 1
            losses.append(loss)
        dev_tc = evaluate_tc(g, dev_instances, policy, observer, cfg.max_steps)
        reports.append(EpochReport(
            epoch=epoch,
            mean_loss=sum(losses) / len(losses) if losses else 0.0,
            dev_tc=dev_tc,
            branches=branches,
            skipped=skipped,
        ))
        if can_snapshot and dev_tc > best_tc:
            best_tc, best_weights = dev_tc, policy.snapshot()
    if can_snapshot and best_weights is not None:
        policy.restore(best_weights)
    return reports


def store_training_report(reports: Sequence[EpochReport], path_or_file: str | IO[str]) -> None:
    """JSON-lines, one epoch per line."""
    def dump(fh: IO[str]) -> None:
        for r in reports:
            fh.write(json.dumps({
                "epoch": r.epoch,
                "mean_loss": r.mean_loss,
                "dev_tc": r.dev_tc,
                "branches": {
                    "teacher": r.branches.get("teacher", 0),
                    "self": r.branches.get("self", 0),
                    "oracle": r.branches.get("oracle", 0),
                },
            }) + "\n")

    if hasattr(path_or_file, "write"):
        dump(path_or_file)
    else:
        with open(path_or_file, "w", encoding="utf-8") as fh:
            dump(fh)
