"""Operator entry points.

Subcommands: env-check, graph-gen, run, evaluate, train, dump-prompt,
extract. Config errors exit 2; runtime failures exit 1 with whatever partial
outputs already exist; success exits 0. The external endpoint URL resolves
flag > STREETNAV_ENDPOINT environment variable > config file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .env import Action, Semantics
from .episode import DEFAULT_MAX_STEPS, ObservationBuilder, run_episode, store_episode
from .fixtures import check_comparison_table, COMPARISON_TABLE, FIXTURE_BUILDERS
from .graph import (derive_gold_actions, load_graph, load_instances, store_graph,
                    store_instances)
from .landmarks import (DEFAULT_TAU, build_extraction_prompt, load_raw_scores,
                        load_stats, parse_extraction_response, store_raw_scores,
                        store_stats)
from .metrics import aggregate, evaluate_episode, store_report
from .policies import (ConstantPolicy, EndpointConfig, ExternalPolicy, OraclePolicy,
                       Policy, ScriptedPolicy, ToyPolicy, post_json, scores_for_action)
from .synthetic import build_score_table, generate_synthetic
from .training import TrainingConfig, evaluate_tc, store_training_report, train
from .verbalize import PromptParts, assemble_prompt, load_template_config

ENDPOINT_ENV_VAR = "STREETNAV_ENDPOINT"

CONFIG_EXIT = 2
RUNTIME_EXIT = 1


class ConfigError(Exception):
    pass


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CONFIG_EXIT
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="streetnav")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("env-check", help="replay the intersection comparison table")
    p.add_argument("--fixtures", help="JSON file overriding the built-in fixtures")
    p.set_defaults(func=cmd_env_check)

    p = sub.add_parser("graph-gen", help="generate a synthetic world")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nodes", type=int, default=60)
    p.add_argument("--intersection-ratio", type=float, default=0.45)
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_graph_gen)

    for name in ("run", "evaluate"):
        p = sub.add_parser(name, help=f"{name} episodes")
        _add_world_args(p)
        p.add_argument("--policy", default="oracle",
                       help="oracle | forward | gold | toy | external")
        p.add_argument("--weights", help="npz weights for the toy policy")
        p.add_argument("--semantics", choices=["original", "modified"], default="modified")
        p.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--instance-id", help="restrict to one instance")
        p.add_argument("--endpoint", help="external scoring endpoint URL")
        p.add_argument("--cassette", help="record/replay cassette for the external policy")
        p.add_argument("--replay-only", action="store_true",
                       help="never call the endpoint; cassette must answer")
        p.add_argument("--config", help="key=value config file (endpoint etc.)")
        p.add_argument("--template-config", help="prompt template overrides")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        p.add_argument("--out-dir", required=True)
        if name == "run":
            p.add_argument("--interactive", action="store_true",
                           help="type actions on stdin instead of using the policy")
            p.set_defaults(func=cmd_run)
        else:
            p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("train", help="train the toy policy with mixed forcing")
    _add_world_args(p)
    p.add_argument("--mixing-ratio", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--learning-rate", type=float, default=2.0)
    p.add_argument("--dev-fraction", type=float, default=0.2)
    p.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("dump-prompt", help="emit the exact prompt text for a step")
    _add_world_args(p)
    p.add_argument("--instance-id", required=True)
    p.add_argument("--episode", help="recorded episode JSON-lines")
    p.add_argument("--step", type=int, help="1-based step (default: last)")
    p.add_argument("--template-config")
    p.set_defaults(func=cmd_dump_prompt)

    p = sub.add_parser("extract", help="run the landmark extraction prompt")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--instructions-file")
    src.add_argument("--instructions")
    p.add_argument("--style", choices=["touchdown", "map2seq"], default="touchdown")
    p.add_argument("--endpoint", help="completion endpoint URL")
    p.add_argument("--config", help="key=value config file (endpoint etc.)")
    p.add_argument("--prompt-only", action="store_true",
                   help="print the prompt instead of calling the endpoint")
    p.set_defaults(func=cmd_extract)

    return parser


def _add_world_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", required=True)
    p.add_argument("--instances", required=True)
    p.add_argument("--stats", help="landmark stats JSON-lines")
    p.add_argument("--raw-scores", help="raw view scores JSON-lines")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)


def _require_files(*paths) -> None:
    for path in paths:
        if path and not Path(path).exists():
            raise ConfigError(f"file not found: {path}")


def _load_world(args):
    _require_files(args.graph, args.instances, getattr(args, "stats", None),
                   getattr(args, "raw_scores", None))
    g = load_graph(args.graph)
    instances = load_instances(args.instances, g)
    table = None
    if args.stats or args.raw_scores:
        if not (args.stats and args.raw_scores):
            raise ConfigError("--stats and --raw-scores go together")
        table = load_stats(args.stats)
        load_raw_scores(args.raw_scores, table)
    observer = ObservationBuilder(table, args.tau)
    return g, instances, observer


def resolve_endpoint(flag_value: str | None, config_path: str | None) -> str | None:
    """flag > environment > config file."""
    if flag_value:
        return flag_value
    env = os.environ.get(ENDPOINT_ENV_VAR)
    if env:
        return env
    if config_path:
        _require_files(config_path)
        with open(config_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line.startswith("endpoint="):
                    return line.partition("=")[2].strip()
    return None


def _prompt_parts_loader(args):
    path = getattr(args, "template_config", None)
    if not path:
        return None
    _require_files(path)
    return load_template_config(path)


def _make_policy_factory(args, g, instances):
    name = args.policy
    if name == "oracle":
        policy = OraclePolicy()
        return lambda inst: policy
    if name == "forward":
        policy = ConstantPolicy(Action.FORWARD)
        return lambda inst: policy
    if name == "gold":
        return lambda inst: ScriptedPolicy(derive_gold_actions(g, inst).actions)
    if name == "toy":
        policy = ToyPolicy()
        if args.weights:
            _require_files(args.weights)
            policy.restore(np.load(args.weights)["weights"])
        return lambda inst: policy
    if name == "external":
        url = resolve_endpoint(args.endpoint, args.config)
        if not url and not (args.cassette and args.replay_only):
            raise ConfigError(
                f"external policy needs --endpoint, ${ENDPOINT_ENV_VAR}, or a config file")
        cassette = None
        if args.cassette:
            from .policies import Cassette
            cassette = Cassette(args.cassette)
        policy = ExternalPolicy(EndpointConfig(url or "http://unset.invalid"),
                                cassette=cassette, replay_only=args.replay_only)
        return lambda inst: policy
    raise ConfigError(f"unknown policy {name!r}")


class InteractivePolicy(Policy):
    """Debug helper: prints the prompt, reads an action literal from stdin."""

    def score(self, prompt, context):
        print(f"\n--- step {context.t} at {context.state.node} "
              f"(heading {context.state.heading_deg:g}) ---")
        print(prompt)
        while True:
            line = input("action> ").strip()
            try:
                return scores_for_action(Action.from_literal(line))
            except ValueError:
                print(f"choose one of: {', '.join(a.literal for a in Action)}")


def cmd_env_check(args) -> int:
    table, builders = COMPARISON_TABLE, FIXTURE_BUILDERS
    if args.fixtures:
        _require_files(args.fixtures)
        table, builders = _load_fixture_override(args.fixtures)
    results = check_comparison_table(table, builders)
    rows = {}
    for res in results:
        key = (res.row.fixture, res.row.path)
        rows.setdefault(key, {})[res.semantics] = res
    print(f"{'intersection':<14}{'path':<18}{'original':<42}{'modified':<42}")
    failures = 0
    for (fixture, path), per_sem in rows.items():
        cells = []
        for sem in (Semantics.ORIGINAL, Semantics.MODIFIED):
            res = per_sem[sem]
            seq = ", ".join(a.literal for a in
                            (res.row.original if sem is Semantics.ORIGINAL else res.row.modified))
            mark = "ok" if res.ok else f"MISMATCH visited {'->'.join(res.visited)}"
            cells.append(f"[{seq}] {mark}")
            if not res.ok:
                failures += 1
                print(f"  expected {'->'.join(res.expected_path)}, "
                      f"visited {'->'.join(res.visited)}", file=sys.stderr)
        print(f"{fixture:<14}{'->'.join(path):<18}{cells[0]:<42}{cells[1]:<42}")
    print(f"{len(rows)} path cases, {failures} mismatches")
    return 0 if failures == 0 else RUNTIME_EXIT


def _load_fixture_override(path):
    """Fixture override file: {"fixtures": {name: {"approach_deg", "branches"}},
    "table": [{"fixture", "path", "original", "modified"}]}."""
    from .fixtures import ComparisonRow, _star

    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    builders = {}
    for name, spec in doc["fixtures"].items():
        builders[name] = (lambda s: (lambda: _star(s["approach_deg"], s["branches"])))(spec)
    table = tuple(
        ComparisonRow(
            row["fixture"], tuple(row["path"]),
            tuple(Action.from_literal(a) for a in row["original"]),
            tuple(Action.from_literal(a) for a in row["modified"]),
        )
        for row in doc["table"])
    return table, builders


def cmd_graph_gen(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    g, instances = generate_synthetic(args.seed, args.nodes, args.intersection_ratio,
                                      args.instances)
    table = build_score_table(g, instances, args.seed)
    store_graph(g, str(out / "graph.json"))
    store_instances(instances, str(out / "instances.jsonl"))
    store_stats(table, str(out / "stats.jsonl"))
    store_raw_scores(table, str(out / "raw_scores.jsonl"))
    print(f"wrote graph ({len(g.nodes)} nodes), {len(instances)} instances, "
          f"score table ({len(table.raw)} views) to {out}")
    return 0


def _select_instances(instances, instance_id):
    if instance_id is None:
        return instances
    chosen = [i for i in instances if i.id == instance_id]
    if not chosen:
        raise ConfigError(f"no instance with id {instance_id!r}")
    return chosen


def cmd_run(args) -> int:
    g, instances, observer = _load_world(args)
    instances = _select_instances(instances, args.instance_id)
    parts_base = _prompt_parts_loader(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    factory = (lambda inst: InteractivePolicy()) if args.interactive \
        else _make_policy_factory(args, g, instances)
    semantics = Semantics(args.semantics)
    for inst in instances:
        parts = _parts_for(parts_base, inst)
        log = run_episode(g, inst, factory(inst), semantics, args.max_steps,
                          observer, parts)
        store_episode(log, str(out / f"episode_{inst.id}.jsonl"))
        state = "stopped" if log.stopped else ("aborted" if log.aborted else "capped")
        print(f"{inst.id}: {len(log.steps)} steps, {state}, final {log.final_node}")
        if log.aborted:
            return RUNTIME_EXIT
    return 0


def _parts_for(base, inst):
    if base is None:
        return PromptParts(instructions=inst.instructions)
    from dataclasses import replace
    return replace(base, instructions=inst.instructions)


def cmd_evaluate(args) -> int:
    g, instances, observer = _load_world(args)
    instances = _select_instances(instances, args.instance_id)
    parts_base = _prompt_parts_loader(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    factory = _make_policy_factory(args, g, instances)
    semantics = Semantics(args.semantics)
    gold = {inst.id: derive_gold_actions(g, inst) for inst in instances}

    def work(inst):
        log = run_episode(g, inst, factory(inst), semantics, args.max_steps,
                          observer, _parts_for(parts_base, inst))
        return inst, log, evaluate_episode(g, log, inst, gold[inst.id])

    if args.workers > 1 and len(instances) > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(work, instances))
    else:
        rows = [work(inst) for inst in instances]

    results = []
    with open(out / "per_instance.jsonl", "w", encoding="utf-8") as fh:
        for inst, log, res in rows:
            store_episode(log, str(out / f"episode_{inst.id}.jsonl"))
            results.append(res)
            fh.write(json.dumps({"id": inst.id, "tc": res.tc, "spd": res.spd,
                                 "kpa": res.kpa}) + "\n")
    report = aggregate(results)
    store_report(report, str(out / "report.json"))
    print(f"n={report.n} TC={report.tc:.3f} SPD={report.spd:.3f} KPA={report.kpa:.3f}")
    return 0


def cmd_train(args) -> int:
    g, instances, observer = _load_world(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = TrainingConfig(mixing_ratio=args.mixing_ratio, epochs=args.epochs,
                         seed=args.seed, learning_rate=args.learning_rate,
                         max_steps=args.max_steps, dev_fraction=args.dev_fraction)
    policy = ToyPolicy(learning_rate=cfg.learning_rate)
    reports = train(g, instances, policy, cfg, observer=observer)
    store_training_report(reports, str(out / "training_report.jsonl"))
    np.savez(out / "weights.npz", weights=policy.weights)
    best = max(reports, key=lambda r: r.dev_tc)
    print(f"trained {cfg.epochs} epochs; best dev TC {best.dev_tc:.3f} "
          f"at epoch {best.epoch}; weights -> {out / 'weights.npz'}")
    return 0


def cmd_dump_prompt(args) -> int:
    g, instances, observer = _load_world(args)
    inst = _select_instances(instances, args.instance_id)[0]
    parts = _parts_for(_prompt_parts_loader(args), inst)
    if args.episode:
        _require_files(args.episode)
        from .episode import load_episode
        log = load_episode(args.episode, inst.id)
        last = args.step if args.step is not None else len(log.steps)
        if not 1 <= last <= len(log.steps):
            raise ConfigError(f"--step must be in 1..{len(log.steps)}")
        history = [(rec.observation, rec.action) for rec in log.steps[:last - 1]]
        current = log.steps[last - 1].observation
        print(assemble_prompt(parts, history, current))
    else:
        from .env import AgentState
        obs = observer.observe(g, inst, AgentState(inst.start_node, inst.start_heading_deg))
        print(assemble_prompt(parts, [], obs))
    return 0


def cmd_extract(args) -> int:
    if args.instructions_file:
        _require_files(args.instructions_file)
        with open(args.instructions_file, "r", encoding="utf-8") as fh:
            instructions = fh.read()
    else:
        instructions = args.instructions
    prompt = build_extraction_prompt(instructions, args.style)
    if args.prompt_only:
        print(prompt)
        return 0
    url = resolve_endpoint(args.endpoint, args.config)
    if not url:
        raise ConfigError(
            f"extraction needs --endpoint, ${ENDPOINT_ENV_VAR}, or a config file")
    response = post_json(url, {"prompt": prompt}, timeout_s=30.0)
    landmarks = parse_extraction_response(response["text"])
    print(json.dumps({"landmarks": list(landmarks)}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
