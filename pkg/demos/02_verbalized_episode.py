"""Run one full verbalized episode on a synthetic street world.

Builds a deterministic world (graph, instances, landmark score table), lets
the shortest-path oracle navigate one instance, and prints the exact prompt
an external language model would be asked to continue at every step,
followed by the navigation metrics.

Run:  python demos/02_verbalized_episode.py
"""

from streetnav import (ObservationBuilder, OraclePolicy, derive_gold_actions,
                       evaluate_episode, run_episode)
from streetnav.synthetic import build_score_table, generate_synthetic, route_turn_nodes


def main():
    g, instances = generate_synthetic(seed=5, n_nodes=60, intersection_ratio=0.45,
                                      n_instances=12)
    table = build_score_table(g, instances, seed=5)
    observer = ObservationBuilder(table)

    inst = next(i for i in instances if route_turn_nodes(g, i))
    print(f"instance {inst.id}: {len(inst.gold_path) - 1} edges, "
          f"landmarks {inst.landmarks}")
    print(f"instructions: {inst.instructions}\n")

    log = run_episode(g, inst, OraclePolicy(), observer=observer)
    print("final prompt fed to the action scorer:\n")
    print(log.steps[-1].prompt + " " + log.steps[-1].action.literal)

    gold = derive_gold_actions(g, inst)
    res = evaluate_episode(g, log, inst, gold)
    print(f"\nmetrics: TC={res.tc} SPD={res.spd} KPA={res.kpa:.2f}")
    for v in res.verdicts:
        print(f"  keypoint {v.label:<12} at {v.node}: expected {v.expected.literal:<12}"
              f" observed {v.observed.literal if v.observed else 'never visited':<12}"
              f" {'ok' if v.correct else 'X'}")


if __name__ == "__main__":
    main()
