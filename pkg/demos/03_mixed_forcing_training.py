"""Train the toy linear policy with the mixed teacher/student loop.

Half the training steps replay the gold actions (teacher forcing); the other
half let the policy drive itself, keeping its own actions as references when
the rollout stops within one node of the target and otherwise asking a
shortest-path oracle for the optimal action at every visited state.

The synthetic worlds are built so this difference matters: the stop landmark
comes into view two nodes early, looking exactly like the at-target view, so
pure gold imitation cannot decide when to stop. Student rollouts discover
the robust strategy instead -- walk past, turn around when the landmark sits
off to the side, and stop on the return visit.

Run:  python demos/03_mixed_forcing_training.py   (~15 s)
"""

from streetnav import ObservationBuilder, ToyPolicy
from streetnav.synthetic import build_score_table, generate_synthetic
from streetnav.training import TrainingConfig, evaluate_tc, train


def run(mixing_ratio, label, g, train_set, heldout, observer, seed):
    policy = ToyPolicy()
    cfg = TrainingConfig(mixing_ratio=mixing_ratio, epochs=20, seed=seed)
    reports = train(g, train_set, policy, cfg, dev_instances=heldout,
                    observer=observer)
    curve = " ".join(f"{r.dev_tc:.2f}" for r in reports)
    tc = evaluate_tc(g, heldout, policy, observer)
    print(f"{label:<24} held-out TC {tc:.2f}   dev curve: {curve}")
    return tc


def main():
    g, instances = generate_synthetic(seed=101, n_nodes=60, intersection_ratio=0.45,
                                      n_instances=80)
    observer = ObservationBuilder(build_score_table(g, instances, seed=101))
    train_set, heldout = instances[:50], instances[50:]

    untrained = evaluate_tc(g, heldout, ToyPolicy(), observer)
    print(f"{'untrained':<24} held-out TC {untrained:.2f}")
    mixed = run(0.5, "mixed forcing (0.5)", g, train_set, heldout, observer, seed=1)
    teacher = run(0.0, "teacher forcing only", g, train_set, heldout, observer, seed=1)
    print(f"\nmixed - untrained = {mixed - untrained:+.2f}  "
          f"mixed - teacher = {mixed - teacher:+.2f}")


if __name__ == "__main__":
    main()
