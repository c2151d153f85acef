"""Sweep decision noise and report pooled two-stage prediction accuracy.

Runs the full per-user pipeline (session 1 elicitation -> Bradley-Terry fit
-> personalized session 2 -> evaluation) for a cohort at each noise level
and prints the pooled accuracy on the both-acceptable bin.

Usage:
    python3 scripts/noise_sweep.py [--users 20] [--seeds 6] [--n 20000]
"""

import argparse

import numpy as np

from recourselab.dataset import synthesize
from recourselab.schema import default_schema
from recourselab.study import StudyConfig, sample_user, simulate_user_run
from recourselab.tree import train


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--users", type=int, default=20)
    p.add_argument("--seeds", type=int, default=6)
    p.add_argument("--n", type=int, default=20_000)
    p.add_argument("--taus", type=float, nargs="+",
                   default=[0.0, 0.5, 1.0, 2.0])
    args = p.parse_args()

    schema = default_schema()
    dataset = synthesize(args.n, seed=7)
    tree, accuracy = train(dataset, split_seed=7)
    print(f"tree: {len(tree.leaves())} leaves, test accuracy {accuracy:.4f}")

    cfg = StudyConfig()
    for tau in args.taus:
        hits = total = 0
        for seed in range(args.seeds):
            rng = np.random.default_rng(10_000 * seed + int(tau * 10))
            for _ in range(args.users):
                user = sample_user(rng, schema, tau=tau,
                                   unbounded_cap_prob=cfg.unbounded_cap_prob)
                run = simulate_user_run(tree, dataset, user,
                                        seed=int(rng.integers(2**31)), cfg=cfg)
                rep = run.report
                if rep.awp_accuracy is not None:
                    hits += round(rep.awp_accuracy * rep.n_awp_evaluated)
                    total += rep.n_awp_evaluated
        acc = hits / total if total else float("nan")
        print(f"tau={tau:<4} pooled accuracy {acc:.4f}  ({hits}/{total} pairs)")


if __name__ == "__main__":
    main()
