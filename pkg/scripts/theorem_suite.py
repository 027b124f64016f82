"""Check the approximation bound on random small instances and summarise the slack."""

import argparse

import numpy as np

from groupseq import theory


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    slacks, gammas, bad, lemma_bad = [], [], 0, 0
    for d, lam in theory.random_instances(args.seed, args.instances):
        rep = theory.check_theorem_bound(d, lam)
        slacks.append(rep.min_slack)
        gammas.append(rep.gamma)
        bad += rep.violations
        lemma_bad += rep.lemma_violations
    slacks = np.array(slacks)
    print(f"instances={args.instances} bound violations={bad} per-step violations={lemma_bad}")
    print(f"min slack={slacks.min():.3e} median slack={np.median(slacks):.3e}")
    print(f"gamma range=[{min(gammas):.3f}, {max(gammas):.3f}]")


if __name__ == "__main__":
    main()
