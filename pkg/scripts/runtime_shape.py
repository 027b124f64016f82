"""Wall-clock time of full OMP and FR sequencing as the number of groups grows."""

import argparse

from groupseq.experiments import RuntimeConfig, runtime_shape


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--groups", type=int, nargs="+", default=[10, 20, 40, 80])
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--repeats", type=int, default=3)
    args = p.parse_args()

    shape = runtime_shape(RuntimeConfig(n=args.n, group_counts=args.groups, repeats=args.repeats))
    print(f"{'J':>4} {'omp (s)':>10} {'fr (s)':>10} {'fr/omp':>8}")
    for j, t in shape.items():
        print(f"{j:>4} {t['omp']:>10.4f} {t['fr']:>10.4f} {t['ratio']:>8.2f}")


if __name__ == "__main__":
    main()
