"""Fewest eps = 0.1 steps at which optimal composition beats simple composition."""

import argparse

from odpacct.iterative import REFERENCE_CUTOFFS, cutoff_interpretation_note, min_iterations_for_advantage


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, default=0.1)
    args = ap.parse_args()

    deltas = list(REFERENCE_CUTOFFS)
    got = [min_iterations_for_advantage(args.eps, d) for d in deltas]
    print(f"{'delta':>8} {'computed':>9} {'reference':>10}")
    for d, k in zip(deltas, got):
        print(f"{d:>8.0e} {k:>9d} {REFERENCE_CUTOFFS[d]:>10d}")
    note = cutoff_interpretation_note(args.eps, deltas, got)
    if note:
        print()
        print(note)


if __name__ == "__main__":
    main()
