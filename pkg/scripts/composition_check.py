"""Monte-Carlo distinguishing test of the ledger against adaptive strategies.

Each scripted strategy should come out "consistent"; the canary, which
declares a guarantee its mechanism does not meet, should come out "violated".
"""

import argparse
import time

from odpacct.verify import SCRIPTED_STRATEGIES, run_canary, run_scripted


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    jobs = [(name, lambda n=name: run_scripted(n, args.runs, args.seed)) for name in SCRIPTED_STRATEGIES]
    jobs.append(("canary", lambda: run_canary(args.runs, args.seed)))
    for name, job in jobs:
        t0 = time.perf_counter()
        res = job()
        print(f"{name:>12}: {res.verdict:<10} ({time.perf_counter() - t0:.1f}s)")


if __name__ == "__main__":
    main()
