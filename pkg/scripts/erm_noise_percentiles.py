"""95th percentile of the noise on the test error of private logistic regression.

Grid over dataset size n and the test budget eps2, lambda = 1, 70/30 split.
"""

import argparse
import csv
from pathlib import Path

from odpacct.erm import noise_percentile


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--absolute", action="store_true", help="percentile of |r| instead of r")
    ap.add_argument("--out", default="erm_noise_percentiles.csv")
    args = ap.parse_args()

    ns = list(range(250, 2001, 250))
    eps2s = [0.05, 0.1, 0.2, 0.5, 1.0]
    table = {e: [noise_percentile(n, e, args.lam, absolute=args.absolute) for n in ns] for e in eps2s}
    out = Path(args.out)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "eps2", "percentile"])
        for e in eps2s:
            w.writerows([n, e, v] for n, v in zip(ns, table[e]))
    print(f"wrote {out}")

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for e in eps2s:
        ax.plot(ns, table[e], "o-", label=f"eps2 = {e:g}")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("95th percentile of test-error noise")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out.with_suffix(".png"), dpi=150)
    print(f"wrote {out.with_suffix('.png')}")


if __name__ == "__main__":
    main()
