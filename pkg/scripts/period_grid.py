"""Measured rotation frequency of the exceptional torus against the closed form."""

import argparse
import csv
import sys

from kronecker_tori.dynamics import measure_exceptional_period


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--periods", type=int, default=20)
    ap.add_argument("-o", "--output", help="CSV path (default: stdout)")
    args = ap.parse_args()
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    w = csv.writer(out)
    w.writerow(["l", "chi", "xi1", "measured", "closed_form", "relative_error"])
    for l in (1, 2):
        for chi in (0.25, 1.0, 4.0):
            for xi in (0.0, 1.0, 3.0):
                m = measure_exceptional_period(l, chi, xi, periods=args.periods)
                w.writerow([l, chi, xi, f"{m.measured:.15g}", f"{m.closed_form:.15g}", f"{m.relative_error:.3e}"])


if __name__ == "__main__":
    main()
