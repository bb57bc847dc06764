"""Claim suites for the four isolated-torus regimes, printed as tables."""

import argparse

from kronecker_tori.verify import HamRegime, RevRegime, ScanConfig, render_table, verify_theorem_suite

REGIMES = {
    "ham-noncompact": HamRegime(3, 3, "atropic", 0, (1, 2, 3)),
    "ham-compact": HamRegime(3, 3, "atropic", 0, (1, 2, 3), compact=True),
    "rev-noncompact": RevRegime(2, 2, 1, 0, 0, (1, 2)),
    "rev-compact": RevRegime(2, 2, 1, 0, 0, (1, 2), compact=True),
}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    scan = ScanConfig(n_samples=args.samples, seed=args.seed)
    for name, regime in REGIMES.items():
        print(f"== {name}")
        print(render_table(verify_theorem_suite(regime, scan)))
        print()


if __name__ == "__main__":
    main()
