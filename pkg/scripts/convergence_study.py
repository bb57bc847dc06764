"""Self-convergence of RK4 and implicit midpoint on a compact d = 0 system."""

import argparse
from fractions import Fraction

from kronecker_tori.dynamics import State, self_convergence
from kronecker_tori.systems import Kind, build_ham_params, make_system, plan_parameters


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T", type=float, default=10.0)
    ap.add_argument("--levels", type=int, default=4)
    args = ap.parse_args()
    skel = plan_parameters(3, 3, "atropic", 0)
    system = make_system(build_ham_params(skel, (1, Fraction(3, 2), Fraction(1, 2)), Kind.HAM_COMPACT))
    start = State.from_parts(system, u=[0.4], p=[0.3], q=[0.2])
    for method, dt, order in (("rk4", 0.1, 4), ("midpoint", 0.02, 2)):
        study = self_convergence(system, start, method, dt, args.T, levels=args.levels)
        print(f"{method}: expected ratio {2 ** order}")
        for h, e in zip(study.dts, study.errors):
            print(f"  dt={h:<10.5g} error={e:.3e}")
        print("  ratios: " + ", ".join(f"{r:.2f}" for r in study.ratios))


if __name__ == "__main__":
    main()
