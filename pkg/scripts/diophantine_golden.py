"""Empirical Diophantine constant of (1, golden ratio) as the search radius grows."""

import math

from kronecker_tori.verify import diophantine_scan


def main() -> None:
    omega = (1.0, (1 + math.sqrt(5)) / 2)
    print(f"{'J_max':>6}  {'gamma_hat':>10}  worst j")
    for J in (1, 2, 5, 10, 20, 50, 100, 200):
        rep = diophantine_scan(omega, 1.0, J)
        print(f"{J:>6}  {rep.gamma_hat:>10.6f}  {rep.worst_j}")


if __name__ == "__main__":
    main()
