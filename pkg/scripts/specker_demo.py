"""Slow convergence of the Picard iteration for the truncated monotone map.

With a_n = 1 - 2^(-floor(n/5)), prints d(x_n, Fix T) at n = 5K next to 2^(-K).
"""

import argparse

from fejer import problems


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kmax", type=int, default=20)
    args = ap.parse_args()
    N = 5 * (args.kmax + 4)
    p = problems.instance_specker_demo(truncation=N, steps=5 * args.kmax)
    tr = p.run()
    print(f"truncation N={N}, lumped tail <= {p.extra['tail_bound']:.3g}")
    print(f"{'K':>3} {'n':>5} {'x_n':>22} {'dist to Fix T':>14} {'2^-K':>10}")
    for K in range(1, args.kmax + 1):
        n = 5 * K
        print(f"{K:>3} {n:>5} {tr.x(n)[0]:>22.17g} {tr.value('dist', n):>14.6g} {2.0 ** -K:>10.3g}")


if __name__ == "__main__":
    main()
