"""Certified indices next to the first index actually reaching each eps."""

import argparse

from fejer import problems, verify
from fejer.cli import certificate_table

DEFAULT = ("grad_quadratic", "best_approx_pair", "cfp_wedge", "min_norm", "contraction", "dr_lines")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("names", nargs="*", default=list(DEFAULT))
    args = ap.parse_args()
    print(f"{'instance':18} {'eps':>6} {'first hit':>10} {'dist index':>11} {'cauchy index':>13}")
    for name in args.names:
        p = problems.get_instance(name)
        rows = certificate_table(p, verify.DEFAULT_EPS)
        tr = p.run(max(r["cauchy_index"] for r in rows) + verify.DOMINANCE_WINDOW)
        for r in rows:
            hit = tr.first_below("dist", r["eps"])
            print(f"{name:18} {r['eps']:>6g} {str(hit):>10} {r['dist_index']:>11} {r['cauchy_index']:>13}")


if __name__ == "__main__":
    main()
