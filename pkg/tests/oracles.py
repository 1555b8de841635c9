"""Independent reference computations used by the tests.

Nothing here imports the package: each oracle recomputes a quantity from
first principles (exact rationals, brute-force scans, grid minimisation).
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def floor_div(num: Fraction, den: Fraction) -> int:
    return math.floor(Fraction(num) / Fraction(den))


def ceil_div(num: Fraction, den: Fraction) -> int:
    return math.ceil(Fraction(num) / Fraction(den))


def q(x) -> Fraction:
    return Fraction(x)


def theta_scan(term, n: int, limit: int = 10**6) -> int:
    """Least t with ``sum_{k<=t} term(k) >= n`` by direct summation."""
    if n == 0:
        return 0
    s = Fraction(0)
    for k in range(limit):
        s += Fraction(term(k))
        if s >= n:
            return k
    raise ValueError("no index within limit")


def alt_proj_rate(rho, b, eps) -> int:
    return floor_div(q(rho) ** 2 + q(b) ** 2, q(eps) ** 2) + 1


def grad_rate(b, eps) -> int:
    return floor_div(32 * (q(b) + 1) ** 2, q(eps) ** 2)


def mann_rate(lam, b, eps) -> int:
    lam = q(lam)
    return theta_scan(lambda k: lam * (1 - lam), ceil_div(4 * (q(b) + 1) ** 2, q(eps) ** 2))


def ppa_rate(gamma, b, eps) -> int:
    g = q(gamma)
    return theta_scan(lambda k: g * g, ceil_div(2 * q(b) ** 2, q(eps) ** 2)) + 1


def binom_middle(n: int) -> int:
    """``C(n, floor(n/2))`` by Pascal's triangle."""
    row = [1]
    for _ in range(n):
        row = [a + b for a, b in zip([0] + row, row + [0])]
    return row[n // 2]


def semialgebraic_gamma(n: int, d: int) -> Fraction:
    return min(Fraction((2 * d - 1) ** n + 1, 2), Fraction(binom_middle(n - 1) * d**n))


def prox_grid_1d(f, x: float, gamma: float, lo=-10.0, hi=10.0, pts=200001) -> float:
    """Minimiser of ``f(y) + (x - y)^2 / (2 gamma)`` over a fine grid."""
    ys = np.linspace(lo, hi, pts)
    vals = f(ys) + (x - ys) ** 2 / (2 * gamma)
    return float(ys[int(np.argmin(vals))])


def dist_to_quadrant(x) -> float:
    """Distance to ``{x1 <= 0, x2 <= 0}``."""
    return float(np.linalg.norm(np.maximum(np.asarray(x, dtype=float), 0.0)))


def polyhedron_distance_brute(A, b, x, grid: int = 801, box: float = 4.0) -> float:
    """Distance from ``x`` to ``{y : A y <= b}`` in the plane by grid scan (coarse upper bound)."""
    t = np.linspace(-box, box, grid)
    X, Y = np.meshgrid(t, t)
    P = np.stack([X.ravel(), Y.ravel()], axis=1)
    ok = np.all(P @ np.asarray(A, float).T <= np.asarray(b, float) + 1e-12, axis=1)
    return float(np.min(np.linalg.norm(P[ok] - np.asarray(x, float), axis=1)))
