"""Moduli of regularity as printable, serialisable expression trees.

A modulus maps ``(0, inf)`` to ``(0, inf)`` and is nondecreasing.  Every
node computes an exact rational lower bound of its value (``lower``) from
the float parameters it was built with; calling a modulus converts that
bound to the largest float not above it.  Certified iteration indices
derived from a modulus are therefore never optimistic because of rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .core import ETA, ClosedBall, make_rng

Number = float | int | Fraction

PROBE_GRID = tuple(float(e) for e in np.logspace(-6, 3, 91))

_NODES: dict[str, type] = {}


def register(cls):
    _NODES[cls.kind] = cls
    return cls


def node_from_dict(d: dict):
    """Rebuild a modulus, rate or divergence-rate tree from its document."""
    try:
        cls = _NODES[d["kind"]]
    except KeyError:
        raise ValueError(f"unknown node kind {d.get('kind')!r}") from None
    return cls.from_dict(d)


def _frac(x: Number) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float) and not math.isfinite(x):
        raise ValueError(f"non-finite argument {x}")
    return Fraction(x)


def float_down(q: Fraction) -> float:
    """Largest float not exceeding ``q``."""
    f = float(q)
    if Fraction(f) > q:
        f = math.nextafter(f, -math.inf)
    return f


def float_up(q: Fraction) -> float:
    f = float(q)
    if Fraction(f) < q:
        f = math.nextafter(f, math.inf)
    return f


def _pow_lower(base: Fraction, p: float) -> Fraction:
    """Rational lower bound of ``base ** p`` for ``base >= 0``."""
    if float(p).is_integer():
        return base ** int(p)
    b = float_down(base)
    v = b**p
    for _ in range(3):
        v = math.nextafter(v, 0.0)
    return Fraction(max(v, 0.0))


def _pow_upper(base: Fraction, p: float) -> Fraction:
    if float(p).is_integer():
        return base ** int(p)
    b = float_up(base)
    v = b**p
    for _ in range(3):
        v = math.nextafter(v, math.inf)
    return Fraction(v)


class Modulus:
    """Base class for modulus expression nodes."""

    kind = "modulus"

    def lower(self, eps: Number) -> Fraction:
        raise NotImplementedError

    def __call__(self, eps: Number) -> float:
        if _frac(eps) <= 0:
            raise ValueError("moduli are defined for eps > 0 only")
        return float_down(self.lower(eps))

    def to_dict(self) -> dict:
        raise NotImplementedError

    @classmethod
    def from_dict(cls, d: dict):
        raise NotImplementedError

    def expr(self, arg: str = "eps") -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return "eps -> " + self.expr()

    def validate(self, grid: Sequence[float] = PROBE_GRID, eta: float = ETA) -> None:
        """Check positivity and monotonicity on ``grid``; raise ``ValueError``."""
        prev = None
        for e in grid:
            v = self(e)
            if not v > 0:
                raise ValueError(f"modulus not positive at eps={e}: {v}")
            if prev is not None and v < prev - eta:
                raise ValueError(f"modulus decreasing near eps={e}: {prev} -> {v}")
            prev = v


@register
@dataclass(frozen=True)
class Linear(Modulus):
    """``eps -> c * eps / den``."""

    c: float
    den: float = 1.0
    kind = "linear"

    def __post_init__(self):
        if not (self.c > 0 and self.den > 0):
            raise ValueError("Linear needs positive coefficients")

    def lower(self, eps):
        return _frac(self.c) * _frac(eps) / _frac(self.den)

    def to_dict(self):
        return {"kind": self.kind, "c": self.c, "den": self.den}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["c"]), float(d.get("den", 1.0)))

    def expr(self, arg="eps"):
        s = f"{self.c!r}*{arg}"
        return s if self.den == 1.0 else f"{s}/{self.den!r}"


@register
@dataclass(frozen=True)
class Power(Modulus):
    """``eps -> a * (inner(eps) / scale) ** p``; ``inner`` defaults to the identity."""

    a: float
    p: float
    scale: float = 1.0
    inner: Modulus | None = None
    kind = "power"

    def __post_init__(self):
        if not (self.a > 0 and self.p > 0 and self.scale > 0):
            raise ValueError("Power needs positive a, p and scale")

    def lower(self, eps):
        x = self.inner.lower(eps) if self.inner is not None else _frac(eps)
        return _frac(self.a) * _pow_lower(x / _frac(self.scale), self.p)

    def to_dict(self):
        d = {"kind": self.kind, "a": self.a, "p": self.p, "scale": self.scale}
        if self.inner is not None:
            d["inner"] = self.inner.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        inner = node_from_dict(d["inner"]) if "inner" in d else None
        return cls(float(d["a"]), float(d["p"]), float(d.get("scale", 1.0)), inner)

    def expr(self, arg="eps"):
        x = self.inner.expr(arg) if self.inner is not None else arg
        if self.scale != 1.0:
            x = f"{x}/{self.scale!r}"
        return f"{self.a!r}*({x})^{self.p!r}"


@register
@dataclass(frozen=True)
class Scaled(Modulus):
    """``eps -> c * inner(eps) / den``."""

    c: float
    inner: Modulus
    den: float = 1.0
    kind = "scaled"

    def __post_init__(self):
        if not (self.c > 0 and self.den > 0):
            raise ValueError("Scaled needs positive coefficients")

    def lower(self, eps):
        return _frac(self.c) * self.inner.lower(eps) / _frac(self.den)

    def to_dict(self):
        return {"kind": self.kind, "c": self.c, "den": self.den, "inner": self.inner.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["c"]), node_from_dict(d["inner"]), float(d.get("den", 1.0)))

    def expr(self, arg="eps"):
        s = f"{self.c!r}*({self.inner.expr(arg)})"
        return s if self.den == 1.0 else f"{s}/{self.den!r}"


@register
@dataclass(frozen=True)
class Min(Modulus):
    items: tuple
    kind = "min"

    def __post_init__(self):
        flat = []
        for it in self.items:
            flat.extend(it.items if isinstance(it, Min) else [it])
        if not flat:
            raise ValueError("Min of nothing")
        object.__setattr__(self, "items", tuple(flat))

    def lower(self, eps):
        return min(it.lower(eps) for it in self.items)

    def to_dict(self):
        return {"kind": self.kind, "items": [it.to_dict() for it in self.items]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(node_from_dict(it) for it in d["items"]))

    def expr(self, arg="eps"):
        return "min{" + ", ".join(it.expr(arg) for it in self.items) + "}"


@register
@dataclass(frozen=True)
class Compose(Modulus):
    """``eps -> outer(inner(eps))``."""

    outer: Modulus
    inner: Modulus
    kind = "compose"

    def lower(self, eps):
        return self.outer.lower(self.inner.lower(eps))

    def to_dict(self):
        return {"kind": self.kind, "outer": self.outer.to_dict(), "inner": self.inner.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(node_from_dict(d["outer"]), node_from_dict(d["inner"]))

    def expr(self, arg="eps"):
        return self.outer.expr("(" + self.inner.expr(arg) + ")")


@register
@dataclass(frozen=True)
class Const(Modulus):
    value: float
    kind = "const"

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError("Const must be positive")

    def lower(self, eps):
        return _frac(self.value)

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["value"]))

    def expr(self, arg="eps"):
        return repr(self.value)


@register
@dataclass(frozen=True)
class ClampTop(Modulus):
    """``eps -> min{inner(eps), cap}``."""

    cap: float
    inner: Modulus
    kind = "clamp_top"

    def __post_init__(self):
        if not self.cap > 0:
            raise ValueError("cap must be positive")

    def lower(self, eps):
        return min(self.inner.lower(eps), _frac(self.cap))

    def to_dict(self):
        return {"kind": self.kind, "cap": self.cap, "inner": self.inner.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["cap"]), node_from_dict(d["inner"]))

    def expr(self, arg="eps"):
        return f"min{{{self.inner.expr(arg)}, {self.cap!r}}}"


@register
@dataclass(frozen=True)
class HalfArg(Modulus):
    """``eps -> inner(eps / 2)``."""

    inner: Modulus
    kind = "half_arg"

    def lower(self, eps):
        return self.inner.lower(_frac(eps) / 2)

    def to_dict(self):
        return {"kind": self.kind, "inner": self.inner.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(node_from_dict(d["inner"]))

    def expr(self, arg="eps"):
        return self.inner.expr(f"{arg}/2")


@register
@dataclass(frozen=True)
class Table(Modulus):
    """Piecewise-linear modulus through ``(eps_i, value_i)``.

    Below the first knot the value decreases linearly to 0; above the last
    knot it is constant.  Knots must be increasing and values nondecreasing.
    """

    eps: tuple
    values: tuple
    kind = "table"

    def __post_init__(self):
        e = tuple(float(v) for v in self.eps)
        v = tuple(float(x) for x in self.values)
        if len(e) != len(v) or not e:
            raise ValueError("Table needs equally many knots and values")
        if any(b <= a for a, b in zip(e, e[1:])):
            raise ValueError("Table knots must be strictly increasing")
        if any(b < a for a, b in zip(v, v[1:])):
            raise ValueError("Table values must be nondecreasing")
        if e[0] <= 0 or v[0] <= 0:
            raise ValueError("Table knots and values must be positive")
        object.__setattr__(self, "eps", e)
        object.__setattr__(self, "values", v)

    def lower(self, eps):
        x = _frac(eps)
        es, vs = self.eps, self.values
        if x <= _frac(es[0]):
            return _frac(vs[0]) * x / _frac(es[0])
        if x >= _frac(es[-1]):
            return _frac(vs[-1])
        i = int(np.searchsorted(es, float(x), side="right")) - 1
        i = min(max(i, 0), len(es) - 2)
        while _frac(es[i + 1]) < x:
            i += 1
        while _frac(es[i]) > x:
            i -= 1
        e0, e1, v0, v1 = (_frac(t) for t in (es[i], es[i + 1], vs[i], vs[i + 1]))
        return v0 + (v1 - v0) * (x - e0) / (e1 - e0)

    def to_dict(self):
        return {"kind": self.kind, "eps": list(self.eps), "values": list(self.values)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["eps"]), tuple(d["values"]))

    def expr(self, arg="eps"):
        return f"table[{len(self.eps)} knots]({arg})"


@register
@dataclass(frozen=True)
class FromRate(Modulus):
    """``eps -> eps / (2 * rate(eps / 2))`` for a rate of convergence ``rate``."""

    rate: object
    kind = "from_rate"

    def lower(self, eps):
        x = _frac(eps)
        n = self.rate(x / 2)
        if n <= 0:
            raise ValueError("rate of convergence evaluated to 0; modulus undefined")
        return x / (2 * n)

    def to_dict(self):
        return {"kind": self.kind, "rate": self.rate.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(node_from_dict(d["rate"]))

    def expr(self, arg="eps"):
        return f"{arg}/(2*{self.rate.expr(arg + '/2')})"


IDENTITY = Linear(1.0)


# constructors ----------------------------------------------------------------

def _check_k(k: float) -> None:
    if not 0.0 <= k < 1.0:
        raise ValueError(f"contraction constant k={k} outside [0, 1)")


def modulus_contraction(k: float) -> Modulus:
    """``(1 - k) * eps`` for a contraction with constant ``k``."""
    _check_k(k)
    return Linear(1.0 - k)


def modulus_orbital_contraction(k: float) -> Modulus:
    """Same formula as :func:`modulus_contraction`; valid for continuous orbital contractions."""
    _check_k(k)
    return Linear(1.0 - k)


def modulus_retraction() -> Modulus:
    return Linear(1.0)


def modulus_holder(mu: float, gamma: float) -> Modulus:
    """``2 * (eps / mu) ** gamma``."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    if not gamma >= 1:
        raise ValueError("gamma must be at least 1")
    return Power(2.0, float(gamma), scale=float(mu))


def modulus_weak_sharp(psi: Modulus) -> Modulus:
    """A weak-sharp-minima growth function used directly as a modulus."""
    psi.validate()
    return psi


def modulus_subregularity(k: float) -> Modulus:
    """``eps / k`` from metric subregularity with constant ``k``."""
    if not k > 0:
        raise ValueError("k must be positive")
    return Linear(1.0, den=float(k))


def modulus_strongly_accretive(psi: Modulus, gamma: float | None = None) -> Modulus:
    """``psi`` for ``A`` itself, or ``gamma * psi`` for the map ``Id - gamma*A``."""
    psi.validate()
    if gamma is None:
        return psi
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if isinstance(psi, Linear):
        return Linear(psi.c * gamma, psi.den) if _exact_mul(psi.c, gamma) else Scaled(gamma, psi)
    return Scaled(float(gamma), psi)


def _exact_mul(a: float, b: float) -> bool:
    return Fraction(a * b) == Fraction(a) * Fraction(b)


@dataclass(frozen=True)
class ModulusContext:
    anchor: np.ndarray
    radius: float
    gamma: float | None = None

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("gamma must be positive")


def convert_f_to_resolvent(phi: Modulus, rho: Modulus, ctx: ModulusContext) -> Modulus:
    """Modulus for the resolvent from one for ``f``.

    ``min{rho(phi(eps)/2), gamma*phi(eps)/(2r), 1}`` where ``rho`` is a
    modulus of uniform continuity of ``f`` on ``B(z, r+1)``.
    """
    if ctx.gamma is None:
        raise ValueError("resolvent order gamma missing from context")
    return Min((
        Compose(rho, Scaled(1.0, phi, den=2.0)),
        Scaled(float(ctx.gamma), phi, den=2.0 * float(ctx.radius)),
        Const(1.0),
    ))


def convert_resolvent_to_f(phi: Modulus, gamma: float) -> Modulus:
    """``phi(eps)**2 / (2 gamma)``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return Scaled(1.0, Power(1.0, 2.0, inner=phi), den=2.0 * float(gamma))


def convert_resolvent_to_subdiff(phi: Modulus, gamma: float, r: float, r_prime: float) -> Modulus:
    """``(1/gamma) * min{phi(eps/2), eps/2, r - r'}``; requires ``r' < r``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if not r_prime < r:
        raise ValueError("need r' < r")
    cap = float(Fraction(r) - Fraction(r_prime))
    if Fraction(cap) > Fraction(r) - Fraction(r_prime):
        cap = math.nextafter(cap, 0.0)
    inner = Min((HalfArg(phi), Linear(1.0, den=2.0), Const(cap)))
    return Scaled(1.0, inner, den=float(gamma))


def convert_subdiff_to_resolvent(phi: Modulus, rho: Modulus, gamma: float) -> Modulus:
    """``min{rho(gamma*phi(eps)), 1}``; ``rho`` is a modulus of uniform continuity of ``Id + gamma*df``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return Min((Compose(rho, Scaled(float(gamma), phi)), Const(1.0)))


def modulus_from_convergence_rate(psi) -> Modulus:
    """``eps / (2 psi(eps/2))`` from a common rate of convergence ``psi`` of Picard iterates."""
    for e in PROBE_GRID:
        if psi(e) < 1:
            raise ValueError(f"rate evaluates to {psi(e)} at eps={e}; need values >= 1")
    return FromRate(psi)


def central_binomial(n: int) -> int:
    """``C(n, floor(n/2))``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return math.comb(n, n // 2)


def semialgebraic_exponent(n: int, d: int) -> Fraction:
    """``min{((2d-1)^n + 1)/2, B(n-1) d^n}`` with exact integer arithmetic."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive integers")
    first = Fraction((2 * d - 1) ** n + 1, 2)
    second = Fraction(central_binomial(n - 1) * d**n)
    return min(first, second)


def modulus_metric_regularity_semialgebraic(n: int, d: int, m: int, c: float) -> Modulus:
    """``(eps/c) ** gamma / m`` for ``m`` basic convex semi-algebraic sets in R^n of degree <= d."""
    if m < 1:
        raise ValueError("m must be a positive integer")
    if not c > 0:
        raise ValueError("c must be positive")
    g = semialgebraic_exponent(n, d)
    if g > 2**53:
        raise OverflowError(f"exponent {g} too large for n={n}, d={d}")
    return Scaled(1.0, Power(1.0, float(g), scale=float(c)), den=float(m))


def compose_with_metric_regularity(phi: Modulus, rho: Modulus) -> Modulus:
    """``eps -> phi(rho(eps))``."""
    return Compose(phi, rho)


def modulus_bounded_regularity_pair(rho_dist: float, delta, b: float) -> Modulus:
    """``rho * delta(eps) / (b + rho)`` for a boundedly regular pair at gap ``rho``.

    ``delta`` is a modulus (typically a :class:`Table`) or a positive constant.
    """
    if not (rho_dist > 0 and b > 0):
        raise ValueError("rho and b must be positive")
    if not isinstance(delta, Modulus):
        if not delta > 0:
            raise ValueError("delta must be positive")
        delta = Const(float(delta))
    den = float_up(Fraction(b) + Fraction(rho_dist))
    return Scaled(float(rho_dist), delta, den=den)


def modulus_ppa_weak_sharp(psi_C: Modulus, rho: Modulus, b: float) -> Modulus:
    """``min{rho(psi(eps/2)/2), psi(eps/2)/(2(b+1)), eps/2, 1}``."""
    if not b >= 0:
        raise ValueError("b must be nonnegative")
    half = HalfArg(psi_C)
    den = float_up(2 * (Fraction(b) + 1))
    return Min((
        Compose(rho, Scaled(1.0, half, den=2.0)),
        Scaled(1.0, half, den=den),
        Linear(1.0, den=2.0),
        Const(1.0),
    ))


# empirical estimation ---------------------------------------------------------

DELTA_TOP = 1e3


def estimate_thresholds(
    residual: Callable[[np.ndarray], float],
    zero_distance: Callable[[np.ndarray], float],
    points: np.ndarray,
    eps_grid: Sequence[float],
    top: float = DELTA_TOP,
) -> list[float]:
    """Largest thresholds consistent with the sampled points.

    For each ``eps`` returns the smallest ``|F(x)|`` among points with
    ``dist(x, zer F) >= eps`` (or ``top`` when there is none), so that no
    sample with ``|F(x)| < delta`` lies ``eps``-far from the zero set.
    """
    res = np.array([abs(residual(x)) for x in points], dtype=float)
    dist = np.array([zero_distance(x) for x in points], dtype=float)
    out = []
    for e in eps_grid:
        bad = dist >= e
        d = float(res[bad].min()) if bad.any() else top
        d = min(d, top)
        if not d > 0:
            raise ValueError(f"sample at distance >= {e} from the zero set has zero residual")
        out.append(d)
    return out


def estimate_modulus_empirical(problem, ball: ClosedBall, eps_grid: Sequence[float], samples: int,
                               seed: int, top: float = DELTA_TOP) -> Table:
    """Empirical modulus of regularity for ``problem`` on ``ball`` as a :class:`Table`.

    The estimate is not a certificate: it only reflects the sampled points.
    """
    if samples <= 0:
        raise ValueError("need at least one sample")
    if len(eps_grid) == 0:
        raise ValueError("empty eps grid")
    grid = sorted(float(e) for e in eps_grid)
    pts = problem.sample_domain(ball, samples, make_rng(seed))
    deltas = estimate_thresholds(problem.residual, problem.zero_distance, pts, grid, top)
    return Table(tuple(grid), tuple(np.maximum.accumulate(deltas)))


def calibrate_semialgebraic_c(eps_grid: Sequence[float], deltas: Sequence[float], n: int, d: int, m: int,
                              top: float = DELTA_TOP, margin: float = 1.0) -> float:
    """Smallest ``c`` with ``(eps/c)^gamma/m <= delta_hat(eps)`` on the grid, times ``margin``.

    Empirical, not certified.  Grid points where ``delta_hat`` hit ``top``
    impose no constraint.
    """
    g = float(semialgebraic_exponent(n, d))
    c = 0.0
    for e, dl in zip(eps_grid, deltas):
        if dl >= top:
            continue
        c = max(c, e / (m * dl) ** (1.0 / g))
    if c == 0.0:
        raise ValueError("no informative grid point; cannot calibrate")
    return c * margin
