"""Rate functions ``(0, inf) -> N`` and the combinators producing certified indices.

Rates are evaluated exactly over the rationals whenever the exponents are
integral, and rounded upwards otherwise, so a certified index is never too
small because of floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .moduli import (
    PROBE_GRID,
    Compose,
    HalfArg,
    Modulus,
    _frac,
    _pow_upper,
    float_up,
    node_from_dict,
    register,
)
from .schedules import StepSchedule

SCAN_LIMIT = 10_000_000


class DivergenceError(ValueError):
    """The step series does not reach the requested partial sum."""


class RateFn:
    """Base class for rate expression nodes; ``rate(eps)`` returns an int."""

    kind = "rate"

    def __call__(self, eps) -> int:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def expr(self, arg: str = "eps") -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return "eps -> " + self.expr()

    def check_antitone(self, grid: Sequence[float] = PROBE_GRID) -> None:
        """Raise ``ValueError`` unless the rate is nonincreasing in ``eps`` on ``grid``."""
        prev = None
        for e in sorted(grid):
            v = self(e)
            if v < 0:
                raise ValueError(f"negative rate value at eps={e}")
            if prev is not None and v > prev:
                raise ValueError(f"rate increases between grid points near eps={e}")
            prev = v


def _pos(eps) -> Fraction:
    x = _frac(eps)
    if x <= 0:
        raise ValueError("rates are defined for eps > 0 only")
    return x


@register
@dataclass(frozen=True)
class CeilInv(RateFn):
    """``ceil(a / eps**p)``."""

    a: float
    p: float = 1.0
    kind = "ceil_inv"

    def __post_init__(self):
        if self.a < 0 or self.p <= 0:
            raise ValueError("CeilInv needs a >= 0 and p > 0")

    def _quot(self, eps) -> Fraction:
        return _frac(self.a) / _pow_lower_den(_pos(eps), self.p)

    def __call__(self, eps):
        return math.ceil(self._quot(eps))

    def to_dict(self):
        return {"kind": self.kind, "a": self.a, "p": self.p}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["a"]), float(d.get("p", 1.0)))

    def expr(self, arg="eps"):
        return f"ceil({self.a!r}/({arg})^{self.p!r})"


@register
@dataclass(frozen=True)
class FloorInv(CeilInv):
    """``floor(a / eps**p)``."""

    kind = "floor_inv"

    def __call__(self, eps):
        return math.floor(self._quot(eps))

    def expr(self, arg="eps"):
        return f"[{self.a!r}/({arg})^{self.p!r}]"


def _pow_lower_den(x: Fraction, p: float) -> Fraction:
    # A lower bound of the denominator gives an upper bound of the quotient.
    if float(p).is_integer():
        return x ** int(p)
    up = _pow_upper(x, p)
    v = float(up)
    for _ in range(6):
        v = math.nextafter(v, 0.0)
    return Fraction(v)


@register
@dataclass(frozen=True)
class ConstRate(RateFn):
    n: int
    kind = "const_rate"

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("rate values are natural numbers")

    def __call__(self, eps):
        _pos(eps)
        return int(self.n)

    def to_dict(self):
        return {"kind": self.kind, "n": int(self.n)}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["n"]))

    def expr(self, arg="eps"):
        return str(self.n)


@register
@dataclass(frozen=True)
class PlusConst(RateFn):
    k: int
    inner: RateFn
    kind = "plus_const"

    def __call__(self, eps):
        return self.inner(eps) + int(self.k)

    def to_dict(self):
        return {"kind": self.kind, "k": int(self.k), "inner": self.inner.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["k"]), node_from_dict(d["inner"]))

    def expr(self, arg="eps"):
        return f"{self.inner.expr(arg)} + {self.k}"


@register
@dataclass(frozen=True)
class Geometric(RateFn):
    """Smallest ``n >= 0`` with ``a * k**n < eps`` (linear convergence at ratio ``k``)."""

    a: float
    k: float
    kind = "geometric"

    def __post_init__(self):
        if not (self.a >= 0 and 0 <= self.k < 1):
            raise ValueError("Geometric needs a >= 0 and 0 <= k < 1")

    def __call__(self, eps):
        x = _pos(eps)
        a, k = _frac(self.a), _frac(self.k)
        if a < x:
            return 0
        if k == 0:
            return 1
        n = max(int(math.log(max(float(x / a), 1e-300)) / math.log(float(k))) - 2, 0)
        v = a * k**n
        while v >= x:
            n += 1
            v *= k
        return n

    def to_dict(self):
        return {"kind": self.kind, "a": self.a, "k": self.k}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["a"]), float(d["k"]))

    def expr(self, arg="eps"):
        return f"min{{n : {self.a!r}*{self.k!r}^n < {arg}}}"


@register
@dataclass(frozen=True)
class RateTable(RateFn):
    """User-supplied rate on a grid; between knots the value at the next smaller knot is used."""

    eps: tuple
    values: tuple
    kind = "rate_table"

    def __post_init__(self):
        e = tuple(float(v) for v in self.eps)
        v = tuple(int(x) for x in self.values)
        if len(e) != len(v) or not e:
            raise ValueError("RateTable needs equally many knots and values")
        if any(b <= a for a, b in zip(e, e[1:])):
            raise ValueError("RateTable knots must be strictly increasing")
        if any(b > a for a, b in zip(v, v[1:])) or min(v) < 0:
            raise ValueError("RateTable values must be natural and nonincreasing")
        object.__setattr__(self, "eps", e)
        object.__setattr__(self, "values", v)

    def __call__(self, eps):
        x = _pos(eps)
        if x < _frac(self.eps[0]):
            raise ValueError(f"eps={float(x)} below the table range")
        i = max(j for j, e in enumerate(self.eps) if _frac(e) <= x)
        return self.values[i]

    def to_dict(self):
        return {"kind": self.kind, "eps": list(self.eps), "values": list(self.values)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["eps"]), tuple(d["values"]))

    def expr(self, arg="eps"):
        return f"table[{len(self.eps)} knots]({arg})"


@register
@dataclass(frozen=True)
class ComposeMod(RateFn):
    """``eps -> rate(phi(eps))`` with ``phi`` a modulus."""

    rate: RateFn
    phi: Modulus
    kind = "compose_mod"

    def __call__(self, eps):
        return self.rate(self.phi.lower(_pos(eps)))

    def to_dict(self):
        return {"kind": self.kind, "rate": self.rate.to_dict(), "phi": self.phi.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(node_from_dict(d["rate"]), node_from_dict(d["phi"]))

    def expr(self, arg="eps"):
        return self.rate.expr(self.phi.expr(arg))


# rates of divergence ----------------------------------------------------------

TRANSFORMS = ("identity", "square", "mann")


@register
@dataclass(frozen=True)
class RateOfDivergence:
    """``theta`` with ``sum_{k <= theta(n)} g(s_k) >= n`` for a step schedule ``s``.

    ``transform`` picks ``g``: ``identity``, ``square`` (PPA, ``s_k^2``) or
    ``mann`` (``s_k (1 - s_k)``).  The returned ``theta(n)`` is the least
    index with that property for constant and list schedules; power schedules
    get a valid index from a downward-rounded float scan.
    """

    schedule: StepSchedule
    transform: str = "identity"
    kind = "divergence"

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}")

    def term(self, k: int) -> Fraction:
        s = self.schedule.exact(k)
        if self.transform == "square":
            return s * s
        if self.transform == "mann":
            return s * (1 - s)
        return s

    def __call__(self, n: int) -> int:
        n = int(n)
        if n < 0:
            raise ValueError("theta is defined on natural numbers")
        if n == 0:
            return 0
        if self.schedule.is_constant:
            c = self.term(0)
            if c <= 0:
                raise DivergenceError("all-zero step sequence cannot reach a positive sum")
            # least t with (t + 1) * c >= n
            return max(math.ceil(Fraction(n) / c) - 1, 0)
        if self.schedule.kind == "power":
            return self._scan_power(n)
        total = Fraction(0)
        for k in range(len(self.schedule)):
            total += self.term(k)
            if total >= n:
                return k
        raise DivergenceError(f"partial sums stay below {n} within {len(self.schedule)} terms")

    def _scan_power(self, n: int) -> int:
        # Exact rationals are hopeless here (denominators grow like lcm(1..k)),
        # so partial sums are accumulated as floats rounded toward zero.  The
        # index found is valid, possibly one or two past the least one.
        sch = self.schedule
        p = sch.exponent * (2 if self.transform == "square" else 1)
        c = sch.scale ** 2 if self.transform == "square" else sch.scale
        if c == 0:
            raise DivergenceError("all-zero step sequence cannot reach a positive sum")
        if p > 1 and n > c * (1 + 1 / (p - 1)) * (1 + 1e-12):
            raise DivergenceError(f"the series converges below {n}")
        total = 0.0
        for k in range(SCAN_LIMIT):
            s = sch[k]
            g = s * s if self.transform == "square" else s * (1 - s) if self.transform == "mann" else s
            total = math.nextafter(total + math.nextafter(g, 0.0), 0.0)
            if total >= n:
                return k
        raise DivergenceError(f"partial sums stay below {n} within {SCAN_LIMIT} terms")

    def check(self, horizon: int) -> None:
        """Verify the defining inequality by direct summation for ``n <= horizon``."""
        for n in range(horizon + 1):
            t = self(n)
            s = sum((self.term(k) for k in range(t + 1)), Fraction(0))
            if s < n:
                raise AssertionError(f"theta({n})={t} but partial sum is {float(s)}")

    def to_dict(self):
        return {"kind": self.kind, "schedule": self.schedule.to_dict(), "transform": self.transform}

    @classmethod
    def from_dict(cls, d):
        return cls(StepSchedule.from_dict(d["schedule"]), d.get("transform", "identity"))

    def expr(self, arg="n"):
        return f"theta_{self.transform}({arg})"


def theta_from_sequence(schedule: StepSchedule, squared: bool = False, transform: str | None = None) -> RateOfDivergence:
    """Rate of divergence for ``sum s_k`` (or ``sum s_k^2`` when ``squared``)."""
    if transform is None:
        transform = "square" if squared else "identity"
    return RateOfDivergence(schedule, transform)


@register
@dataclass(frozen=True)
class ComposeDiv(RateFn):
    """``eps -> theta(inner(eps))``."""

    theta: RateOfDivergence
    inner: RateFn
    kind = "compose_div"

    def __call__(self, eps):
        return self.theta(self.inner(eps))

    def to_dict(self):
        return {"kind": self.kind, "theta": self.theta.to_dict(), "inner": self.inner.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(node_from_dict(d["theta"]), node_from_dict(d["inner"]))

    def expr(self, arg="eps"):
        return self.theta.expr(self.inner.expr(arg))


# combinators -----------------------------------------------------------------

def dist_rate(alpha: RateFn, phi: Modulus) -> RateFn:
    """``alpha(phi(eps))``: beyond it every iterate is ``eps``-close to the zero set."""
    return ComposeMod(alpha, phi)


def cauchy_modulus(alpha: RateFn, phi: Modulus) -> RateFn:
    """``alpha(phi(eps/2))``: beyond it any two iterates are ``eps``-close."""
    return ComposeMod(alpha, HalfArg(phi))


def rate_of_convergence(alpha: RateFn, phi: Modulus) -> RateFn:
    return cauchy_modulus(alpha, phi)


def finite_termination_index(alpha: RateFn, phi: Modulus | None, eps_star: float) -> int:
    """``alpha(min{eps*, phi(eps*)})``, or ``alpha(eps*)`` when no modulus is needed."""
    e = _pos(eps_star)
    if phi is None:
        return alpha(e)
    return alpha(min(e, phi.lower(e)))


def composed_rate_common_fixed(alpha: RateFn, phi: Modulus, rho: Modulus) -> RateFn:
    """``alpha(phi(rho(eps/2)))`` for common fixed points under metric regularity ``rho``."""
    return ComposeMod(alpha, HalfArg(Compose(phi, rho)))


def rate_alternating_projections(rho_dist: float, b: float) -> RateFn:
    """``[(rho^2 + b^2) / eps^2] + 1``."""
    if not b > 0:
        raise ValueError("b must be positive")
    if rho_dist < 0:
        raise ValueError("rho must be nonnegative")
    s = Fraction(rho_dist) ** 2 + Fraction(b) ** 2
    return PlusConst(1, FloorInv(float_up(s), 2.0))


def rate_gradient_descent(b: float) -> RateFn:
    """``[32 (b+1)^2 / eps^2]``."""
    if not b > 0:
        raise ValueError("b must be positive")
    return FloorInv(float_up(32 * (Fraction(b) + 1) ** 2), 2.0)


def rate_mann_cat0(theta: RateOfDivergence, b: float) -> RateFn:
    """``theta(ceil(4 (b+1)^2 / eps^2))``; ``theta`` diverges for ``sum l_n (1 - l_n)``."""
    if not b > 0:
        raise ValueError("b must be positive")
    return ComposeDiv(theta, CeilInv(float_up(4 * (Fraction(b) + 1) ** 2), 2.0))


def rate_ppa(theta: RateOfDivergence, b: float) -> RateFn:
    """``theta(ceil(2 b^2 / eps^2)) + 1``; ``theta`` diverges for ``sum g_n^2``."""
    if not b > 0:
        raise ValueError("b must be positive")
    return PlusConst(1, ComposeDiv(theta, CeilInv(float_up(2 * Fraction(b) ** 2), 2.0)))


def rate_cyclic_two_sets(b: float) -> RateFn:
    """``[b^2 / eps^2] + 1`` for cyclic projections onto two closed convex sets.

    After the first step each iterate lies in one set, so its distance to the
    other is the next step length; the projection inequality bounds the sum of
    squared step lengths by ``b^2``.
    """
    if not b > 0:
        raise ValueError("b must be positive")
    return PlusConst(1, FloorInv(float_up(Fraction(b) ** 2), 2.0))


def rate_from_dict(d: dict) -> RateFn:
    node = node_from_dict(d)
    if not isinstance(node, RateFn):
        raise ValueError(f"document of kind {d.get('kind')!r} is not a rate")
    return node
