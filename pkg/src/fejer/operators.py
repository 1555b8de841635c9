"""Closed-form projections, proximal maps, resolvents and their combinations."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import ETA, AuditReport, ClosedBall, DimensionError, as_vector, make_rng

KINDS = ("general", "quasi_nonexpansive", "nonexpansive", "firmly_nonexpansive")


@dataclass(frozen=True)
class Operator:
    """A self-map of R^dim with a declared regularity class.

    The declaration is trusted when building algorithms and audited by
    :func:`classify_by_sampling`.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    dim: int
    kind: str = "general"
    name: str = "T"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator class {self.kind!r}")

    def __call__(self, x) -> np.ndarray:
        x = as_vector(x)
        if x.shape[0] != self.dim:
            raise DimensionError(f"{self.name} acts on R^{self.dim}, got R^{x.shape[0]}")
        return as_vector(self.fn(x))

    def at_least(self, kind: str) -> bool:
        return KINDS.index(self.kind) >= KINDS.index(kind)


def identity(dim: int) -> Operator:
    return Operator(lambda x: x, dim, "firmly_nonexpansive", "Id")


# convex sets --------------------------------------------------------------------

class ConvexSet:
    """Closed convex subset of R^dim with closed-form projection."""

    kind = "set"
    dim: int

    def project(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def contains(self, x, eta: float = ETA) -> bool:
        return self.distance(x) <= eta

    def distance(self, x) -> float:
        x = as_vector(x)
        return float(np.linalg.norm(x - self.project(x)))

    def projector(self) -> Operator:
        return Operator(self.project, self.dim, "firmly_nonexpansive", f"P[{self.kind}]")

    def to_dict(self) -> dict:
        raise NotImplementedError


def _check(x, dim):
    x = as_vector(x)
    if x.shape[0] != dim:
        raise DimensionError(f"expected R^{dim}, got R^{x.shape[0]}")
    return x


@dataclass(frozen=True, eq=False)
class Halfspace(ConvexSet):
    """``{x : a.x <= beta}``."""

    a: np.ndarray
    beta: float
    kind = "halfspace"

    def __post_init__(self):
        object.__setattr__(self, "a", as_vector(self.a))
        if not np.any(self.a):
            raise ValueError("halfspace normal must be nonzero")
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def dim(self):
        return self.a.shape[0]

    def project(self, x):
        x = _check(x, self.dim)
        s = float(self.a @ x) - self.beta
        if s <= 0:
            return x
        return as_vector(x - s / float(self.a @ self.a) * self.a)

    def distance(self, x):
        x = _check(x, self.dim)
        return max(float(self.a @ x) - self.beta, 0.0) / float(np.linalg.norm(self.a))

    def to_dict(self):
        return {"kind": self.kind, "a": self.a.tolist(), "beta": self.beta}


@dataclass(frozen=True, eq=False)
class Hyperplane(ConvexSet):
    """``{x : a.x = beta}``."""

    a: np.ndarray
    beta: float
    kind = "hyperplane"

    def __post_init__(self):
        object.__setattr__(self, "a", as_vector(self.a))
        if not np.any(self.a):
            raise ValueError("hyperplane normal must be nonzero")
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def dim(self):
        return self.a.shape[0]

    def project(self, x):
        x = _check(x, self.dim)
        s = float(self.a @ x) - self.beta
        return as_vector(x - s / float(self.a @ self.a) * self.a)

    def distance(self, x):
        x = _check(x, self.dim)
        return abs(float(self.a @ x) - self.beta) / float(np.linalg.norm(self.a))

    def to_dict(self):
        return {"kind": self.kind, "a": self.a.tolist(), "beta": self.beta}


@dataclass(frozen=True, eq=False)
class Box(ConvexSet):
    lo: np.ndarray
    hi: np.ndarray
    kind = "box"

    def __post_init__(self):
        lo, hi = as_vector(self.lo), as_vector(self.hi)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("box needs lo <= hi of equal dimension")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.shape[0]

    def project(self, x):
        return as_vector(np.clip(_check(x, self.dim), self.lo, self.hi))

    def to_dict(self):
        return {"kind": self.kind, "lo": self.lo.tolist(), "hi": self.hi.tolist()}


@dataclass(frozen=True, eq=False)
class Ball(ConvexSet):
    center: np.ndarray
    radius: float
    kind = "ball"

    def __post_init__(self):
        object.__setattr__(self, "center", as_vector(self.center))
        if not self.radius >= 0:
            raise ValueError("radius must be nonnegative")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return self.center.shape[0]

    def project(self, x):
        x = _check(x, self.dim)
        d = x - self.center
        n = float(np.linalg.norm(d))
        if n <= self.radius:
            return x
        return as_vector(self.center + d * (self.radius / n))

    def distance(self, x):
        x = _check(x, self.dim)
        return max(float(np.linalg.norm(x - self.center)) - self.radius, 0.0)

    def to_dict(self):
        return {"kind": self.kind, "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Affine(ConvexSet):
    """``{x : A x = b}`` with ``A`` of full row rank."""

    A: np.ndarray
    b: np.ndarray
    kind = "affine"

    def __post_init__(self):
        A = np.atleast_2d(np.array(self.A, dtype=float))
        b = np.array(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise ValueError("A and b disagree in the number of equations")
        if np.linalg.matrix_rank(A) < A.shape[0]:
            raise ValueError("A must have full row rank")
        A.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "_gram_inv", np.linalg.inv(A @ A.T))

    @property
    def dim(self):
        return self.A.shape[1]

    def project(self, x):
        x = _check(x, self.dim)
        r = self.A @ x - self.b
        return as_vector(x - self.A.T @ (self._gram_inv @ r))

    def to_dict(self):
        return {"kind": self.kind, "A": self.A.tolist(), "b": self.b.tolist()}


@dataclass(frozen=True, eq=False)
class Polyhedron(ConvexSet):
    """Intersection of halfspaces ``{x : A x <= b}``.

    The projection enumerates active sets: the true projection is the
    projection onto the affine hull of its active face, so the nearest
    feasible candidate among all faces is exact.  Meant for a handful of
    constraints.
    """

    halfspaces: tuple
    kind = "polyhedron"

    def __post_init__(self):
        hs = tuple(self.halfspaces)
        if not hs:
            raise ValueError("need at least one halfspace")
        if len({h.dim for h in hs}) != 1:
            raise DimensionError("halfspaces of different dimension")
        if len(hs) > 12:
            raise ValueError("active-set enumeration is limited to 12 halfspaces")
        object.__setattr__(self, "halfspaces", hs)

    @property
    def dim(self):
        return self.halfspaces[0].dim

    def contains(self, x, eta: float = ETA) -> bool:
        return all(h.distance(x) <= eta for h in self.halfspaces)

    def _faces(self):
        faces = self.__dict__.get("_face_cache")
        if faces is None:
            A = np.array([h.a for h in self.halfspaces])
            b = np.array([h.beta for h in self.halfspaces])
            m = len(self.halfspaces)
            faces = []
            for k in range(1, min(m, self.dim) + 1):
                for S in itertools.combinations(range(m), k):
                    AS = A[list(S)]
                    if np.linalg.matrix_rank(AS) < k:
                        continue
                    # x -> x - AS^T (AS AS^T)^{-1} (AS x - bS)
                    faces.append((AS.T @ np.linalg.inv(AS @ AS.T), AS, b[list(S)]))
            object.__setattr__(self, "_face_cache", (A, b, np.linalg.norm(A, axis=1), faces))
            faces = self.__dict__["_face_cache"]
        return faces

    def project(self, x):
        x = _check(x, self.dim)
        if self.contains(x, 0.0):
            return x
        A, b, scale, faces = self._faces()
        best, best_d = None, np.inf
        for M, AS, bS in faces:
            y = x - M @ (AS @ x - bS)
            if np.all((A @ y - b) / scale <= 1e-12 * (1 + np.abs(b) / scale)):
                d = float(np.linalg.norm(x - y))
                if d < best_d:
                    best, best_d = y, d
        if best is None:
            raise ValueError("polyhedron appears empty")
        return as_vector(best)

    def distance_many(self, X: np.ndarray) -> np.ndarray:
        """Exact distances for the rows of ``X`` (vectorised :meth:`project`)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        A, b, scale, faces = self._faces()
        inside = np.all(A @ X.T - b[:, None] <= 0, axis=0)
        best = np.full(X.shape[0], np.inf)
        for M, AS, bS in faces:
            Y = X - (AS @ X.T - bS[:, None]).T @ M.T
            ok = np.all((A @ Y.T - b[:, None]) / scale[:, None]
                        <= (1e-12 * (1 + np.abs(b) / scale))[:, None], axis=0)
            d = np.linalg.norm(X - Y, axis=1)
            best = np.where(ok & (d < best), d, best)
        best[inside] = 0.0
        return best

    def to_dict(self):
        return {"kind": self.kind, "halfspaces": [h.to_dict() for h in self.halfspaces]}


SET_KINDS = {"halfspace": Halfspace, "hyperplane": Hyperplane, "box": Box, "ball": Ball,
             "affine": Affine, "polyhedron": Polyhedron}


def set_from_dict(d: dict) -> ConvexSet:
    kind = d.get("kind")
    if kind == "halfspace":
        return Halfspace(d["a"], d["beta"])
    if kind == "hyperplane":
        return Hyperplane(d["a"], d["beta"])
    if kind == "box":
        return Box(d["lo"], d["hi"])
    if kind == "ball":
        return Ball(d["center"], d["radius"])
    if kind == "affine":
        return Affine(d["A"], d["b"])
    if kind == "polyhedron":
        return Polyhedron(tuple(set_from_dict(h) for h in d["halfspaces"]))
    raise ValueError(f"unsupported set kind {kind!r}")


def project(s: ConvexSet, x) -> np.ndarray:
    if not isinstance(s, ConvexSet):
        raise TypeError(f"unsupported set {s!r}")
    return s.project(x)


# proximable functions -----------------------------------------------------------

class Proximable:
    kind = "function"

    def value(self, x) -> float:
        raise NotImplementedError

    def prox(self, x, gamma: float) -> np.ndarray:
        raise NotImplementedError

    def resolvent(self, gamma: float) -> Operator:
        """``J_{gamma df} = Prox_{gamma f}``."""
        if not gamma > 0:
            raise ValueError("gamma must be positive")
        return Operator(lambda x: self.prox(x, gamma), self.dim, "firmly_nonexpansive",
                        f"J[{gamma}*d{self.kind}]")


@dataclass(frozen=True)
class Norm(Proximable):
    """``f(x) = ||x||_2``; its prox is radial soft thresholding."""

    dim: int = 1
    kind = "norm"

    def value(self, x):
        return float(np.linalg.norm(as_vector(x)))

    def prox(self, x, gamma):
        x = _check(x, self.dim)
        n = float(np.linalg.norm(x))
        if n <= gamma:
            return as_vector(np.zeros(self.dim))
        return as_vector(x * (1.0 - gamma / n))

    def subdiff_dist(self, x) -> float:
        """``dist(0, d||.||(x))``: 1 off the origin, 0 at it."""
        return 0.0 if not np.any(as_vector(x)) else 1.0


@dataclass(frozen=True)
class SquaredDistance(Proximable):
    """``f(x) = (scale/2) ||x - a||^2``."""

    a: np.ndarray
    scale: float = 1.0
    kind = "sqdist"

    def __post_init__(self):
        object.__setattr__(self, "a", as_vector(self.a))
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @property
    def dim(self):
        return self.a.shape[0]

    def value(self, x):
        d = as_vector(x) - self.a
        return 0.5 * self.scale * float(d @ d)

    def prox(self, x, gamma):
        x = _check(x, self.dim)
        t = gamma * self.scale
        return as_vector((x + t * self.a) / (1.0 + t))


@dataclass(frozen=True)
class Indicator(Proximable):
    """Indicator of a closed convex set; its prox is the projection."""

    set: ConvexSet
    kind = "indicator"

    @property
    def dim(self):
        return self.set.dim

    def value(self, x):
        return 0.0 if self.set.contains(x) else np.inf

    def prox(self, x, gamma):
        return self.set.project(x)


def prox(f: Proximable, gamma: float, x) -> np.ndarray:
    """``argmin_y f(y) + ||x - y||^2 / (2 gamma)`` in closed form."""
    if not isinstance(f, Proximable):
        raise TypeError(f"no closed-form prox for {f!r}")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return f.prox(x, gamma)


# combinations ----------------------------------------------------------------

def reflected_resolvent(J: Operator) -> Operator:
    """``2J - Id``, nonexpansive when ``J`` is firmly nonexpansive."""
    if J.kind != "firmly_nonexpansive":
        raise ValueError(f"{J.name} is not declared firmly nonexpansive")
    return Operator(lambda x: 2.0 * J(x) - x, J.dim, "nonexpansive", f"R[{J.name}]")


def compose(ops: Sequence[Operator]) -> Operator:
    """Right-to-left composition: ``compose([A, B])(x) == A(B(x))``."""
    ops = list(ops)
    if not ops:
        raise ValueError("cannot compose an empty list")
    if len({op.dim for op in ops}) != 1:
        raise DimensionError("operators act on different dimensions")
    if len(ops) == 1:
        return ops[0]
    ne = all(op.at_least("nonexpansive") for op in ops)

    def fn(x):
        for op in reversed(ops):
            x = op(x)
        return x

    name = "∘".join(op.name for op in ops)
    return Operator(fn, ops[0].dim, "nonexpansive" if ne else "general", name)


def convex_combination(ops: Sequence[Operator], weights: Sequence[float],
                       relaxations: Sequence[float], eta: float = ETA) -> Operator:
    """``x -> sum_i a_i (x + l_i (P_i x - x))`` with ``0 < l_i <= 2`` and ``l_1 < 2``."""
    ops, a, lam = list(ops), [float(w) for w in weights], [float(l) for l in relaxations]
    if not ops or len(ops) != len(a) or len(a) != len(lam):
        raise ValueError("need equally many operators, weights and relaxations")
    if len({op.dim for op in ops}) != 1:
        raise DimensionError("operators act on different dimensions")
    if any(w <= 0 for w in a) or abs(sum(a) - 1.0) > eta:
        raise ValueError("weights must be positive and sum to 1")
    if any(not 0 < l <= 2 for l in lam) or not lam[0] < 2:
        raise ValueError("relaxations must lie in (0, 2] with the first below 2")

    def fn(x):
        out = np.zeros_like(x)
        for op, w, l in zip(ops, a, lam):
            out = out + w * (x + l * (op(x) - x))
        return out

    return Operator(fn, ops[0].dim, "nonexpansive", "crombez")


def gradient_step(gradient: Callable[[np.ndarray], np.ndarray], L: float, dim: int) -> Operator:
    """``x -> x - grad f(x) / L`` for an ``L``-Lipschitz gradient of a convex ``f``."""
    if not L > 0:
        raise ValueError("L must be positive")
    return Operator(lambda x: x - np.asarray(gradient(x), dtype=float) / L, dim,
                    "firmly_nonexpansive", f"Id-grad/{L}")


# classification ----------------------------------------------------------------

LAMBDA_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass
class ClassReport:
    nonexpansive: AuditReport
    firmly_nonexpansive: AuditReport
    quasi_nonexpansive: AuditReport | None = None
    reports: list = field(default_factory=list)

    @property
    def kind(self) -> str:
        if self.firmly_nonexpansive.passed:
            return "firmly_nonexpansive"
        if self.nonexpansive.passed:
            return "nonexpansive"
        if self.quasi_nonexpansive is not None and self.quasi_nonexpansive.passed:
            return "quasi_nonexpansive"
        return "general"

    def consistent_with(self, declared: str) -> bool:
        return KINDS.index(self.kind) >= KINDS.index(declared)


def classify_by_sampling(T: Operator, ball: ClosedBall, samples: int = 2000, seed: int = 0,
                         fixed_points: Sequence | None = None, eta: float = ETA) -> ClassReport:
    """Worst violations of (firm / quasi-) nonexpansivity over sampled pairs in ``ball``."""
    rng = make_rng(seed)
    xs = ball.sample(samples, rng)
    ys = ball.sample(samples, rng)
    params = {"samples": samples, "seed": seed, "radius": ball.radius}
    ne_worst, ne_wit = -np.inf, {}
    fn_worst, fn_wit = -np.inf, {}
    for i, (x, y) in enumerate(zip(xs, ys)):
        tx, ty = T(x), T(y)
        dxy = float(np.linalg.norm(x - y))
        dt = float(np.linalg.norm(tx - ty))
        v = dt - dxy
        if v > ne_worst:
            ne_worst, ne_wit = v, {"sample": i, "x": x, "y": y}
        for lam in LAMBDA_GRID:
            rhs = float(np.linalg.norm((1 - lam) * (x - y) + lam * (tx - ty)))
            v = dt - rhs
            if v > fn_worst:
                fn_worst, fn_wit = v, {"sample": i, "x": x, "y": y, "lambda": lam}
    ne = AuditReport(f"nonexpansive[{T.name}]", ne_worst, eta, ne_wit, params)
    fne = AuditReport(f"firmly_nonexpansive[{T.name}]", fn_worst, eta, fn_wit, params)
    quasi = None
    if fixed_points is not None:
        q_worst, q_wit = -np.inf, {}
        for j, p in enumerate(fixed_points):
            p = as_vector(p)
            for i, x in enumerate(xs):
                v = float(np.linalg.norm(T(x) - p) - np.linalg.norm(x - p))
                if v > q_worst:
                    q_worst, q_wit = v, {"sample": i, "x": x, "fixed_point": j}
        quasi = AuditReport(f"quasi_nonexpansive[{T.name}]", q_worst, eta, q_wit, params)
    return ClassReport(ne, fne, quasi, [r for r in (ne, fne, quasi) if r is not None])
