"""Euclidean geometry used by every other module.

Points are one-dimensional float64 numpy arrays marked read-only.  All
comparisons in audits use an absolute slack ``ETA``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

ETA = 1e-9


class DimensionError(ValueError):
    """Raised when points of different dimension are combined."""


def as_vector(x: Any) -> np.ndarray:
    """Return ``x`` as an immutable 1-D float64 array.

    Scalars become vectors of length one.  Non-finite coordinates are rejected.
    """
    if isinstance(x, np.ndarray) and x.dtype == np.float64 and x.ndim == 1 and not x.flags.writeable:
        # a finite sum implies finite entries
        if x.size and math.isfinite(x.sum()):
            return x
    v = np.array(x, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise ValueError("empty vector")
    if not np.isfinite(v).all():
        raise ValueError(f"non-finite coordinates in {v!r}")
    v.flags.writeable = False
    return v


def _same_dim(*vs: np.ndarray) -> None:
    n = vs[0].shape[0]
    for v in vs[1:]:
        if v.shape[0] != n:
            raise DimensionError(f"dimension mismatch: {n} vs {v.shape[0]}")


def distance(x, y) -> float:
    x, y = as_vector(x), as_vector(y)
    _same_dim(x, y)
    d = x - y
    m = float(np.max(np.abs(d)))
    if m == 0.0:
        return 0.0
    # scaled so that tiny gaps do not underflow to zero
    return m * float(np.linalg.norm(d / m))


def geodesic_point(x, y, t: float) -> np.ndarray:
    """The point ``(1-t)x + ty`` on the segment from ``x`` to ``y``."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t={t} outside [0, 1]")
    x, y = as_vector(x), as_vector(y)
    _same_dim(x, y)
    return as_vector((1.0 - t) * x + t * y)


def quadrilateral_defect(x, y, u, v) -> float:
    """Right side minus left side of the CAT(0) quadrilateral inequality.

    ``d(x,v)^2 + d(y,u)^2 + d(x,u)^2 + d(y,v)^2 - d(x,y)^2 - d(u,v)^2``,
    which is nonnegative in any Hilbert space.
    """
    x, y, u, v = (as_vector(p) for p in (x, y, u, v))
    _same_dim(x, y, u, v)

    def sq(a, b):
        d = a - b
        return float(d @ d)

    rhs = sq(x, v) + sq(y, u) + sq(x, u) + sq(y, v)
    lhs = sq(x, y) + sq(u, v)
    return rhs - lhs


@dataclass(frozen=True)
class Tolerance:
    eta: float = ETA

    def __post_init__(self):
        if not self.eta >= 0:
            raise ValueError("eta must be nonnegative")


@dataclass(frozen=True)
class ClosedBall:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_vector(self.center))
        if not self.radius >= 0:
            raise ValueError("radius must be nonnegative")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def contains(self, x, eta: float = 0.0) -> bool:
        return distance(self.center, x) <= self.radius + eta

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """``n`` points drawn uniformly from the ball, shape ``(n, dim)``.

        Directions are normalised Gaussians and radii are ``U**(1/dim)``
        scaled, drawn in that order from ``rng``.
        """
        d = self.dim
        g = rng.standard_normal((n, d))
        norms = np.linalg.norm(g, axis=1)
        norms[norms == 0] = 1.0
        u = rng.random(n)
        r = self.radius * u ** (1.0 / d)
        return self.center + g / norms[:, None] * r[:, None]


def make_rng(seed: int) -> np.random.Generator:
    """The PRNG behind every sampled audit: numpy's PCG64 seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass
class AuditReport:
    """Outcome of one machine-checked predicate.

    ``passed`` is true exactly when ``worst_violation <= eta``.
    """

    name: str
    worst_violation: float
    eta: float = ETA
    witness: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.worst_violation <= self.eta)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "worst_violation": _jsonable(self.worst_violation),
            "eta": self.eta,
            "witness": _jsonable(self.witness),
            "params": _jsonable(self.params),
        }

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.name}  worst={self.worst_violation:.3e}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, float):
        if obj == float("inf"):
            return "inf"
        if obj == float("-inf"):
            return "-inf"
        if obj != obj:
            return "nan"
    return obj
