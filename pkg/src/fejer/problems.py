"""Catalog of problem instances with known zero sets.

An instance bundles a residual ``F``, an oracle for ``dist(x, zer F)``
that is independent of the iteration being audited, a reference zero
``z`` with a bound ``b >= d(x0, z)``, an iteration recipe and, where one
is known, a certified modulus ``phi`` and rate ``alpha``.

Every instance is rebuilt from ``(kind, params)`` by a registered builder,
which is what makes problem files round-trip.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import iterations as it
from .core import ClosedBall, as_vector, make_rng
from .moduli import (
    Linear,
    Modulus,
    ModulusContext,
    Power,
    Scaled,
    calibrate_semialgebraic_c,
    compose_with_metric_regularity,
    convert_f_to_resolvent,
    convert_resolvent_to_f,
    convert_resolvent_to_subdiff,
    convert_subdiff_to_resolvent,
    estimate_thresholds,
    modulus_bounded_regularity_pair,
    modulus_contraction,
    modulus_holder,
    modulus_metric_regularity_semialgebraic,
    modulus_orbital_contraction,
    modulus_ppa_weak_sharp,
    modulus_retraction,
    modulus_strongly_accretive,
    modulus_weak_sharp,
)
from .operators import (
    Box,
    ConvexSet,
    Halfspace,
    Hyperplane,
    Norm,
    Operator,
    Polyhedron,
    SquaredDistance,
    compose,
    convex_combination,
    set_from_dict,
)
from .rates import (
    Geometric,
    RateFn,
    rate_alternating_projections,
    rate_cyclic_two_sets,
    rate_gradient_descent,
    rate_mann_cat0,
    rate_from_dict,
    rate_ppa,
    theta_from_sequence,
)
from .schedules import StepSchedule

RESIDUAL_KINDS = ("fixed_point", "minimization", "operator", "equilibrium")
DRIVERS = ("picard", "mann", "cyclic", "ppa", "douglas_rachford", "gradient_descent", "crombez")


@dataclass(frozen=True)
class Recipe:
    driver: str
    steps: int
    schedule: StepSchedule | None = None

    def __post_init__(self):
        if self.driver not in DRIVERS:
            raise ValueError(f"unknown driver {self.driver!r}")
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")

    def to_dict(self) -> dict:
        d = {"driver": self.driver, "steps": self.steps}
        if self.schedule is not None:
            d["schedule"] = self.schedule.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> Recipe:
        sched = d.get("schedule")
        return cls(d["driver"], int(d["steps"]), None if sched is None else StepSchedule.from_dict(sched))


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """A fully specified instance; see the module docstring.

    ``runner(recipe, steps, residual, zero_distance, z)`` produces a trace.
    ``modulus_radius`` is the radius of the ball on which ``modulus`` is
    claimed (``b`` when absent).  ``termination_modulus`` selects the
    finite-termination form: with it the index is ``alpha(min{eps*, phi(eps*)})``,
    without it ``alpha(eps*)``.
    """

    name: str
    kind: str
    builder: str
    params: dict
    dim: int
    residual: Callable
    zero_distance: Callable
    z: np.ndarray
    b: float
    x0: np.ndarray
    recipe: Recipe | None = None
    runner: Callable | None = None
    modulus: Modulus | None = None
    modulus_radius: float | None = None
    rate: RateFn | None = None
    eps_star: float | None = None
    termination_modulus: Modulus | None = None
    operator: Operator | None = None
    monotone_fix_residual: bool = False
    domain: Callable | None = None
    objective: Callable | None = None
    minimum: float | None = None
    gradient: Callable | None = None
    sets: tuple = ()
    certified: bool = True
    extra: dict = field(default_factory=dict)
    notes: str = ""

    def __post_init__(self):
        if self.kind not in RESIDUAL_KINDS:
            raise ValueError(f"unknown residual kind {self.kind!r}")
        object.__setattr__(self, "z", as_vector(self.z))
        object.__setattr__(self, "x0", as_vector(self.x0))
        if self.z.shape[0] != self.dim or self.x0.shape[0] != self.dim:
            raise ValueError("z and x0 must live in the instance dimension")
        if not self.b > 0:
            raise ValueError("b must be positive")
        if float(np.linalg.norm(self.x0 - self.z)) > self.b * (1 + 1e-15):
            raise ValueError("b must bound d(x0, z)")

    @property
    def ball(self) -> ClosedBall:
        return ClosedBall(self.z, self.modulus_radius if self.modulus_radius is not None else self.b)

    def in_domain(self, x) -> bool:
        return True if self.domain is None else bool(self.domain(as_vector(x)))

    def sample_domain(self, ball: ClosedBall, n: int, rng: np.random.Generator) -> np.ndarray:
        """``n`` uniform points of ``ball`` inside the domain, by rejection."""
        if self.domain is None:
            return ball.sample(n, rng)
        out, tries = [], 0
        while len(out) < n:
            tries += 1
            if tries > 1000:
                raise RuntimeError("domain occupies too little of the ball to sample")
            for p in ball.sample(max(n, 64), rng):
                if self.domain(p):
                    out.append(p)
                    if len(out) == n:
                        break
        return np.array(out)

    def run(self, steps: int | None = None, *, until_stationary: bool = True) -> it.Trace:
        if self.runner is None or self.recipe is None:
            raise ValueError(f"instance {self.name!r} has no iteration recipe")
        steps = self.recipe.steps if steps is None else steps
        tr = self.runner(self.recipe, steps, until_stationary)
        tr.meta.update({"instance": self.name, "instance_hash": it.instance_hash(self.to_config())})
        return tr

    def with_overrides(self, **kw) -> ProblemInstance:
        if "x0" in kw or "recipe" in kw and self.runner is not None and kw["recipe"].driver != self.recipe.driver:
            # the runner closes over x0 and the driver; those need a rebuild
            raise ValueError("x0 and the driver are fixed at build time; rebuild the instance instead")
        return replace(self, **kw)

    def to_config(self) -> dict:
        doc = {
            "schema": SCHEMA,
            "name": self.name,
            "kind": self.builder,
            "params": self.params,
            "x0": self.x0.tolist(),
            "z": self.z.tolist(),
            "b": self.b,
        }
        if self.modulus is not None:
            doc["modulus"] = self.modulus.to_dict()
        if self.modulus_radius is not None:
            doc["modulus_radius"] = self.modulus_radius
        if self.rate is not None:
            doc["rate"] = self.rate.to_dict()
        if self.eps_star is not None:
            doc["eps_star"] = self.eps_star
        if self.recipe is not None:
            doc["recipe"] = self.recipe.to_dict()
        return doc


SCHEMA = "fejer-problem/1"
BUILDERS: dict[str, Callable[..., ProblemInstance]] = {}


def builder(name):
    def deco(fn):
        BUILDERS[name] = fn
        return fn
    return deco


def _bound(x0, z) -> float:
    """Smallest float that is ``>= d(x0, z)``, checked in exact arithmetic.

    Starting at ``z`` itself any positive bound is valid; 1 is used.
    """
    sq = sum((Fraction(float(a)) - Fraction(float(c))) ** 2 for a, c in zip(as_vector(x0), as_vector(z)))
    d = float(np.linalg.norm(as_vector(x0) - as_vector(z)))
    while Fraction(d) ** 2 < sq:
        d = math.nextafter(d, math.inf)
    return d if d > 0 else 1.0


def _fixres(T: Operator) -> Callable:
    return lambda x: float(np.linalg.norm(x - T(x)))


def _make_runner(fn: Callable, residual, zero_distance, z) -> Callable:
    """Bind the instance instrumentation to a ``fn(recipe, steps, kw)`` driver call."""
    def run(recipe, steps, until):
        return fn(recipe, steps, dict(residual=residual, zero_distance=zero_distance, z=z,
                                      until_stationary=until))
    return run


# gradient descent -------------------------------------------------------------

@builder("grad_quadratic")
def instance_grad_quadratic(Q, x0, b: float | None = None, steps: int = 50, name: str = "grad_quadratic"):
    """``f(x) = x^T Q x / 2`` minimised by gradient descent with step ``1/L``.

    ``L`` is the largest eigenvalue; the zero set is the null space of ``Q``.
    A modulus ``lambda_min(Q) eps / L`` is bundled only when ``Q`` is
    positive definite.
    """
    Qm = np.array(Q, dtype=float)
    if Qm.ndim != 2 or Qm.shape[0] != Qm.shape[1] or not np.allclose(Qm, Qm.T):
        raise ValueError("Q must be a symmetric square matrix")
    diagonal = np.count_nonzero(Qm - np.diag(np.diag(Qm))) == 0
    evals, evecs = (np.diag(Qm).copy(), np.eye(len(Qm))) if diagonal else np.linalg.eigh(Qm)
    if evals.min() < -1e-12:
        raise ValueError("Q is not positive semidefinite")
    L = float(evals.max())
    if not L > 0:
        raise ValueError("Q = 0 has no Lipschitz step")
    lam_min = float(evals.min())
    null = evecs[:, evals <= 1e-12 * L]
    rng_basis = evecs[:, evals > 1e-12 * L]
    n = len(Qm)
    z = np.zeros(n)

    def grad(x):
        return Qm @ x

    def f(x):
        x = as_vector(x)
        return 0.5 * float(x @ Qm @ x)

    def dist(x):
        return float(np.linalg.norm(rng_basis.T @ as_vector(x)))

    T = Operator(lambda x: x - grad(x) / L, n, "firmly_nonexpansive", "Id-grad/L")
    b = _bound(x0, z) if b is None else float(b)
    phi = modulus_strongly_accretive(Linear(lam_min), 1.0 / L) if lam_min > 1e-12 * L else None

    def drive(recipe, steps, kw):
        return it.run_gradient_descent(grad, L, x0, steps, **kw)

    residual = _fixres(T)
    return ProblemInstance(
        name=name, kind="fixed_point", builder="grad_quadratic",
        params={"Q": Qm.tolist(), "b": b, "steps": steps, "name": name},
        dim=n, residual=residual, zero_distance=dist, z=z, b=b, x0=x0,
        recipe=Recipe("gradient_descent", steps), runner=_make_runner(drive, residual, dist, z),
        modulus=phi, rate=rate_gradient_descent(b), operator=T, monotone_fix_residual=True,
        objective=f, minimum=0.0, gradient=grad,
        extra={"L": L, "lambda_min": lam_min, "null_dim": int(null.shape[1])},
    )


# alternating projections onto a disjoint pair ---------------------------------

@builder("best_approx_pair")
def instance_best_approx_pair(U, V, x0, b: float | None = None, steps: int = 50, name: str = "best_approx_pair"):
    """Alternating projections ``T = P_U P_V`` for halfspaces with opposite normals.

    With ``U = {a.x <= beta_U}`` and ``V = {-a.x <= -beta_V}`` the gap is
    ``rho = (beta_V - beta_U) / |a|`` and ``Fix T = {a.x = beta_U}``.  On this
    pair the bounded-regularity threshold is exactly ``delta(eps) = eps``.
    """
    U = U if isinstance(U, ConvexSet) else set_from_dict(U)
    V = V if isinstance(V, ConvexSet) else set_from_dict(V)
    if not (isinstance(U, Halfspace) and isinstance(V, Halfspace)):
        raise ValueError("closed-form gap needs two halfspaces")
    na, nb = np.linalg.norm(U.a), np.linalg.norm(V.a)
    if not np.allclose(U.a / na, -V.a / nb):
        raise ValueError("halfspaces must have opposite normals")
    unit = U.a / na
    lo_u = U.beta / na          # U = {unit.x <= lo_u}
    hi_v = -V.beta / nb         # V = {unit.x >= hi_v}
    rho = max(hi_v - lo_u, 0.0)
    flagged = rho == 0.0
    T = compose([U.projector(), V.projector()])
    T = Operator(T.fn, T.dim, "nonexpansive", "P_U∘P_V")
    n = U.dim

    def dist(x):
        s = float(unit @ as_vector(x))
        if rho > 0:
            return abs(s - lo_u)
        lo, hi = min(lo_u, hi_v), max(lo_u, hi_v)
        return max(lo - s, s - hi, 0.0)

    x0 = as_vector(x0)
    s0 = float(unit @ x0)
    z = x0 - (s0 - (lo_u if rho > 0 else min(max(s0, hi_v), lo_u))) * unit
    b = _bound(x0, z) if b is None else float(b)

    def pair_violation(x, u):
        x, u = as_vector(x), as_vector(u)
        tx, pv = T(x), V.project(x)
        lhs = float(np.sum((tx - pv) ** 2))
        return lhs - (rho ** 2 + float(np.sum((u - x) ** 2)) - float(np.sum((u - tx) ** 2)))

    def bounded_residual(x):
        return max(U.distance(x), V.distance(x) - rho)

    residual = _fixres(T)
    phi = modulus_bounded_regularity_pair(rho, Linear(1.0), b) if rho > 0 else None

    def drive(recipe, steps, kw):
        return it.run_picard(T, x0, steps, **kw)

    return ProblemInstance(
        name=name, kind="fixed_point", builder="best_approx_pair",
        params={"U": U.to_dict(), "V": V.to_dict(), "b": b, "steps": steps, "name": name},
        dim=n, residual=residual, zero_distance=dist, z=z, b=b, x0=x0,
        recipe=Recipe("picard", steps), runner=_make_runner(drive, residual, dist, z),
        modulus=phi, rate=rate_alternating_projections(rho, b), operator=T, monotone_fix_residual=True,
        sets=(U, V),
        extra={"rho": rho, "intersecting": flagged, "pair_inequality": pair_violation,
               "bounded_residual": bounded_residual, "s_bound": rho ** 2 + b ** 2},
    )


def estimate_bounded_regularity(problem: ProblemInstance, eps_grid, samples: int = 2000, seed: int = 0):
    """Empirical ``delta(eps)`` for the bounded-regularity implication on ``B(z, b)``.

    Returns sorted grid and thresholds; not a certificate.
    """
    grid = sorted(float(e) for e in eps_grid)
    pts = ClosedBall(problem.z, problem.b).sample(samples, make_rng(seed))
    deltas = estimate_thresholds(problem.extra["bounded_residual"], problem.zero_distance, pts, grid)
    return grid, list(np.maximum.accumulate(deltas))


# convex feasibility ------------------------------------------------------------

CALIBRATION = {"samples": 20000, "seed": 1, "margin": 1.1, "points": 60}


@builder("cfp_halfspaces")
def instance_cfp_halfspaces(halfspaces, x0, witness, b: float | None = None, c: float | None = None,
                            steps: int = 100, name: str = "cfp_halfspaces"):
    """Cyclic projections onto finitely many halfspaces with a point ``witness`` in common.

    The residual is ``max_i dist(x, C_i)``; the zero-set oracle projects
    exactly onto the polyhedron.  For two or more sets the metric-regularity
    modulus has the semi-algebraic shape with degree 1.  Its constant ``c``
    is calibrated by sampling unless supplied; either way the instance is
    marked uncertified.
    """
    hs = tuple(h if isinstance(h, Halfspace) else set_from_dict(h) for h in halfspaces)
    if not hs or not all(isinstance(h, Halfspace) for h in hs):
        raise ValueError("need a nonempty list of halfspaces")
    C = Polyhedron(hs)
    if witness is None:
        raise ValueError("a witness point in the intersection is required")
    w = as_vector(witness)
    if not C.contains(w):
        raise ValueError("witness is not in every halfspace; description may be infeasible")
    n, m = C.dim, len(hs)
    x0 = as_vector(x0)
    b = _bound(x0, w) if b is None else float(b)

    A = np.array([h.a for h in hs])
    beta = np.array([h.beta for h in hs])
    scale = np.linalg.norm(A, axis=1)

    def set_dists(X):
        return np.maximum(np.atleast_2d(X) @ A.T - beta, 0.0) / scale

    residual = it.Batched(lambda x: max(h.distance(x) for h in hs), lambda X: set_dists(X).max(axis=1))
    dist = it.Batched(C.distance, C.distance_many)
    certified = True
    if m == 1:
        rho = Linear(1.0)
    else:
        if c is None:
            certified = False
            rng = make_rng(CALIBRATION["seed"])
            pts = ClosedBall(w, b).sample(CALIBRATION["samples"], rng)
            res = residual.many(pts)
            dd = C.distance_many(pts)
            grid = np.logspace(-3, math.log10(b), CALIBRATION["points"])
            deltas = estimate_thresholds(lambda i: res[int(i)], lambda i: dd[int(i)],
                                         np.arange(len(pts)), grid)
            c = calibrate_semialgebraic_c(grid, deltas, n, 1, m, margin=CALIBRATION["margin"])
        else:
            certified = False
        rho = modulus_metric_regularity_semialgebraic(n, 1, m, float(c))
    phi = compose_with_metric_regularity(modulus_retraction(), rho)
    ops = [h.projector() for h in hs]

    def drive(recipe, steps, kw):
        return it.run_cyclic(ops, x0, steps, **kw)

    params = {"halfspaces": [h.to_dict() for h in hs], "witness": w.tolist(), "b": b, "steps": steps, "name": name}
    if m > 1:
        params["c"] = float(c)
    return ProblemInstance(
        name=name, kind="fixed_point", builder="cfp_halfspaces", params=params,
        dim=n, residual=residual, zero_distance=dist, z=w, b=b, x0=x0,
        recipe=Recipe("cyclic", steps), runner=_make_runner(drive, residual, dist, w),
        modulus=phi, rate=rate_cyclic_two_sets(b) if m <= 2 else None, sets=hs,
        certified=certified, extra={"rho": rho, "polyhedron": C},
        notes="" if certified else "metric-regularity constant c is empirical, not certified",
    )


# proximal point on the norm ----------------------------------------------------

@builder("min_norm")
def instance_min_norm(dim: int, x0, gamma=None, b: float | None = None, residual: str = "operator",
                      steps: int = 30, name: str = "min_norm"):
    """PPA for ``f = ||.||`` in ``R^dim``; the prox is radial soft thresholding.

    ``residual="operator"`` uses ``dist(0, df(x))`` (1 off the origin, 0 at
    it) with the weak-sharp PPA modulus and finite-termination radius
    ``eps* = 1``; ``residual="objective"`` uses ``f(x) - 0`` with the weak
    sharp modulus ``psi(eps) = eps``.
    """
    sched = StepSchedule.constant(1.0) if gamma is None else (
        gamma if isinstance(gamma, StepSchedule) else StepSchedule.from_dict(gamma))
    f = Norm(dim)
    x0 = as_vector(x0)
    z = np.zeros(dim)
    b = _bound(x0, z) if b is None else float(b)

    def dist(x):
        return float(np.linalg.norm(as_vector(x)))

    if residual == "operator":
        res, kind = f.subdiff_dist, "operator"
        phi = modulus_ppa_weak_sharp(Linear(1.0), Linear(1.0), b)
        rate = rate_ppa(theta_from_sequence(sched, squared=True), b)
        eps_star = 1.0
    elif residual == "objective":
        res, kind = f.value, "minimization"
        phi = modulus_weak_sharp(Linear(1.0))
        rate, eps_star = None, None
    else:
        raise ValueError("residual must be 'operator' or 'objective'")

    def drive(recipe, steps, kw):
        return it.run_ppa(f.resolvent, recipe.schedule, x0, steps, **kw)

    return ProblemInstance(
        name=name, kind=kind, builder="min_norm",
        params={"dim": dim, "gamma": sched.to_dict(), "b": b, "residual": residual, "steps": steps, "name": name},
        dim=dim, residual=res, zero_distance=dist, z=z, b=b, x0=x0,
        recipe=Recipe("ppa", steps, sched), runner=_make_runner(drive, res, dist, z),
        modulus=phi, rate=rate, eps_star=eps_star, monotone_fix_residual=sched.is_constant,
        objective=f.value, minimum=0.0, extra={"prox": f},
    )


# contraction and orbital contraction --------------------------------------------

@builder("contraction")
def instance_contraction(k: float, x0, b: float | None = None, steps: int = 60, name: str = "contraction"):
    """Picard iteration of ``x -> k x``; the rate ``min{n : (1-k) b k^n < eps}`` is exact."""
    x0 = as_vector(x0)
    n = x0.shape[0]
    z = np.zeros(n)
    T = Operator(lambda x: k * x, n, "nonexpansive", f"{k}*Id")
    b = _bound(x0, z) if b is None else float(b)
    res = _fixres(T)

    def dist(x):
        return float(np.linalg.norm(as_vector(x)))

    def drive(recipe, steps, kw):
        return it.run_picard(T, x0, steps, **kw)

    return ProblemInstance(
        name=name, kind="fixed_point", builder="contraction",
        params={"k": k, "b": b, "steps": steps, "name": name},
        dim=n, residual=res, zero_distance=dist, z=z, b=b, x0=x0,
        recipe=Recipe("picard", steps), runner=_make_runner(drive, res, dist, z),
        modulus=modulus_contraction(k), rate=Geometric((1 - k) * b, k), operator=T,
        monotone_fix_residual=True,
    )


@builder("triangle_orbital")
def instance_triangle_orbital(x0, steps: int = 60, name: str = "triangle_orbital"):
    """``(x, y) -> (x, (y + 1 - x) / 2)`` on the triangle ``0 <= x, 0 <= y <= 1 - x``.

    Fixed points form the hypotenuse ``y = 1 - x``; the map halves the
    fixed-point residual at each step.
    """
    x0 = as_vector(x0)
    if not _in_triangle(x0):
        raise ValueError("start must lie in the triangle")
    T = Operator(lambda p: np.array([p[0], 0.5 * (p[1] + 1.0 - p[0])]), 2, "general", "triangle")
    z = np.array([x0[0], 1.0 - x0[0]])
    b = _bound(x0, z)
    res = _fixres(T)

    def dist(p):
        p = as_vector(p)
        return max(1.0 - p[0] - p[1], 0.0) / math.sqrt(2.0)

    def drive(recipe, steps, kw):
        return it.run_picard(T, x0, steps, **kw)

    return ProblemInstance(
        name=name, kind="fixed_point", builder="triangle_orbital", params={"steps": steps, "name": name},
        dim=2, residual=res, zero_distance=dist, z=z, b=b, x0=x0,
        recipe=Recipe("picard", steps), runner=_make_runner(drive, res, dist, z),
        modulus=modulus_orbital_contraction(0.5), operator=T, domain=_in_triangle,
    )


def _in_triangle(p) -> bool:
    return bool(p[0] >= 0 and p[1] >= 0 and p[0] + p[1] <= 1)


# f(x) = x^2 seen through its resolvent, objective and derivative -------------------

XSQ_VIEWS = ("resolvent", "resolvent_from_f", "resolvent_from_subdiff", "objective", "subdiff")


@builder("xsq")
def instance_xsq(view: str, x0=(0.9,), gamma: float = 1.0, r: float = 2.0, r_prime: float = 1.0,
                 steps: int = 40, name: str | None = None):
    """``f(x) = x^2`` on ``R`` with one modulus per view.

    The starting point is the resolvent ``J(x) = x / (1 + 2 gamma)`` with the
    sound modulus ``2 gamma eps / (1 + 2 gamma)`` on ``B(0, r)``; the other
    views carry converted moduli, each claimed on its own ball.
    """
    if view not in XSQ_VIEWS:
        raise ValueError(f"view must be one of {XSQ_VIEWS}")
    x0 = as_vector(x0)
    z = np.zeros(1)
    b = _bound(x0, z)
    q = SquaredDistance(np.zeros(1), 2.0)
    J = q.resolvent(gamma)
    phi_J = Linear(2 * gamma / (1 + 2 * gamma))

    def dist(x):
        return abs(float(as_vector(x)[0]))

    radius = r
    if view == "resolvent":
        kind, res, phi = "fixed_point", _fixres(J), phi_J
    elif view == "resolvent_from_f":
        # f is 2(r+1)-Lipschitz on B(0, r+1)
        rho = Linear(1.0, den=2 * (r + 1))
        kind, res = "fixed_point", _fixres(J)
        phi = convert_f_to_resolvent(Power(1.0, 2.0), rho, ModulusContext(z, r, gamma))
    elif view == "resolvent_from_subdiff":
        # Id + gamma df = (1 + 2 gamma) Id
        rho = Linear(1.0, den=1 + 2 * gamma)
        kind, res = "fixed_point", _fixres(J)
        phi = convert_subdiff_to_resolvent(Linear(2.0), rho, gamma)
    elif view == "objective":
        kind, res = "minimization", q.value
        phi = convert_resolvent_to_f(phi_J, gamma)
    else:
        kind, res = "operator", lambda x: 2.0 * abs(float(as_vector(x)[0]))
        phi = convert_resolvent_to_subdiff(phi_J, gamma, r, r_prime)
        radius = r_prime
    name = name or f"xsq_{view}"

    def drive(recipe, steps, kw):
        return it.run_ppa(q.resolvent, recipe.schedule, x0, steps, **kw)

    sched = StepSchedule.constant(gamma)
    return ProblemInstance(
        name=name, kind=kind, builder="xsq",
        params={"view": view, "gamma": gamma, "r": r, "r_prime": r_prime, "steps": steps, "name": name},
        dim=1, residual=res, zero_distance=dist, z=z, b=b, x0=x0,
        recipe=Recipe("ppa", steps, sched), runner=_make_runner(drive, res, dist, z),
        modulus=phi, modulus_radius=radius, operator=J, monotone_fix_residual=True,
        objective=q.value, minimum=0.0, extra={"prox": q},
    )


# variational inequality on a box ---------------------------------------------

VI_GRID = {1: 4001, 2: 401, 3: 61}


@builder("vi_box")
def instance_vi_box(A, q, lo, hi, x0, tau: float = 0.5, steps: int = 60, name: str = "vi_box"):
    """``VI(A, box)`` for affine ``A(x) = M x + q``.

    ``F(x) = min{0, inf_y <A(x), y - x>}``: the infimum of a linear function
    over a box is attained coordinatewise at an endpoint.  The solution set is
    located by a grid scan (dimension at most 3), so the distance oracle is
    accurate to about one grid spacing.
    """
    M = np.atleast_2d(np.array(A, dtype=float))
    qv = as_vector(q)
    box = Box(lo, hi)
    n = box.dim
    if M.shape != (n, n) or qv.shape[0] != n:
        raise ValueError("A must be an n x n matrix and q an n-vector")
    if n > 3:
        raise ValueError("grid-scan oracle limited to dimension 3")

    def residual(x):
        x = as_vector(x)
        if not box.contains(x, 0.0):
            return math.inf
        g = M @ x + qv
        return min(0.0, float(np.sum(np.minimum(g * box.lo, g * box.hi)) - g @ x))

    axes = [np.linspace(l, h, VI_GRID[n]) for l, h in zip(box.lo, box.hi)]
    G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    g = G @ M.T + qv
    vals = np.sum(np.minimum(g * box.lo, g * box.hi), axis=1) - np.sum(g * G, axis=1)
    spacing = max((h - l) / (VI_GRID[n] - 1) for l, h in zip(box.lo, box.hi))
    # Lipschitz bound for F on the box; the nearest grid point to a solution
    # lies within spacing * sqrt(n) / 2 of it
    extent = float(np.linalg.norm(box.hi - box.lo))
    gmax = float(np.max(np.linalg.norm(g, axis=1)))
    lip = 2 * float(np.linalg.norm(M, 2)) * extent + gmax
    keep = vals >= -lip * spacing * math.sqrt(n) / 2
    sol = G[keep]

    def dist(x):
        return float(np.min(np.linalg.norm(sol - as_vector(x), axis=1)))

    z = G[int(np.argmax(vals))]
    P = box.projector()
    step = np.eye(n) - tau * M
    ne = np.linalg.norm(step, 2) <= 1 + 1e-12
    T = Operator(lambda x: P(x - tau * (M @ x + qv)), n, "nonexpansive" if ne else "general", "P_box(Id-tau A)")
    x0 = as_vector(x0)

    def drive(recipe, steps, kw):
        return it.run_picard(T, x0, steps, **kw)

    return ProblemInstance(
        name=name, kind="equilibrium", builder="vi_box",
        params={"A": M.tolist(), "q": qv.tolist(), "lo": box.lo.tolist(), "hi": box.hi.tolist(),
                "tau": tau, "steps": steps, "name": name},
        dim=n, residual=residual, zero_distance=dist, z=z, b=_bound(x0, z), x0=x0,
        recipe=Recipe("picard", steps), runner=_make_runner(drive, residual, dist, z),
        operator=T, monotone_fix_residual=bool(ne), domain=lambda x: box.contains(x, 0.0), sets=(box,),
        extra={"grid_spacing": spacing},
        notes="zero-set oracle is a grid scan accurate to about one grid spacing",
    )


# Douglas-Rachford for two lines --------------------------------------------------

@builder("douglas_rachford_lines")
def instance_douglas_rachford_lines(angle: float, x0, lam: float = 0.5, gamma: float = 1.0,
                                    mu: float | None = None, holder_gamma: float = 1.0,
                                    b: float | None = None, steps: int = 200, name: str = "dr_lines"):
    """Douglas-Rachford for the lines ``x2 = 0`` and ``span(cos t, sin t)``.

    ``R_A R_B`` is a rotation by ``2t``, so ``Fix T = {0}`` and
    ``d(x, Tx) = 2 sin(t) |x|``.  The Hölder constants ``(mu, holder_gamma)``
    are inputs; ``mu = 1 / sin t`` with exponent 1 is the tight choice.
    """
    if not 0 < angle <= math.pi / 2:
        raise ValueError("angle must lie in (0, pi/2]")
    L1 = Hyperplane([0.0, 1.0], 0.0)
    L2 = Hyperplane([-math.sin(angle), math.cos(angle)], 0.0)
    res_A = lambda g: L1.projector()  # noqa: E731  normal-cone resolvents are projections
    res_B = lambda g: L2.projector()  # noqa: E731
    T = it.douglas_rachford_operator(res_A, res_B, gamma)
    x0 = as_vector(x0)
    z = np.zeros(2)
    b = _bound(x0, z) if b is None else float(b)
    mu = 1.0 / math.sin(angle) if mu is None else float(mu)
    sched = StepSchedule.constant(lam)
    res = _fixres(T)

    def dist(x):
        return float(np.linalg.norm(as_vector(x)))

    def drive(recipe, steps, kw):
        return it.run_douglas_rachford(res_A, res_B, gamma, recipe.schedule, x0, steps, **kw)

    return ProblemInstance(
        name=name, kind="fixed_point", builder="douglas_rachford_lines",
        params={"angle": angle, "lam": lam, "gamma": gamma, "mu": mu, "holder_gamma": holder_gamma,
                "b": b, "steps": steps, "name": name},
        dim=2, residual=res, zero_distance=dist, z=z, b=b, x0=x0,
        recipe=Recipe("douglas_rachford", steps, sched), runner=_make_runner(drive, res, dist, z),
        modulus=modulus_holder(mu, holder_gamma),
        rate=rate_mann_cat0(theta_from_sequence(sched, transform="mann"), b),
        operator=T, monotone_fix_residual=True, sets=(L1, L2),
    )


# Crombez averaged projections -----------------------------------------------------

@builder("crombez")
def instance_crombez(sets, weights, relaxations, x0, witness, alpha_star=None, steps: int = 80,
                     name: str = "crombez"):
    """Picard iteration of ``sum a_i (Id + l_i (P_i - Id))`` for halfspaces.

    A rate ``alpha_star`` for the per-set residuals may be supplied; it is
    audited but not derived here.
    """
    hs = tuple(s if isinstance(s, ConvexSet) else set_from_dict(s) for s in sets)
    C = Polyhedron(hs)
    w = as_vector(witness)
    if not C.contains(w):
        raise ValueError("witness is not in every set")
    x0 = as_vector(x0)
    T = convex_combination([s.projector() for s in hs], weights, relaxations)

    def residual(x):
        return max(s.distance(x) for s in hs)

    def drive(recipe, steps, kw):
        return it.run_crombez(hs, weights, relaxations, x0, steps, **kw)

    rate = None
    if alpha_star is not None:
        rate = alpha_star if isinstance(alpha_star, RateFn) else rate_from_dict(alpha_star)
    params = {"sets": [s.to_dict() for s in hs], "weights": list(weights), "relaxations": list(relaxations),
              "witness": w.tolist(), "steps": steps, "name": name}
    if rate is not None:
        params["alpha_star"] = rate.to_dict()
    return ProblemInstance(
        name=name, kind="fixed_point", builder="crombez", params=params,
        dim=C.dim, residual=residual, zero_distance=C.distance, z=w, b=_bound(x0, w), x0=x0,
        recipe=Recipe("crombez", steps), runner=_make_runner(drive, residual, C.distance, w),
        rate=rate, operator=T, monotone_fix_residual=True, sets=hs,
    )


# slowly converging firmly nonexpansive map ---------------------------------------

def specker_sequence(n: int, period: int = 5) -> float:
    """``1 - 2^(-floor(n / period))``."""
    return 1.0 - 2.0 ** (-(n // period))


@builder("specker")
def instance_specker_demo(a_seq=None, truncation: int = 60, x0=(0.0,), period: int = 5,
                          steps: int = 200, name: str = "specker"):
    """``T(x) = (x + f(x)) / 2`` with ``f(x) = sum_n 2^(-n-1) max(x, a_n)`` on ``[0, 1]``.

    The series is cut after ``truncation`` terms and the remaining weight
    ``2^-N`` is given to the last term, so ``f`` stays an average of
    nonexpansive maps and ``Fix T = [a_{N-1}, 1]`` exactly; the truncated map
    differs from the full one by at most ``2^-N``.  Demo only: no certified
    modulus is bundled, and convergence is arbitrarily slow when ``a_n``
    creeps up slowly.
    """
    N = int(truncation)
    if N < 1:
        raise ValueError("truncation must be positive")
    if a_seq is None:
        a = np.array([specker_sequence(k, period) for k in range(N)])
    else:
        a = np.array([float(v) for v in a_seq], dtype=float)
        if len(a) == 1:
            a = np.repeat(a, N)
        if len(a) < N:
            raise ValueError("a_seq shorter than the truncation")
        a = a[:N]
    if np.any(np.diff(a) < 0):
        raise ValueError("a_seq must be nondecreasing")
    if a.min() < 0 or a.max() > 1:
        raise ValueError("a_seq must lie in [0, 1]")
    weights = 2.0 ** -(np.arange(N) + 1.0)
    weights[-1] += 2.0 ** -N
    top = float(a[-1])

    def f(x):
        return float(weights @ np.maximum(x[0], a))

    T = Operator(lambda x: np.array([0.5 * (x[0] + f(x))]), 1, "firmly_nonexpansive", "specker")

    def dist(x):
        return max(top - float(as_vector(x)[0]), 0.0, float(as_vector(x)[0]) - 1.0)

    x0 = as_vector(x0)
    z = np.array([1.0])
    res = _fixres(T)

    def drive(recipe, steps, kw):
        return it.run_picard(T, x0, steps, **kw)

    params = {"truncation": N, "period": period, "steps": steps, "name": name}
    if a_seq is not None:
        params["a_seq"] = [float(v) for v in a_seq]
    return ProblemInstance(
        name=name, kind="fixed_point", builder="specker", params=params,
        dim=1, residual=res, zero_distance=dist, z=z, b=_bound(x0, z), x0=x0,
        recipe=Recipe("picard", steps), runner=_make_runner(drive, res, dist, z),
        operator=T, monotone_fix_residual=True, domain=lambda x: 0.0 <= x[0] <= 1.0,
        certified=False, extra={"limit": top, "tail_bound": 2.0 ** -N},
        notes="demo: no certified modulus of regularity exists in general",
    )


# catalog -------------------------------------------------------------------------

def _default_specs() -> dict:
    quad = [{"kind": "halfspace", "a": [1.0, 0.0], "beta": 0.0}, {"kind": "halfspace", "a": [0.0, 1.0], "beta": 0.0}]
    wedge = [{"kind": "halfspace", "a": [0.0, 1.0], "beta": 0.0},
             {"kind": "halfspace", "a": [-0.5, -1.0], "beta": 0.0}]
    return {
        "grad_quadratic": ("grad_quadratic", {"Q": [[1.0, 0.0], [0.0, 1.0]], "x0": [0.6, 0.7], "b": 1.0}),
        "grad_quadratic_aniso": ("grad_quadratic", {"Q": [[1.0, 0.0], [0.0, 4.0]], "x0": [0.6, 0.7], "b": 1.0,
                                                    "name": "grad_quadratic_aniso"}),
        "best_approx_pair": ("best_approx_pair", {
            "U": {"kind": "halfspace", "a": [1.0, 0.0], "beta": 0.0},
            "V": {"kind": "halfspace", "a": [-1.0, 0.0], "beta": -1.0}, "x0": [-2.0, 5.0]}),
        "cfp_wedge": ("cfp_halfspaces", {"halfspaces": wedge, "x0": [-1.0, 1.0], "witness": [0.0, 0.0],
                                         "b": 1.5, "name": "cfp_wedge"}),
        "cfp_quadrant": ("cfp_halfspaces", {"halfspaces": quad, "x0": [2.0, 2.0], "witness": [-1.0, -1.0],
                                            "name": "cfp_quadrant"}),
        "cfp_single": ("cfp_halfspaces", {"halfspaces": quad[:1], "x0": [2.0, 3.0], "witness": [0.0, 3.0],
                                          "name": "cfp_single"}),
        "min_norm": ("min_norm", {"dim": 1, "x0": [2.3], "b": 3.0}),
        "min_norm_2d": ("min_norm", {"dim": 2, "x0": [1.8, -1.2], "b": 3.0, "name": "min_norm_2d"}),
        "abs_value": ("min_norm", {"dim": 1, "x0": [0.8], "b": 1.0, "residual": "objective",
                                   "name": "abs_value"}),
        "contraction": ("contraction", {"k": 0.5, "x0": [1.0], "b": 1.0}),
        "triangle_orbital": ("triangle_orbital", {"x0": [0.2, 0.1]}),
        **{f"xsq_{v}": ("xsq", {"view": v}) for v in XSQ_VIEWS},
        "vi_box": ("vi_box", {"A": [[1.0]], "q": [0.0], "lo": [-1.0], "hi": [1.0], "x0": [1.0]}),
        "dr_lines": ("douglas_rachford_lines", {"angle": math.pi / 4, "x0": [1.0, 0.0]}),
        "dr_right_angle": ("douglas_rachford_lines", {"angle": math.pi / 2, "x0": [0.6, 0.8],
                                                      "name": "dr_right_angle"}),
        "crombez_quadrant": ("crombez", {"sets": quad, "weights": [0.5, 0.5], "relaxations": [1.0, 1.0],
                                         "x0": [2.0, 2.0], "witness": [0.0, 0.0],
                                         "name": "crombez_quadrant"}),
        "specker": ("specker", {}),
    }


DEFAULT_SPECS = _default_specs()
CATALOG = tuple(DEFAULT_SPECS)
_cache: dict = {}


def build(kind: str, params: dict) -> ProblemInstance:
    if kind not in BUILDERS:
        raise ValueError(f"unknown problem kind {kind!r}")
    return BUILDERS[kind](**params)


def get_instance(name: str) -> ProblemInstance:
    """Catalog instance ``name`` (built once and cached; instances are immutable)."""
    if name not in DEFAULT_SPECS:
        raise KeyError(f"unknown catalog instance {name!r}; choose from {', '.join(CATALOG)}")
    if name not in _cache:
        kind, params = DEFAULT_SPECS[name]
        _cache[name] = build(kind, dict(params))
    return _cache[name]


def catalog(names=None) -> list[ProblemInstance]:
    return [get_instance(n) for n in (CATALOG if names is None else names)]
