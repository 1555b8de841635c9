"""Machine-checked predicates over traces, operators and moduli.

Every check returns an :class:`~fejer.core.AuditReport` whose
``worst_violation`` is the largest amount by which the audited inequality
fails (negative when it holds with room to spare).  Strict inequalities
are audited with the absolute slack ``eta``.  Sampling uses
:func:`~fejer.core.make_rng`, so a report is reproduced exactly by its
seed and parameters.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import problems as P
from .core import ETA, AuditReport, ClosedBall, as_vector, make_rng, quadrilateral_defect
from .iterations import Trace
from .moduli import Linear, Modulus, PROBE_GRID, Scaled
from .operators import (
    Ball,
    Box,
    ConvexSet,
    Halfspace,
    Hyperplane,
    Affine,
    Norm,
    Polyhedron,
    Proximable,
    SquaredDistance,
    classify_by_sampling,
)
from .rates import RateFn, cauchy_modulus, dist_rate, finite_termination_index

DEFAULT_EPS = (2.0, 1.0, 0.5, 0.2, 0.1, 0.05)
DEFAULT_SAMPLES = 2000
DOMINANCE_WINDOW = 200
PAIRWISE_LIMIT = 3000
GRADIENT_TOL = 1e-5
GAMMAS = (0.5, 1.0, 2.0)


# traces ------------------------------------------------------------------------

def check_fejer(trace: Trace, z, eta: float = ETA) -> AuditReport:
    """``max_n d(x_{n+1}, z) - d(x_n, z)``."""
    if trace.length == 0 or trace.stored == 0:
        raise ValueError("empty trace")
    z = as_vector(z)
    d = np.linalg.norm(trace.xs - z, axis=1)
    if len(d) < 2:
        return AuditReport("fejer", 0.0, eta, {}, {"length": trace.length})
    inc = d[1:] - d[:-1]
    i = int(np.argmax(inc))
    return AuditReport("fejer", float(max(inc[i], 0.0)), eta,
                       {"n": i, "d_n": float(d[i]), "d_next": float(d[i + 1])},
                       {"length": trace.length, "instance": trace.meta.get("instance")})


def check_fix_residual_monotone(trace: Trace, eta: float = ETA) -> AuditReport:
    """``d(x_{n+1}, T x_{n+1}) <= d(x_n, T x_n)`` along the trace."""
    r = trace.columns["fix_residual"]
    r = r[~np.isnan(r)]
    if len(r) < 2:
        return AuditReport("fix_residual_monotone", 0.0, eta)
    inc = r[1:] - r[:-1]
    i = int(np.argmax(inc))
    return AuditReport("fix_residual_monotone", float(max(inc[i], 0.0)), eta,
                       {"n": i, "r_n": float(r[i]), "r_next": float(r[i + 1])},
                       {"instance": trace.meta.get("instance")})


# moduli -------------------------------------------------------------------------

def _residuals(problem, pts) -> tuple[np.ndarray, np.ndarray]:
    res = np.array([abs(float(problem.residual(p))) for p in pts])
    dist = np.array([float(problem.zero_distance(p)) for p in pts])
    return res, dist


def check_modulus_soundness(problem, phi: Modulus | None = None, ball: ClosedBall | None = None,
                            eps_grid: Sequence[float] = DEFAULT_EPS, samples: int = DEFAULT_SAMPLES,
                            seed: int = 0, eta: float = ETA) -> AuditReport:
    """``|F(x)| < phi(eps)  =>  dist(x, zer F) < eps`` over sampled ``x`` in ``ball``.

    The violation is the worst ``dist(x, zer F) - eps`` among samples whose
    residual is below the threshold.
    """
    phi = phi if phi is not None else problem.modulus
    if phi is None:
        raise ValueError(f"{problem.name}: no modulus to audit")
    ball = ball if ball is not None else problem.ball
    pts = problem.sample_domain(ball, samples, make_rng(seed))
    res, dist = _residuals(problem, pts)
    worst, wit = -np.inf, {}
    for e in eps_grid:
        thr = phi(e)
        mask = res < thr
        if not mask.any():
            continue
        v = np.where(mask, dist - e, -np.inf)
        i = int(np.argmax(v))
        if v[i] > worst:
            worst = float(v[i])
            wit = {"eps": e, "threshold": thr, "sample": i, "x": pts[i], "residual": float(res[i]),
                   "dist": float(dist[i])}
    return AuditReport(f"modulus_soundness[{problem.name}]", worst, eta, wit,
                       {"eps_grid": list(eps_grid), "samples": samples, "seed": seed,
                        "radius": ball.radius, "modulus": str(phi)})


def check_growth(problem, phi: Modulus | None = None, ball: ClosedBall | None = None,
                 samples: int = DEFAULT_SAMPLES, seed: int = 0, eta: float = ETA) -> AuditReport:
    """``f(x) >= m + phi(dist(x, S))`` for minimization instances."""
    phi = phi if phi is not None else problem.modulus
    if problem.objective is None or problem.minimum is None:
        raise ValueError(f"{problem.name}: not a minimization instance")
    ball = ball if ball is not None else problem.ball
    pts = problem.sample_domain(ball, samples, make_rng(seed))
    worst, wit = -np.inf, {}
    lo, hi = PROBE_GRID[0], PROBE_GRID[-1]
    for i, p in enumerate(pts):
        d = float(problem.zero_distance(p))
        if not lo <= d <= hi:
            continue
        gap = problem.objective(p) - problem.minimum
        if gap < -eta:
            v = -gap
        else:
            v = phi(d) - gap
        if v > worst:
            worst, wit = v, {"sample": i, "x": p, "dist": d, "excess": gap}
    return AuditReport(f"growth[{problem.name}]", worst, eta, wit,
                       {"samples": samples, "seed": seed, "radius": ball.radius})


def check_metric_regularity(sets: Sequence[ConvexSet], rho: Modulus, ball: ClosedBall,
                            eps_grid: Sequence[float] = DEFAULT_EPS, samples: int = DEFAULT_SAMPLES,
                            seed: int = 0, eta: float = ETA,
                            intersection_distance: Callable | None = None) -> AuditReport:
    """``max_i dist(x, C_i) < rho(eps)  =>  dist(x, C) < eps`` over sampled ``x``.

    A single set is its own intersection and halfspace families use the
    exact polyhedral oracle; other families need ``intersection_distance``.
    """
    sets = list(sets)
    if intersection_distance is None and len(sets) == 1:
        intersection_distance = sets[0].distance
    if intersection_distance is None:
        if not all(isinstance(s, Halfspace) for s in sets):
            raise ValueError("intersection oracle required for non-halfspace families")
        intersection_distance = Polyhedron(tuple(sets)).distance_many
        pts = ball.sample(samples, make_rng(seed))
        dc = intersection_distance(pts)
    else:
        pts = ball.sample(samples, make_rng(seed))
        dc = np.array([intersection_distance(p) for p in pts])
    di = np.max(np.stack([[s.distance(p) for p in pts] for s in sets]), axis=0)
    worst, wit = -np.inf, {}
    for e in eps_grid:
        thr = rho(e)
        v = np.where(di < thr, dc - e, -np.inf)
        i = int(np.argmax(v))
        if v[i] > worst:
            worst = float(v[i])
            wit = {"eps": e, "threshold": thr, "sample": i, "x": pts[i], "max_set_dist": float(di[i]),
                   "dist": float(dc[i])}
    return AuditReport(f"metric_regularity[{len(sets)} sets]", worst, eta, wit,
                       {"eps_grid": list(eps_grid), "samples": samples, "seed": seed, "rho": str(rho)})


# certificates ---------------------------------------------------------------------

def _diameter(points: np.ndarray) -> tuple[float, bool]:
    """Diameter of a point set; exact up to :data:`PAIRWISE_LIMIT` distinct points, else an upper bound."""
    pts = np.unique(points, axis=0)
    if len(pts) <= 1:
        return 0.0, True
    if len(pts) <= PAIRWISE_LIMIT:
        best = 0.0
        for k in range(0, len(pts), 256):
            blk = pts[k:k + 256]
            d = np.linalg.norm(blk[:, None, :] - pts[None, :, :], axis=2)
            best = max(best, float(d.max()))
        return best, True
    return 2.0 * float(np.max(np.linalg.norm(pts - pts[-1], axis=1))), False


def certified_indices(alpha: RateFn, phi: Modulus, eps: float) -> dict:
    return {"alpha": alpha(eps), "dist": dist_rate(alpha, phi)(eps), "cauchy": cauchy_modulus(alpha, phi)(eps)}


def check_certificate_dominance(problem, alpha: RateFn | None = None, phi: Modulus | None = None,
                                eps_grid: Sequence[float] = DEFAULT_EPS, window: int = DOMINANCE_WINDOW,
                                eta: float = ETA, trace: Trace | None = None) -> AuditReport:
    """Audit a rate and modulus certificate against a run of the instance.

    For every ``eps``: some ``n <= alpha(eps)`` has ``|F(x_n)| < eps``;
    every ``n >= alpha(phi(eps))`` has ``dist(x_n, zer F) < eps``; any two
    iterates beyond ``alpha(phi(eps/2))`` are within ``eps``.  The run is
    extended ``window`` steps beyond the largest certified index.
    """
    alpha = alpha if alpha is not None else problem.rate
    phi = phi if phi is not None else problem.modulus
    if alpha is None or phi is None:
        raise ValueError(f"{problem.name}: certificate needs both a rate and a modulus")
    table = {e: certified_indices(alpha, phi, e) for e in eps_grid}
    horizon = max(max(v.values()) for v in table.values()) + window
    tr = trace if trace is not None else problem.run(horizon)
    if tr.length <= horizon:
        raise ValueError("supplied trace is shorter than the certified horizon")
    worst, wit, first_hits, exact = -np.inf, {}, {}, True
    for e, idx in table.items():
        first_hits[e] = tr.first_below("dist", e)
        cands = []
        pre = tr.prefix("residual", idx["alpha"])
        cands.append((float(pre.min()) - e, {"check": "exists n <= alpha", "n": int(np.argmin(pre))}))
        suf = tr.suffix("dist", idx["dist"])
        j = int(np.argmax(suf))
        cands.append((float(suf[j]) - e, {"check": "dist beyond index", "n": idx["dist"] + j}))
        diam, ok = _diameter(tr.suffix_points(idx["cauchy"]))
        exact &= ok
        cands.append((diam - e, {"check": "cauchy beyond index", "n": idx["cauchy"]}))
        for v, w in cands:
            if v > worst:
                worst, wit = v, {"eps": e, **w, "indices": idx}
    return AuditReport(f"certificate_dominance[{problem.name}]", worst, eta, wit,
                       {"eps_grid": list(eps_grid), "horizon": horizon, "first_hits": first_hits,
                        "certified": {e: v["dist"] for e, v in table.items()},
                        "cauchy_exact": exact, "stationary_from": tr.stored - tr.period if tr.stationary else None})


def check_finite_termination(problem, alpha: RateFn | None = None, phi: Modulus | None = None,
                             eps_star: float | None = None, window: int = DOMINANCE_WINDOW) -> AuditReport:
    """Bit-exact constancy of the trace from ``alpha(min{eps*, phi(eps*)})`` on.

    Without ``phi`` (and none bundled as ``termination_modulus``) the index
    is ``alpha(eps*)``.
    """
    eps_star = eps_star if eps_star is not None else problem.eps_star
    if eps_star is None:
        raise ValueError(f"not applicable: {problem.name} declares no eps_star")
    alpha = alpha if alpha is not None else problem.rate
    if alpha is None:
        raise ValueError(f"{problem.name}: no rate bundled")
    phi = phi if phi is not None else problem.termination_modulus
    idx = finite_termination_index(alpha, phi, eps_star)
    tr = problem.run(idx + window)
    ref = tr.x(idx)
    tail = tr.suffix_points(idx)
    same = np.all(tail == ref, axis=1)
    worst = 0.0 if same.all() else float(np.max(np.linalg.norm(tail - ref, axis=1))) or np.inf
    # first index from which the whole trace is constant
    xs = tr.xs
    k = len(xs) - 1
    while k > 0 and np.array_equal(xs[k - 1], xs[-1]):
        k -= 1
    return AuditReport(f"finite_termination[{problem.name}]", worst, 0.0,
                       {"certified_index": idx, "empirical_index": k, "limit": ref,
                        "dist_at_index": tr.value("dist", idx)},
                       {"eps_star": eps_star, "window": window})


# operators -------------------------------------------------------------------------

def check_resolvent_inequality(f: Proximable, gamma: float, samples: int = DEFAULT_SAMPLES, seed: int = 0,
                               radius: float = 3.0, eta: float = ETA, prox: Callable | None = None,
                               name: str | None = None) -> AuditReport:
    """``f(Jx) - f(y) <= (|y-x|^2 - |Jx-x|^2 - |Jx-y|^2) / (2 gamma)`` for ``J = Prox_{gamma f}``."""
    prox = prox if prox is not None else (lambda x: f.prox(x, gamma))
    rng = make_rng(seed)
    ball = ClosedBall(np.zeros(f.dim), radius)
    xs, ys = ball.sample(samples, rng), ball.sample(samples, rng)
    worst, wit = -np.inf, {}
    for i, (x, y) in enumerate(zip(xs, ys)):
        j = as_vector(prox(x))
        rhs = (np.sum((y - x) ** 2) - np.sum((j - x) ** 2) - np.sum((j - y) ** 2)) / (2 * gamma)
        v = f.value(j) - f.value(y) - float(rhs)
        if v > worst:
            worst, wit = v, {"sample": i, "x": x, "y": y}
    return AuditReport(name or f"resolvent_inequality[{f.kind}, gamma={gamma}]", worst, eta, wit,
                       {"gamma": gamma, "samples": samples, "seed": seed})


def _resolvent_family(f: Proximable, gammas=GAMMAS, fault_prox: Callable | None = None, **kw) -> AuditReport:
    reps = [check_resolvent_inequality(f, g, prox=None if fault_prox is None else fault_prox(g), **kw)
            for g in gammas]
    worst = max(reps, key=lambda r: r.worst_violation)
    return AuditReport(f"resolvent_inequality[{f.kind}, R^{f.dim}]", worst.worst_violation, worst.eta,
                       {**worst.witness, "gamma": worst.params["gamma"]},
                       {"gammas": list(gammas), **{k: v for k, v in worst.params.items() if k != "gamma"}})


def check_projection_inequality(s: ConvexSet, samples: int = DEFAULT_SAMPLES, seed: int = 0,
                                radius: float = 3.0, eta: float = ETA) -> AuditReport:
    """``d(x, Px)^2 + d(Px, y)^2 <= d(x, y)^2`` for ``y`` in the set, plus idempotence."""
    rng = make_rng(seed)
    ball = ClosedBall(np.zeros(s.dim), radius)
    xs = ball.sample(samples, rng)
    ys = [s.project(p) for p in ball.sample(samples, rng)]
    worst, wit = -np.inf, {}
    for i, (x, y) in enumerate(zip(xs, ys)):
        px = s.project(x)
        v = float(np.sum((x - px) ** 2) + np.sum((px - y) ** 2) - np.sum((x - y) ** 2))
        v = max(v, float(np.linalg.norm(s.project(px) - px)))
        if v > worst:
            worst, wit = v, {"sample": i, "x": x, "y": y}
    return AuditReport(f"projection_inequality[{s.kind}]", worst, eta, wit,
                       {"samples": samples, "seed": seed})


def check_quadrilateral(samples: int = DEFAULT_SAMPLES, seed: int = 0, dim: int = 3, radius: float = 3.0,
                        eta: float = ETA) -> AuditReport:
    """Negated minimum of the quadrilateral defect over random quadruples."""
    rng = make_rng(seed)
    ball = ClosedBall(np.zeros(dim), radius)
    pts = [ball.sample(samples, rng) for _ in range(4)]
    worst, wit = -np.inf, {}
    for i in range(samples):
        v = -quadrilateral_defect(pts[0][i], pts[1][i], pts[2][i], pts[3][i])
        if v > worst:
            worst, wit = v, {"sample": i}
    return AuditReport(f"quadrilateral[R^{dim}]", worst, eta, wit, {"samples": samples, "seed": seed})


def check_gradient_finite_difference(gradient: Callable, f: Callable, ball: ClosedBall,
                                     samples: int = 200, seed: int = 0, h: float = 1e-6,
                                     tol: float = GRADIENT_TOL) -> AuditReport:
    """Relative error of central differences against ``gradient``; passes when ``<= tol``."""
    pts = ball.sample(samples, make_rng(seed))
    n = ball.dim
    worst, wit = -np.inf, {}
    for i, x in enumerate(pts):
        g = np.asarray(gradient(x), dtype=float)
        fd = np.array([(f(x + h * e) - f(x - h * e)) / (2 * h) for e in np.eye(n)])
        v = float(np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1.0))
        if v > worst:
            worst, wit = v, {"sample": i, "x": x}
    return AuditReport("gradient_finite_difference", worst, tol, wit, {"samples": samples, "seed": seed, "h": h})


def check_operator_class(problem, samples: int = DEFAULT_SAMPLES, seed: int = 0, eta: float = ETA) -> AuditReport:
    """Audit the declared class of the instance operator on ``B(z, b)``."""
    T = problem.operator
    ball = ClosedBall(problem.z, problem.b)
    if problem.domain is not None:
        # restrict both points of each pair to the domain
        pts = problem.sample_domain(ball, 2 * samples, make_rng(seed))

        class _Pairs:
            center, radius, dim = ball.center, ball.radius, ball.dim
            k = 0

            def sample(self, n, rng):
                out = pts[self.k:self.k + n]
                self.k += n
                return out

        ball = _Pairs()
    rep = classify_by_sampling(T, ball, samples, seed, eta=eta)
    r = rep.firmly_nonexpansive if T.kind == "firmly_nonexpansive" else rep.nonexpansive
    return AuditReport(f"operator_class[{problem.name}:{T.kind}]", r.worst_violation, eta, r.witness, r.params)


def check_pair_inequality(problem, samples: int = DEFAULT_SAMPLES, seed: int = 0, eta: float = ETA) -> AuditReport:
    """``d(Tx, P_V x)^2 <= rho^2 + d(u, x)^2 - d(u, Tx)^2`` for ``u`` in ``Fix T``."""
    viol = problem.extra["pair_inequality"]
    rng = make_rng(seed)
    ball = ClosedBall(problem.z, 2 * problem.b)
    xs, us = ball.sample(samples, rng), ball.sample(samples, rng)
    T = problem.operator
    worst, wit = -np.inf, {}
    for i, (x, u) in enumerate(zip(xs, us)):
        u = T(T(u))  # lands in Fix T for parallel halfspaces after one step
        v = viol(x, u)
        if v > worst:
            worst, wit = v, {"sample": i, "x": x, "u": u}
    return AuditReport(f"pair_inequality[{problem.name}]", worst, eta, wit, {"samples": samples, "seed": seed})


# full audit ------------------------------------------------------------------------

FAULTS = (
    "soft_threshold_off_by_one",
    "inflated_modulus",
    "doubled_certificate",
    "corrupted_gradient",
    "swapped_trace",
    "ill_conditioned_halfspaces",
)

STRUCTURAL = "structural"


def _structural(seed, samples, eta, fault):
    reps = []
    off = None
    if fault == "soft_threshold_off_by_one":
        f1 = Norm(1)
        off = lambda g: (lambda x: f1.prox(x, g + 1.0))  # noqa: E731
    reps.append(_resolvent_family(Norm(1), fault_prox=off, samples=samples, seed=seed, eta=eta))
    reps.append(_resolvent_family(Norm(3), samples=samples, seed=seed, eta=eta))
    reps.append(_resolvent_family(SquaredDistance(np.zeros(3)), samples=samples, seed=seed, eta=eta))
    for s in shipped_sets():
        reps.append(check_projection_inequality(s, samples, seed, eta=eta))
    reps.append(check_quadrilateral(samples, seed, 2, eta=eta))
    reps.append(check_quadrilateral(samples, seed, 3, eta=eta))
    return reps


def shipped_sets() -> list[ConvexSet]:
    """One representative of every closed-form set kind."""
    return [
        Halfspace([1.0, -2.0, 0.5], 0.3),
        Hyperplane([0.0, 1.0, 1.0], -0.5),
        Box([-1.0, 0.0, -0.5], [1.0, 2.0, 0.5]),
        Ball([0.5, 0.0, -0.5], 1.2),
        Affine([[1.0, 1.0, 0.0], [0.0, 1.0, -1.0]], [0.5, -0.2]),
        Polyhedron((Halfspace([1.0, 0.0, 0.0], 0.0), Halfspace([1.0, 1.0, 0.0], 0.5),
                    Halfspace([0.0, -1.0, 1.0], 0.2))),
    ]


def audit_instance(problem, seed: int = 0, eps_grid: Sequence[float] = DEFAULT_EPS,
                   samples: int = DEFAULT_SAMPLES, eta: float = ETA, fault: str | None = None) -> list[AuditReport]:
    """Every check that applies to ``problem``."""
    reps = []
    if problem.recipe is not None:
        tr = problem.run()
        fed = tr.swapped(1, 3) if fault == "swapped_trace" and problem.name == "contraction" else tr
        reps.append(_named(check_fejer(fed, problem.z, eta), f"fejer[{problem.name}]"))
        if problem.monotone_fix_residual:
            reps.append(_named(check_fix_residual_monotone(tr, eta), f"fix_residual_monotone[{problem.name}]"))
    if problem.modulus is not None:
        phi = problem.modulus
        if fault == "inflated_modulus" and problem.name == "grad_quadratic":
            phi = Scaled(10.0, phi)
        reps.append(check_modulus_soundness(problem, phi, eps_grid=eps_grid, samples=samples, seed=seed, eta=eta))
        if problem.kind == "minimization":
            reps.append(check_growth(problem, samples=samples, seed=seed, eta=eta))
    if problem.modulus is not None and problem.rate is not None:
        phi = problem.modulus
        if fault == "doubled_certificate" and problem.name == "contraction":
            phi = Scaled(2.0, phi)
        reps.append(check_certificate_dominance(problem, phi=phi, eps_grid=eps_grid, eta=eta))
    if problem.eps_star is not None:
        reps.append(check_finite_termination(problem))
    if problem.operator is not None and problem.operator.kind in ("nonexpansive", "firmly_nonexpansive"):
        reps.append(check_operator_class(problem, samples, seed, eta))
    if problem.gradient is not None:
        g = problem.gradient
        if fault == "corrupted_gradient" and problem.name == "grad_quadratic":
            g = (lambda grad: (lambda x: -grad(x)))(problem.gradient)
        reps.append(_named(check_gradient_finite_difference(g, problem.objective, ClosedBall(problem.z, problem.b),
                                                             seed=seed), f"gradient_finite_difference[{problem.name}]"))
    if "pair_inequality" in problem.extra:
        reps.append(check_pair_inequality(problem, samples, seed, eta))
    if "rho" in problem.extra and len(problem.sets) > 1 and isinstance(problem.extra["rho"], Modulus):
        sets = problem.sets
        if fault == "ill_conditioned_halfspaces" and problem.name == "cfp_wedge":
            sets = (Halfspace([0.0, 1.0], 0.0), Halfspace([-0.01, -1.0], 0.0))
        reps.append(_named(check_metric_regularity(sets, problem.extra["rho"], ClosedBall(problem.z, problem.b),
                                                   eps_grid, samples, seed, eta),
                           f"metric_regularity[{problem.name}]"))
    return reps


def _named(rep: AuditReport, name: str) -> AuditReport:
    rep.name = name
    return rep


def run_full_audit(selection: Sequence[str] | None = None, seed: int = 0, eps_grid: Sequence[float] = DEFAULT_EPS,
                   samples: int = DEFAULT_SAMPLES, eta: float = ETA, fault: str | None = None,
                   instances: Sequence | None = None) -> list[AuditReport]:
    """Run every applicable check on the selected catalog entries.

    ``selection=None`` means the whole catalog plus the structural checks
    (resolvent, projection and quadrilateral inequalities); the pseudo-name
    ``"structural"`` selects the latter explicitly.  ``instances`` adds
    already-built instances (for instance ones loaded from files).
    """
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}; choose from {', '.join(FAULTS)}")
    names = list(P.CATALOG) + [STRUCTURAL] if selection is None else list(selection)
    reps: list[AuditReport] = []
    for name in names:
        if name == STRUCTURAL:
            reps.extend(_structural(seed, samples, eta, fault))
        else:
            reps.extend(audit_instance(P.get_instance(name), seed, eps_grid, samples, eta, fault))
    for inst in instances or ():
        reps.extend(audit_instance(inst, seed, eps_grid, samples, eta, fault))
    return reps
