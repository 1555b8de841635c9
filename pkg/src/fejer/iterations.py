"""Instrumented drivers producing Fejér-monotone traces.

Each driver records, for every iterate ``x_n``: the instance residual
``|F(x_n)|``, the fixed-point residual ``d(x_n, T x_n)``, the oracle distance
to the zero set and the Fejér gap ``d(x_n, z) - d(x_{n+1}, z)`` for a
reference zero ``z``.

When the step map depends on ``n`` only through ``n mod m`` (Picard and
constant schedules have ``m = 1``, cyclic projections onto ``m`` sets have
``m``) and ``x_{n+m}`` equals ``x_n`` bit for bit, the sequence repeats
with period ``m`` from ``n`` on.  The driver then stops computing and marks
the trace *stationary*; accessors extend the stored tail periodically to the
full logical length.  This keeps very large certified indices auditable.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import as_vector
from .operators import Operator, compose, convex_combination, gradient_step, reflected_resolvent
from .schedules import StepSchedule

MAX_STEPS = 2_000_000
BASE_COLUMNS = ("residual", "fix_residual", "dist", "fejer_gap")


class HorizonExceeded(RuntimeError):
    """A run would need more explicit steps than :data:`MAX_STEPS`."""


@dataclass(frozen=True, eq=False)
class Trace:
    xs: np.ndarray
    columns: dict
    length: int
    stationary: bool = False
    meta: dict = field(default_factory=dict)
    period: int = 1

    @property
    def stored(self) -> int:
        return self.xs.shape[0]

    @property
    def dim(self) -> int:
        return self.xs.shape[1]

    def __len__(self) -> int:
        return self.length

    def _row(self, n: int) -> int:
        if not 0 <= n < self.length:
            raise IndexError(f"index {n} outside trace of length {self.length}")
        if n < self.stored:
            return n
        start = self.stored - self.period
        return start + (n - start) % self.period

    def x(self, n: int) -> np.ndarray:
        return as_vector(self.xs[self._row(n)])

    def value(self, name: str, n: int) -> float:
        return float(self.columns[name][self._row(n)])

    def suffix(self, name: str, start: int) -> np.ndarray:
        """Stored values of column ``name`` covering every index ``>= start``."""
        return self.columns[name][self._tail(start):]

    def suffix_points(self, start: int) -> np.ndarray:
        return self.xs[self._tail(start):]

    def _tail(self, start: int) -> int:
        return min(self._row(start), self.stored - self.period)

    def prefix(self, name: str, stop: int) -> np.ndarray:
        """Column ``name`` at indices ``0..stop`` (inclusive, clipped to the trace)."""
        stop = min(stop, self.length - 1, self.stored - 1)
        return self.columns[name][: stop + 1]

    def first_below(self, name: str, eps: float) -> int | None:
        hit = np.nonzero(self.columns[name] < eps)[0]
        return int(hit[0]) if hit.size else None

    def expanded(self) -> Trace:
        """Copy with every logical row stored explicitly."""
        extra = self.length - self.stored
        if extra <= 0:
            return self
        idx = np.array([self._row(n) for n in range(self.length)])
        cols = {k: v[idx] for k, v in self.columns.items()}
        return Trace(self.xs[idx], cols, self.length, self.stationary, dict(self.meta), self.period)

    def swapped(self, i: int, j: int) -> Trace:
        """Copy with iterates ``i`` and ``j`` exchanged (columns recomputed lazily by callers)."""
        t = self.expanded()
        xs = t.xs.copy()
        xs[[i, j]] = xs[[j, i]]
        cols = {k: v.copy() for k, v in t.columns.items()}
        for v in cols.values():
            v[[i, j]] = v[[j, i]]
        return Trace(xs, cols, t.length, False, dict(t.meta))

    # export -------------------------------------------------------------------

    def column_names(self) -> list[str]:
        extras = [k for k in self.columns if k not in BASE_COLUMNS]
        return list(BASE_COLUMNS) + extras

    def to_csv(self) -> str:
        t = self.expanded()
        names = t.column_names()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", *names, *(f"x{i}" for i in range(t.dim))])
        for n in range(t.length):
            row = [n] + [_num(t.columns[c][n]) for c in names] + [_num(v) for v in t.xs[n]]
            w.writerow(row)
        return buf.getvalue()

    def to_json(self) -> str:
        t = self.expanded()
        doc = {
            "meta": self.meta,
            "length": t.length,
            "stationary_from": self.stored - self.period if self.stationary else None,
            "period": self.period,
            "columns": {c: [_jnum(v) for v in t.columns[c]] for c in t.column_names()},
            "x": [[_jnum(v) for v in row] for row in t.xs],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_csv(cls, text: str) -> Trace:
        rows = list(csv.reader(io.StringIO(text)))
        head, body = rows[0], rows[1:]
        xi = [i for i, h in enumerate(head) if h.startswith("x") and h[1:].isdigit()]
        ci = [i for i, h in enumerate(head) if i not in xi and h != "n"]
        xs = np.array([[float(r[i]) for i in xi] for r in body])
        cols = {head[i]: np.array([float(r[i]) for r in body]) for i in ci}
        return cls(xs, cols, len(body))


def _num(v) -> str:
    return format(float(v), ".17g")


def _jnum(v):
    # JSON has no nan/inf literals; those become strings
    v = float(v)
    return v if math.isfinite(v) else str(v)


def instance_hash(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


# driver core -----------------------------------------------------------------

@dataclass(frozen=True)
class Batched:
    """A point oracle together with a vectorised form applied to whole traces."""

    one: Callable
    many: Callable

    def __call__(self, x):
        return self.one(x)


def _drive(step: Callable, x0, steps: int, *, residual, zero_distance, z, period: int | None,
           extras: Callable | None = None, meta: dict | None = None) -> Trace:
    """Iterate ``x_{n+1}, info = step(n, x_n)``.

    ``info`` must contain ``fix_residual`` for row ``n``; ``step`` is also
    called on the final iterate to complete its row, and that successor is
    discarded.  ``period`` is the number of consecutive unchanged steps that
    is the lag ``m`` at which a bit-equal repeat ``x_{n+m} = x_n`` proves the
    sequence periodic (``None`` disables detection).
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    x = as_vector(x0)
    z = None if z is None else as_vector(z)
    xs, rows = [x], []
    res_many = getattr(residual, "many", None)
    dist_many = getattr(zero_distance, "many", None)
    stationary = False
    n = 0
    while True:
        if n >= MAX_STEPS and n < steps:
            raise HorizonExceeded(f"{steps} steps requested, cap is {MAX_STEPS}")
        last = n == steps
        try:
            nxt, info = step(n, x)
        except IndexError:
            if not last:
                raise
            nxt, info = x, {"fix_residual": float("nan")}
        row = dict(info)
        if res_many is None:
            row["residual"] = abs(float(residual(x))) if residual is not None else row["fix_residual"]
        if dist_many is None:
            row["dist"] = float(zero_distance(x)) if zero_distance is not None else float("nan")
        if extras is not None:
            row.update(extras(x))
        rows.append(row)
        if last:
            break
        x = as_vector(nxt)
        xs.append(x)
        n += 1
        if period is not None and n >= period and np.array_equal(x, xs[n - period]):
            stationary = True
            # the new row repeats the one a period earlier exactly
            rows.append(dict(rows[n - period]))
            break
    X = np.array(xs)
    keys = list(dict.fromkeys(k for r in rows for k in r))
    cols = {k: np.array([r.get(k, np.nan) for r in rows], dtype=float) for k in keys}
    if res_many is not None:
        cols["residual"] = np.abs(np.asarray(res_many(X), dtype=float))
    if dist_many is not None:
        cols["dist"] = np.asarray(dist_many(X), dtype=float)
    cols = {k: cols[k] for k in ["fix_residual", "residual", "dist"] + [k for k in cols if k not in
                                                                         ("fix_residual", "residual", "dist")]}
    if z is not None:
        dz = np.linalg.norm(X - z, axis=1)
        gap = np.full(len(dz), np.nan)
        gap[:-1] = dz[:-1] - dz[1:]
        if stationary:
            gap[-1] = dz[-1] - dz[len(dz) - period]
        cols["fejer_gap"] = gap
        cols["dist_ref"] = dz
    else:
        cols["fejer_gap"] = np.full(len(X), np.nan)
    X.flags.writeable = False
    for v in cols.values():
        v.flags.writeable = False
    return Trace(X, cols, steps + 1, stationary, dict(meta or {}), period if stationary else 1)


def _fix(x, tx) -> float:
    return float(np.linalg.norm(x - tx))


# drivers ---------------------------------------------------------------------

def run_picard(T: Operator, x0, steps: int, *, residual=None, zero_distance=None, z=None,
               until_stationary: bool = True) -> Trace:
    """``x_{n+1} = T x_n``."""

    def step(n, x):
        tx = T(x)
        return tx, {"fix_residual": _fix(x, tx)}

    return _drive(step, x0, steps, residual=residual, zero_distance=zero_distance, z=z,
                  period=1 if until_stationary else None, meta={"driver": "picard", "operator": T.name})


def run_mann(T: Operator, schedule: StepSchedule, x0, steps: int, *, residual=None,
             zero_distance=None, z=None, until_stationary: bool = True, extras=None) -> Trace:
    """``x_{n+1} = (1 - l_n) x_n + l_n T x_n`` with ``l_n`` in ``[0, 1]``."""
    schedule.check_range(0.0, 1.0, steps)

    def step(n, x):
        tx = T(x)
        lam = schedule[n]
        return (1.0 - lam) * x + lam * tx, {"fix_residual": _fix(x, tx)}

    period = 1 if until_stationary and schedule.is_constant else None
    return _drive(step, x0, steps, residual=residual, zero_distance=zero_distance, z=z, period=period,
                  extras=extras, meta={"driver": "mann", "operator": T.name, "schedule": schedule.to_dict()})


def run_cyclic(Ts: Sequence[Operator], x0, steps: int, *, residual=None, zero_distance=None, z=None,
               until_stationary: bool = True) -> Trace:
    """``x_{n+1} = T_{n mod m} x_n``; ``fix_residual`` is ``max_i d(x_n, T_i x_n)``."""
    Ts = list(Ts)
    if not Ts:
        raise ValueError("need at least one operator")
    m = len(Ts)

    def step(n, x):
        images = [T(x) for T in Ts]
        per = [_fix(x, y) for y in images]
        info = {"fix_residual": max(per)}
        info.update({f"set_residual_{i}": v for i, v in enumerate(per)})
        return images[n % m], info

    return _drive(step, x0, steps, residual=residual, zero_distance=zero_distance, z=z,
                  period=m if until_stationary else None,
                  meta={"driver": "cyclic", "operators": [T.name for T in Ts]})


def run_ppa(prox_family: Callable[[float], Operator], schedule: StepSchedule, x0, steps: int, *,
            residual=None, zero_distance=None, z=None, until_stationary: bool = True) -> Trace:
    """``x_{n+1} = J_{g_n A} x_n`` recording ``u_norm = ||x_n - x_{n+1}|| / g_n``."""
    if schedule.kind == "constant":
        if not schedule.value > 0:
            raise ValueError("PPA step sizes must be positive")
    else:
        schedule.check_range(0.0, np.inf, steps, open_lo=True)
    cache: dict = {}

    def J(g):
        if g not in cache:
            cache[g] = prox_family(g)
        return cache[g]

    def step(n, x):
        g = schedule[n]
        nxt = J(g)(x)
        d = _fix(x, nxt)
        return nxt, {"fix_residual": d, "u_norm": d / g}

    period = 1 if until_stationary and schedule.is_constant else None
    return _drive(step, x0, steps, residual=residual, zero_distance=zero_distance, z=z, period=period,
                  meta={"driver": "ppa", "schedule": schedule.to_dict()})


def douglas_rachford_operator(resolvent_A: Callable[[float], Operator],
                              resolvent_B: Callable[[float], Operator], gamma: float) -> Operator:
    """``R_{gA} R_{gB}``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return compose([reflected_resolvent(resolvent_A(gamma)), reflected_resolvent(resolvent_B(gamma))])


def run_douglas_rachford(resolvent_A, resolvent_B, gamma: float, schedule: StepSchedule, x0, steps: int, *,
                         residual=None, zero_distance=None, z=None, until_stationary: bool = True) -> Trace:
    """Mann iteration of ``R_{gA} R_{gB}`` with shadow columns ``J_{gB} x_n``."""
    T = douglas_rachford_operator(resolvent_A, resolvent_B, gamma)
    JB = resolvent_B(gamma)

    def shadow(x):
        s = JB(x)
        return {f"shadow_{i}": float(v) for i, v in enumerate(s)}

    tr = run_mann(T, schedule, x0, steps, residual=residual, zero_distance=zero_distance, z=z,
                  until_stationary=until_stationary, extras=shadow)
    tr.meta.update({"driver": "douglas_rachford", "gamma": gamma})
    return tr


def run_gradient_descent(gradient: Callable, L: float, x0, steps: int, *, residual=None,
                         zero_distance=None, z=None, until_stationary: bool = True) -> Trace:
    """Picard iteration of ``Id - grad f / L``; ``fix_residual`` equals ``||grad f(x_n)|| / L``."""
    x0 = as_vector(x0)
    T = gradient_step(gradient, L, x0.shape[0])
    tr = run_picard(T, x0, steps, residual=residual, zero_distance=zero_distance, z=z,
                    until_stationary=until_stationary)
    tr.meta.update({"driver": "gradient_descent", "L": L})
    return tr


def run_crombez(sets, weights, relaxations, x0, steps: int, *, residual=None, zero_distance=None, z=None,
                until_stationary: bool = True) -> Trace:
    """Picard iteration of ``sum a_i (Id + l_i (P_i - Id))`` with per-set residuals."""
    sets = list(sets)
    T = convex_combination([s.projector() for s in sets], weights, relaxations)

    def step(n, x):
        tx = T(x)
        return tx, {"fix_residual": _fix(x, tx)}

    def per_set(x):
        return {f"set_residual_{i}": s.distance(x) for i, s in enumerate(sets)}

    return _drive(step, x0, steps, residual=residual, zero_distance=zero_distance, z=z,
                  period=1 if until_stationary else None, extras=per_set,
                  meta={"driver": "crombez", "weights": list(weights), "relaxations": list(relaxations)})
