"""Problem files: JSON documents describing one catalog-style instance.

A document looks like::

    {"schema": "fejer-problem/1", "name": ..., "kind": <builder>,
     "params": {...}, "x0": [...], "z": [...], "b": ...,
     "modulus": {...}, "modulus_radius": ..., "rate": {...},
     "eps_star": ..., "recipe": {"driver": ..., "steps": ..., "schedule": {...}}}

``kind`` and ``params`` rebuild the instance through its builder; the
remaining fields override what the builder derived.  A file written by
:func:`save_problem` parses back to an instance with the same document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import problems as P
from .core import as_vector
from .moduli import node_from_dict
from .rates import rate_from_dict

OPTIONAL = ("z", "b", "modulus", "modulus_radius", "rate", "eps_star", "recipe")


class ConfigError(ValueError):
    """A problem document that cannot be turned into an instance."""


@dataclass(frozen=True)
class RunConfig:
    """Resolved command-line settings."""

    command: str
    problem: str | None = None
    steps: int | None = None
    eps: tuple = ()
    samples: int = 2000
    seed: int = 0
    eta: float = 1e-9
    fmt: str = "csv"
    out: str | None = None
    fault: str | None = None

    def __post_init__(self):
        if self.fmt not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, not {self.fmt!r}")
        if self.samples < 1:
            raise ConfigError("samples must be a positive integer")
        if self.steps is not None and self.steps < 0:
            raise ConfigError("steps must be nonnegative")
        if self.eta < 0:
            raise ConfigError("eta must be nonnegative")
        if any(not e > 0 for e in self.eps):
            raise ConfigError("every eps must be positive")


def _field(doc: dict, key: str, convert):
    try:
        return convert(doc[key])
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"field {key!r}: {exc}") from exc


def from_config(doc: dict) -> P.ProblemInstance:
    """Instance described by ``doc``; errors name the offending field."""
    if not isinstance(doc, dict):
        raise ConfigError("problem document must be a JSON object")
    schema = doc.get("schema", P.SCHEMA)
    if schema != P.SCHEMA:
        raise ConfigError(f"field 'schema': unsupported version {schema!r}")
    kind = doc.get("kind")
    if kind not in P.BUILDERS:
        raise ConfigError(f"field 'kind': unknown problem kind {kind!r}")
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("field 'params': must be an object")
    params = dict(params)
    if "x0" in doc:
        params["x0"] = _field(doc, "x0", lambda v: as_vector(v).tolist())
    if "name" in doc:
        params["name"] = str(doc["name"])
    try:
        inst = P.build(kind, params)
    except TypeError as exc:
        raise ConfigError(f"field 'params': {exc}") from exc
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"field 'params': {exc}") from exc
    over = {}
    if "z" in doc:
        over["z"] = _field(doc, "z", as_vector)
    if "b" in doc:
        over["b"] = _field(doc, "b", float)
    if "modulus" in doc:
        over["modulus"] = _field(doc, "modulus", node_from_dict)
    if "modulus_radius" in doc:
        over["modulus_radius"] = _field(doc, "modulus_radius", lambda v: None if v is None else float(v))
    if "rate" in doc:
        over["rate"] = _field(doc, "rate", rate_from_dict)
    if "eps_star" in doc:
        over["eps_star"] = _field(doc, "eps_star", lambda v: None if v is None else float(v))
    if "recipe" in doc:
        over["recipe"] = _field(doc, "recipe", P.Recipe.from_dict)
        if inst.recipe is not None and over["recipe"].driver != inst.recipe.driver:
            raise ConfigError(f"field 'recipe': driver {over['recipe'].driver!r} does not fit kind {kind!r}")
    try:
        return inst.with_overrides(**over) if over else inst
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def to_config(problem: P.ProblemInstance) -> dict:
    return problem.to_config()


def load_problem(path: str | Path) -> P.ProblemInstance:
    """Parse a problem file; JSON syntax errors report line and column."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return from_config(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def dumps(problem: P.ProblemInstance) -> str:
    return json.dumps(to_config(problem), indent=2, default=_default) + "\n"


def save_problem(problem: P.ProblemInstance, path: str | Path) -> None:
    Path(path).write_text(dumps(problem))


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")
