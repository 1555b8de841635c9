"""Fejér-monotone iterations with certified rates from moduli of regularity."""

from . import core, moduli, operators, rates, schedules  # noqa: F401  (registers node kinds)
from .core import ETA, AuditReport, ClosedBall, make_rng
from .moduli import Modulus
from .rates import RateFn

__all__ = ["ETA", "AuditReport", "ClosedBall", "Modulus", "RateFn", "make_rng"]
