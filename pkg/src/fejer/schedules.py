"""Step-size sequences: Mann coefficients and PPA step lengths."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True)
class StepSchedule:
    """A nonnegative sequence ``s_0, s_1, ...``.

    kind
        ``"constant"`` (``value``), ``"list"`` (``values``, finite) or
        ``"power"`` meaning ``scale / (k + 1) ** exponent``.
    """

    kind: str
    value: float = 0.0
    values: tuple = ()
    scale: float = 1.0
    exponent: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "list", "power"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "list":
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
            if not self.values:
                raise ValueError("empty list schedule")
            if min(self.values) < 0:
                raise ValueError("schedule entries must be nonnegative")
        elif self.kind == "constant" and self.value < 0:
            raise ValueError("schedule entries must be nonnegative")
        elif self.kind == "power" and self.scale < 0:
            raise ValueError("schedule entries must be nonnegative")

    @classmethod
    def constant(cls, value: float) -> StepSchedule:
        return cls("constant", value=float(value))

    @classmethod
    def from_list(cls, values) -> StepSchedule:
        return cls("list", values=tuple(values))

    @classmethod
    def power(cls, scale: float, exponent: float) -> StepSchedule:
        return cls("power", scale=float(scale), exponent=float(exponent))

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def __len__(self) -> int:
        if self.kind != "list":
            raise TypeError("only list schedules have a length")
        return len(self.values)

    def __getitem__(self, k: int) -> float:
        if k < 0:
            raise IndexError(k)
        if self.kind == "constant":
            return self.value
        if self.kind == "list":
            if k >= len(self.values):
                raise IndexError(f"schedule exhausted at step {k}")
            return self.values[k]
        return self.scale / (k + 1) ** self.exponent

    def exact(self, k: int) -> Fraction:
        if self.kind == "power" and float(self.exponent).is_integer():
            return Fraction(self.scale) / Fraction(k + 1) ** int(self.exponent)
        return Fraction(self[k])

    def check_range(self, lo: float, hi: float, upto: int, *, open_lo=False) -> None:
        n = min(upto, len(self.values)) if self.kind == "list" else upto
        for k in range(n if self.kind != "constant" else 1):
            s = self[k]
            if s > hi or s < lo or (open_lo and s == lo):
                raise ValueError(f"schedule value {s} at step {k} outside allowed range")

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "list":
            return {"kind": "list", "values": list(self.values)}
        return {"kind": "power", "scale": self.scale, "exponent": self.exponent}

    @classmethod
    def from_dict(cls, d: dict) -> StepSchedule:
        kind = d["kind"]
        if kind == "constant":
            return cls.constant(d["value"])
        if kind == "list":
            return cls.from_list(d["values"])
        if kind == "power":
            return cls.power(d["scale"], d["exponent"])
        raise ValueError(f"unknown schedule kind {kind!r}")
