"""Prescribed scalar velocity-gradient schedules kappa(t)."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class FlowSchedule:
    """Base class; subclasses implement :meth:`__call__`."""

    def __call__(self, t: float) -> float:  # pragma: no cover - abstract
        raise NotImplementedError

    @property
    def token(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(FlowSchedule):
    rate: float

    def __call__(self, t):
        return float(self.rate)

    @property
    def token(self):
        return f"constant:{self.rate!r}"


@dataclass(frozen=True)
class Zero(FlowSchedule):
    def __call__(self, t):
        return 0.0

    @property
    def token(self):
        return "zero"


@dataclass(frozen=True)
class Complex(FlowSchedule):
    """Transient stretching flow ``kappa(t) = 100 t (1 - t) exp(-4 t)``."""

    def __call__(self, t):
        return 100.0 * t * (1.0 - t) * math.exp(-4.0 * t)

    @property
    def token(self):
        return "complex"


@dataclass(frozen=True)
class Tabulated(FlowSchedule):
    """Piecewise-linear schedule through ``(times, values)``, clamped at the ends."""

    times: tuple
    values: tuple
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size == 0:
            raise ValueError("times and values must be equal-length 1D sequences")
        if np.any(np.diff(t) <= 0):
            raise ValueError("tabulated times must be strictly increasing")
        object.__setattr__(self, "times", tuple(t.tolist()))
        object.__setattr__(self, "values", tuple(v.tolist()))

    def __call__(self, t):
        return float(np.interp(t, self.times, self.values))

    @property
    def token(self):
        return f"table:{self.source}" if self.source else "table"

    @classmethod
    def from_csv(cls, path) -> "Tabulated":
        """Read a two-column ``t, kappa`` CSV; a non-numeric header row is skipped."""
        times, values = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    t, k = float(row[0]), float(row[1])
                except ValueError:
                    if times:
                        raise
                    continue
                times.append(t)
                values.append(k)
        return cls(tuple(times), tuple(values), source=str(path))


def kappa(schedule: FlowSchedule, t: float) -> float:
    if t < 0:
        raise ValueError("t must be nonnegative")
    return schedule(t)


def parse_flow(token: str, base_dir: Path | None = None) -> FlowSchedule:
    """Build a schedule from ``complex``, ``zero``, ``constant:<rate>`` or ``table:<csv>``."""
    token = token.strip()
    kind, _, arg = token.partition(":")
    kind = kind.lower()
    if kind == "complex" and not arg:
        return Complex()
    if kind == "zero" and not arg:
        return Zero()
    if kind == "constant" and arg:
        return Constant(float(arg))
    if kind == "table" and arg:
        path = Path(arg)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return Tabulated.from_csv(path)
    raise ValueError(f"unrecognized flow token {token!r}")
