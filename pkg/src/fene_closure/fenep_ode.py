"""Closed macroscopic FENE-P equation for the conformation scalar ``M = <X^2>``."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import ModelParams

DEFAULT_DT = 1e-4


@dataclass(frozen=True)
class FenepState:
    m: float
    t: float


@dataclass(frozen=True)
class FenepTrajectory:
    times: np.ndarray
    m: np.ndarray
    params: ModelParams

    @property
    def stress(self) -> np.ndarray:
        return fenep_stress(self.m, self.params)

    def states(self) -> list[FenepState]:
        return [FenepState(float(m), float(t)) for t, m in zip(self.times, self.m)]

    def at(self, t) -> np.ndarray:
        """Linear interpolation of ``M`` at times ``t``."""
        return np.interp(t, self.times, self.m)

    def to_csv(self, path):
        tau = self.stress
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "M", "tau_p"])
            for row in zip(self.times, self.m, tau):
                w.writerow([repr(float(v)) for v in row])


def _check(m, b):
    m = np.asarray(m, dtype=float)
    if np.any(m >= b) or np.any(m < 0) or np.any(np.isnan(m)):
        raise DomainError(f"conformation must lie in [0, b) with b = {b}")
    return m


def fenep_rhs(m, kappa_val: float, params: ModelParams):
    """``dM/dt = 2 kappa M - M / (1 - M/b) / We + 1/We``."""
    m = _check(m, params.b)
    out = 2.0 * kappa_val * m - m / (1.0 - m / params.b) / params.we + 1.0 / params.we
    return float(out) if out.ndim == 0 else out


def fenep_stress(m, params: ModelParams):
    """``tau_p = (eps/We) (M / (1 - M/b) - 1)``."""
    m = _check(m, params.b)
    out = params.eps / params.we * (m / (1.0 - m / params.b) - 1.0)
    return float(out) if out.ndim == 0 else out


def integrate(m0: float, schedule, dt: float = DEFAULT_DT, t_end: float = 1.0,
              params: ModelParams | None = None, t0: float = 0.0) -> FenepTrajectory:
    """Classical fourth-order Runge-Kutta from ``t0`` to ``t_end``.

    The last step is shortened to land exactly on ``t_end``. Raises
    :class:`DomainError` if the solution leaves ``(0, b)``.
    """
    params = params or ModelParams(force_model="fenep")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_end < t0:
        raise ValueError("t_end must be >= t0")
    b = params.b
    if not 0.0 < m0 < b:
        raise DomainError(f"m0 = {m0} outside (0, b)")
    n = max(0, math.ceil((t_end - t0) / dt - 1e-9))
    times = np.empty(n + 1)
    ms = np.empty(n + 1)
    times[0], ms[0] = t0, m0
    t, m = t0, float(m0)

    def f(tt, mm):
        if not 0.0 < mm < b:
            raise DomainError(f"trajectory left (0, b) at t = {tt:.6g}; reduce dt")
        return 2.0 * schedule(tt) * mm - mm / (1.0 - mm / b) / params.we + 1.0 / params.we

    for i in range(1, n + 1):
        h = min(dt, t_end - t) if i == n else dt
        k1 = f(t, m)
        k2 = f(t + h / 2, m + h / 2 * k1)
        k3 = f(t + h / 2, m + h / 2 * k2)
        k4 = f(t + h, m + h * k3)
        m = m + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t0 + i * dt if i < n else t_end
        if not 0.0 < m < b:
            raise DomainError(f"trajectory left (0, b) at t = {t:.6g}; reduce dt")
        times[i], ms[i] = t, m
    return FenepTrajectory(times, ms, params)
