"""Euler-Maruyama integration of dumbbell ensembles with FENE accept-reject."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import RejectionOverflow
from .model import ForceModel, ModelParams, force

MAX_RETRIES = 1000


@dataclass(frozen=True)
class Ensemble:
    """``N`` scalar configurations at simulation time ``time``."""

    configs: np.ndarray
    time: float
    params: ModelParams

    def __post_init__(self):
        object.__setattr__(self, "configs", np.ascontiguousarray(self.configs, dtype=float))

    @property
    def n(self) -> int:
        return self.configs.size

    def with_configs(self, configs, time=None) -> "Ensemble":
        return replace(self, configs=configs, time=self.time if time is None else time)

    def mean_square(self) -> float:
        return _kernels.get().mean(self.configs * self.configs)


def em_step(x, kappa_val, dt, xi, params: ModelParams, msq=None):
    """One Euler-Maruyama trial move ``x + (kappa x - F(x)/(2 We)) dt + sqrt(dt/We) xi``."""
    drift = (kappa_val * x - force(x, params, msq) / (2.0 * params.we)) * dt
    return x + drift + math.sqrt(dt / params.we) * xi


def _advance(x, params, kappa_val, dt, rng, bound=None):
    """Kernel call shared by the free and constrained steppers."""
    step = rng.next_step()
    msq = _kernels.get().mean(x * x) if params.force_model is ForceModel.FENEP else 0.0
    if bound is None:
        bound = params.rejection_bound(dt)
    n = x.size
    y, used, n_over = _kernels.get().trial_accept(
        x, np.arange(n, dtype=np.int64), np.zeros(n, np.int64), kappa_val, dt, params.we,
        params.force_model.code, params.b, msq, rng.word(step), rng.sign, bound, MAX_RETRIES)
    if n_over:
        raise RejectionOverflow(
            f"{n_over} particle(s) rejected {MAX_RETRIES} times at dt={dt}; reduce the time step")
    return y, used, step, msq


def ensemble_step(ens: Ensemble, schedule, dt: float, rng, kappa_val: float | None = None) -> Ensemble:
    """Advance every particle by one step.

    FENE trial moves with ``x^2 > (1 - sqrt(dt)) b`` are redrawn from the
    particle's own stream until accepted. FENE-P uses the pre-step ``<X^2>``
    and applies no rejection.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    k = schedule(ens.time) if kappa_val is None else kappa_val
    y, _, _, _ = _advance(ens.configs, ens.params, k, dt, rng)
    return ens.with_configs(y, ens.time + dt)


def simulate(ens: Ensemble, schedule, dt: float, k_steps: int, rng, observer=None) -> Ensemble:
    """``k_steps`` free steps with ``kappa`` taken at each substep's left endpoint.

    ``observer(ensemble, k)`` is called after every step when given.
    """
    if k_steps < 0:
        raise ValueError("k_steps must be >= 0")
    for k in range(k_steps):
        ens = ensemble_step(ens, schedule, dt, rng)
        if observer is not None:
            observer(ens, k + 1)
    return ens
