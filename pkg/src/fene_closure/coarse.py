"""Coarse time-stepper: lift, simulate ``K`` microsteps, restrict."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .constrained import DEFAULT_M_INF, lift
from .fenep_ode import fenep_stress
from .histio import batch_se
from .model import ForceModel, sample_equilibrium
from .observables import MacroState, StrategySpec, restrict, stress, stress_from_configs
from .sde import Ensemble, simulate

SE_BATCHES = 20


class LiftMode(str, enum.Enum):
    FROZEN_KAPPA = "frozen"
    QUASI_EQUILIBRIUM = "qe"


@dataclass(frozen=True)
class CoarseConfig:
    """Coarse time-stepper settings.

    Parameters
    ----------
    dt : float
        Microscopic step ``delta t``; the macroscopic step is ``K dt``.
    m_inf : int
        Constrained steps per lift; ``0`` only projects the initial ensemble.
    init : {"warm", "equilibrium", "uniform"}
        Lift start. ``warm`` reuses the previous macro step's final ensemble.
    """

    spec: StrategySpec
    dt: float
    k_steps: int = 1
    m_inf: int = DEFAULT_M_INF
    n_particles: int = 2000
    lift_mode: LiftMode = LiftMode.FROZEN_KAPPA
    seed: int = 0
    init: str = "warm"

    def __post_init__(self):
        object.__setattr__(self, "lift_mode", LiftMode(self.lift_mode))
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.k_steps < 1 or self.n_particles < 1:
            raise ValueError("k_steps and n_particles must be >= 1")
        if self.m_inf < 0:
            raise ValueError("m_inf must be >= 0")
        if self.init not in ("warm", "equilibrium", "uniform"):
            raise ValueError(f"unknown init {self.init!r}")

    @property
    def macro_dt(self) -> float:
        return self.k_steps * self.dt


@dataclass
class MacroTrajectory:
    """Macroscopic states at uniformly spaced output times.

    ``state_se`` and ``stress_se`` hold batch-means standard errors over the
    particle index at each output time.
    """

    times: np.ndarray
    states: list
    stress: np.ndarray
    spec: StrategySpec = field(repr=False)
    stress_model: np.ndarray | None = None
    lift_steps: np.ndarray | None = None
    state_se: np.ndarray | None = None
    stress_se: np.ndarray | None = None

    @property
    def values(self) -> np.ndarray:
        """``(n_times, L)`` array of state values."""
        return np.array([s.values for s in self.states]).reshape(len(self.states), self.spec.L)

    def __len__(self):
        return len(self.states)

    def to_csv(self, path):
        L = self.spec.L
        fenep = self.spec.params.force_model is ForceModel.FENEP
        header = ["t"] + [f"M{l + 1}" for l in range(L)] + ["tau_p"]
        if fenep:
            header.append("tau_p_model")
        header.append("lift_steps_used")
        vals = self.values
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i, t in enumerate(self.times):
                row = [repr(float(t))] + [repr(float(v)) for v in vals[i]] + [repr(float(self.stress[i]))]
                if fenep:
                    row.append(repr(float(self.stress_model[i])))
                row.append(int(self.lift_steps[i]) if self.lift_steps is not None else 0)
                w.writerow(row)


def _standard_errors(ens: Ensemble, spec: StrategySpec):
    """Batch-means SE of each observable mean and of the stress estimate.

    The stress estimator is re-evaluated on each particle batch, which keeps
    the FENE-P dependence on the ensemble ``<X^2>`` in the error estimate.
    """
    x = ens.configs
    n_b = min(SE_BATCHES, x.size)
    if n_b < 2:
        return np.full(spec.L, np.nan), math.nan
    vals = spec.evaluate(x)
    se = np.array([batch_se(row, n_b) for row in vals])
    size = x.size // n_b
    est = [stress_from_configs(x[i * size:(i + 1) * size], ens.params) for i in range(n_b)]
    return se, float(np.std(est, ddof=1) / math.sqrt(n_b))


def _stress_model(state: MacroState):
    p = state.spec.params
    if p.force_model is not ForceModel.FENEP:
        return math.nan
    return fenep_stress(state.values[0], p)


@dataclass
class CoarseStepResult:
    state: MacroState
    tau_p: float
    ensemble: Ensemble
    lift_steps: int


def _coarse_step(M: MacroState, schedule, cfg: CoarseConfig, rng, init) -> CoarseStepResult:
    t_star = M.time
    k_lift = schedule(t_star) if cfg.lift_mode is LiftMode.FROZEN_KAPPA else 0.0
    rep = lift(M, cfg.spec, k_lift, cfg.dt, cfg.m_inf, init, rng, n_particles=cfg.n_particles,
               monitor=False)
    ens = rep.ensemble.with_configs(rep.ensemble.configs, time=t_star)
    ens = simulate(ens, schedule, cfg.dt, cfg.k_steps, rng)
    new = restrict(ens, cfg.spec)
    new.time = t_star + cfg.macro_dt
    return CoarseStepResult(new, stress(ens), ens, rep.steps_run)


def coarse_step(M: MacroState, schedule, cfg: CoarseConfig, rng, init="equilibrium"):
    """Lift ``M`` at its time ``t*``, simulate ``K`` steps, restrict.

    Returns ``(state at t* + K dt, ensemble stress estimate)``.
    """
    res = _coarse_step(M, schedule, cfg, rng, init)
    return res.state, res.tau_p


def run_coarse(M0: MacroState, schedule, cfg: CoarseConfig, t_end: float, rng,
               init=None, observer=None) -> MacroTrajectory:
    """Repeat :func:`coarse_step` from ``M0.time`` until ``t_end``.

    ``init`` seeds the first lift (an ensemble, or ``None`` for an equilibrium
    sample when ``cfg.init`` is ``warm``). ``observer(result, i)`` sees every
    macro step.
    """
    spec = cfg.spec
    t0 = M0.time
    n_macro = int(round((t_end - t0) / cfg.macro_dt))
    if n_macro < 0:
        raise ValueError("t_end precedes the initial state")
    if not math.isclose(t0 + n_macro * cfg.macro_dt, t_end, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(f"t_end - t0 = {t_end - t0} is not a multiple of K dt = {cfg.macro_dt}")
    if init is None:
        init = "equilibrium" if cfg.init == "warm" else cfg.init
    states = [M0]
    taus, models, lifts, ses, s_ses = [], [_stress_model(M0)], [0], [], []
    if isinstance(init, Ensemble):
        se, s_se = _standard_errors(init, spec)
        taus.append(stress(init))
    else:
        se, s_se = np.full(spec.L, np.nan), math.nan
        taus.append(math.nan)
    ses.append(se)
    s_ses.append(s_se)
    M, cur = M0, init
    for i in range(n_macro):
        res = _coarse_step(M, schedule, cfg, rng, cur)
        M = res.state
        M.time = t0 + (i + 1) * cfg.macro_dt
        states.append(M)
        taus.append(res.tau_p)
        models.append(_stress_model(M))
        lifts.append(res.lift_steps)
        se, s_se = _standard_errors(res.ensemble, spec)
        ses.append(se)
        s_ses.append(s_se)
        cur = res.ensemble if cfg.init == "warm" else cfg.init
        if observer is not None:
            observer(res, i + 1)
    times = t0 + cfg.macro_dt * np.arange(n_macro + 1)
    fenep = spec.params.force_model is ForceModel.FENEP
    return MacroTrajectory(times, states, np.asarray(taus), spec,
                           np.asarray(models) if fenep else None, np.asarray(lifts),
                           np.array(ses), np.asarray(s_ses))


def run_micro_reference(init: Ensemble, schedule, dt: float, t_end: float, spec: StrategySpec,
                        rng, output_every: int = 1) -> MacroTrajectory:
    """Plain simulation, restricted every ``output_every`` steps."""
    if output_every < 1:
        raise ValueError("output_every must be >= 1")
    n_steps = int(round((t_end - init.time) / dt))
    if n_steps < 0 or not math.isclose(init.time + n_steps * dt, t_end, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError("t_end - t0 must be a nonnegative multiple of dt")
    if n_steps % output_every:
        raise ValueError("number of steps must be a multiple of output_every")
    fenep = spec.params.force_model is ForceModel.FENEP
    times, states, taus, models, ses, s_ses = [], [], [], [], [], []

    def record(ens):
        M = restrict(ens, spec)
        times.append(ens.time)
        states.append(M)
        taus.append(stress(ens))
        models.append(_stress_model(M))
        se, s_se = _standard_errors(ens, spec)
        ses.append(se)
        s_ses.append(s_se)

    record(init)
    t0 = init.time
    ens = init
    for j in range(n_steps // output_every):
        ens = simulate(ens, schedule, dt, output_every, rng)
        ens = ens.with_configs(ens.configs, time=t0 + (j + 1) * output_every * dt)
        record(ens)
    return MacroTrajectory(np.asarray(times), states, np.asarray(taus), spec,
                           np.asarray(models) if fenep else None,
                           np.zeros(len(times), dtype=int), np.array(ses), np.asarray(s_ses))


def equilibrium_start(cfg: CoarseConfig, rng) -> tuple[MacroState, Ensemble]:
    """Equilibrium ensemble at ``t = 0`` and its restriction."""
    p = cfg.spec.params
    ens = sample_equilibrium(cfg.n_particles, p.b, rng, p)
    return restrict(ens, cfg.spec), ens
