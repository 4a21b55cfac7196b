"""Lifting by constrained simulation.

Each constrained step takes an unconstrained Euler-Maruyama trial move at a
frozen velocity gradient and projects the ensemble back onto
``{X : R(X) = M}`` along the restriction gradients evaluated at the pre-step
state. The multipliers solve ``R(trial + sum_l lam_l grad R_l) = M`` by damped
Newton iteration started at zero.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (DomainViolation, NewtonDivergence, RejectionOverflow,
                     SingularJacobian)
from .histio import batch_se
from .model import ForceModel, sample_equilibrium
from .observables import (MacroState, Strategy, StrategySpec, gradient_matrix,
                          stress_from_configs)
from .sde import MAX_RETRIES, Ensemble, _advance

logger = logging.getLogger(__name__)

NEWTON_TOL = 1e-11
NEWTON_MAXIT = 50
MAX_HALVINGS = 10
COND_LIMIT = 1e13
MAX_ROUNDS = 100
DEFAULT_M_INF = 50


@dataclass
class ProjectionResult:
    ensemble: Ensemble
    multipliers: np.ndarray
    newton_iters: int
    residual: float


@dataclass
class LiftReport:
    ensemble: Ensemble
    steps_run: int
    monitor_series: np.ndarray
    monitor_label: str
    plateau_reached: bool = False
    retry_rounds: int = 0
    plateau_window: int | None = None
    newton_iters: list = field(default_factory=list, repr=False)

    @property
    def plateau_value(self) -> float:
        """Monitor mean over the trailing half window (last quarter of the series without a window)."""
        s = self.monitor_series
        tail = self.plateau_window // 2 if self.plateau_window else len(s) // 4
        return float(np.mean(s[-max(1, tail):]))


def _evaluate(y, g, lam, spec: StrategySpec):
    if spec.code is not None:
        return _kernels.get().proj_eval(y, g, lam, spec.code, spec.L, spec.params.b)
    xt = y + lam @ g
    if not spec.in_domain(xt):
        return None, None, False
    n = xt.size
    R = np.sum(spec.evaluate(xt, 0), axis=1) / n
    J = spec.evaluate(xt, 1) @ g.T / n
    return R, J, True


def _apply(y, g, lam, spec):
    if spec.code is not None:
        return _kernels.get().apply_multipliers(y, g, lam)
    return y + lam @ g


def _check_conditioning(J):
    if not np.all(np.isfinite(J)):
        raise SingularJacobian("non-finite projection Jacobian")
    rows = np.max(np.abs(J), axis=1)
    if np.any(rows == 0):
        raise SingularJacobian("zero row in projection Jacobian")
    if J.shape == (1, 1):
        return
    Js = J / rows[:, None]
    cols = np.max(np.abs(Js), axis=0)
    if np.any(cols == 0):
        raise SingularJacobian("zero column in projection Jacobian")
    cond = np.linalg.cond(Js / cols[None, :])
    if not cond < COND_LIMIT:
        raise SingularJacobian(f"projection Jacobian condition number {cond:.3g}")


def project_configs(y, g, target_core, spec: StrategySpec, tol=NEWTON_TOL, maxit=NEWTON_MAXIT):
    """Solve for the multipliers; returns ``(x_new, lam, iterations, residual)``.

    The residual is ``max_l |R_l - M_l| / max(1, |M_l|)``.
    """
    target_core = np.asarray(target_core, dtype=float)
    scale = np.maximum(1.0, np.abs(target_core))
    lam = np.zeros(spec.L)
    R, J, ok = _evaluate(y, g, lam, spec)
    if not ok:
        raise DomainViolation("trial ensemble lies outside the observables' domain")
    rn = float(np.max(np.abs(R - target_core) / scale))
    it = 0
    while rn > tol:
        if it >= maxit:
            raise NewtonDivergence(f"projection residual {rn:.3g} after {maxit} iterations")
        _check_conditioning(J)
        delta = np.linalg.solve(J, target_core - R)
        t = 1.0
        any_valid = False
        for _ in range(MAX_HALVINGS + 1):
            lam_t = lam + t * delta
            R_t, J_t, ok = _evaluate(y, g, lam_t, spec)
            if ok:
                any_valid = True
                rn_t = float(np.max(np.abs(R_t - target_core) / scale))
                if rn_t < rn:
                    break
            t *= 0.5
        else:
            if not any_valid:
                raise DomainViolation("every damped Newton step left the observables' domain")
            raise NewtonDivergence(f"damped Newton failed to reduce residual {rn:.3g}")
        lam, R, J, rn = lam_t, R_t, J_t, rn_t
        it += 1
    return _apply(y, g, lam, spec), lam, it, rn


def project(prev: Ensemble, trial: Ensemble, target: MacroState, spec: StrategySpec,
            tol: float = NEWTON_TOL) -> ProjectionResult:
    """Project ``trial`` onto the constraint set along gradients taken at ``prev``."""
    if prev.n != trial.n:
        raise ValueError("prev and trial must have the same size")
    g = gradient_matrix(prev, spec)
    x_new, lam, it, res = project_configs(trial.configs, g, target.core_targets, spec, tol)
    return ProjectionResult(trial.with_configs(x_new), lam, it, res)


def _constrained_step(ens: Ensemble, target_core, spec, kappa_frozen, dt, rng, tol):
    params = ens.params
    x = ens.configs
    bound = params.rejection_bound(dt)
    y, used, step, msq = _advance(x, params, kappa_frozen, dt, rng, bound)
    g = gradient_matrix(ens, spec)
    kern = _kernels.get()
    for rnd in range(MAX_ROUNDS):
        x_new, lam, it, _ = project_configs(y, g, target_core, spec, tol)
        bad = np.flatnonzero(x_new * x_new > bound)
        if bad.size == 0:
            return ens.with_configs(x_new), it, rnd
        # redraw only the offending trial moves, keep the rest, re-project globally
        yb, ub, n_over = kern.trial_accept(
            x[bad], bad.astype(np.int64), used[bad] + 1, kappa_frozen, dt, params.we,
            params.force_model.code, params.b, msq, rng.word(step), rng.sign, bound, MAX_RETRIES)
        if n_over:
            raise RejectionOverflow(f"{n_over} particle(s) exhausted {MAX_RETRIES} redraws")
        y[bad] = yb
        used[bad] = ub
    raise RejectionOverflow(f"projection still unphysical after {MAX_ROUNDS} rounds")


def constrained_step(ens: Ensemble, target: MacroState, spec: StrategySpec, kappa_frozen: float,
                     dt: float, rng, tol: float = NEWTON_TOL) -> Ensemble:
    """One trial move at frozen ``kappa`` followed by projection onto ``target``.

    Physical time is not advanced.
    """
    out, _, _ = _constrained_step(ens, target.core_targets, spec, kappa_frozen, dt, rng, tol)
    return out


def default_monitor(spec: StrategySpec):
    """``(label, fn)``: stress when it is not fixed by the constraints, else the next even moment."""
    params = spec.params
    if spec.strategy in (Strategy.EVEN_MOMENTS, Strategy.CUSTOM) and \
            params.force_model is ForceModel.FENE:
        return "tau_p", lambda x: stress_from_configs(x, params)
    if spec.strategy is Strategy.EVEN_MOMENTS:
        p = spec.L + 1
    elif spec.strategy is Strategy.EVEN_MOMENTS_PLUS_STRESS:
        p = spec.L
    else:
        p = 2
    kern = _kernels.get()

    def even_moment(x):
        # plain even-moment kernel; avoids the slow generic power
        return float(kern.obs_means(x, _kernels.STRATEGY_EVEN, p, params.b)[0][p - 1])

    return f"x^{2 * p}", even_moment


def plateau_detected(series, window: int, n_batches: int = 5) -> bool:
    """True when the two halves of the trailing window agree within one standard error."""
    if window < 2 * n_batches or len(series) < window:
        return False
    w = np.asarray(series[-window:], dtype=float)
    h1, h2 = w[: window // 2], w[window // 2:]
    se = math.hypot(batch_se(h1, n_batches), batch_se(h2, n_batches))
    return abs(h2.mean() - h1.mean()) < se


def _initial_ensemble(init, target: MacroState, spec, n_particles, rng) -> Ensemble:
    params = spec.params
    if isinstance(init, Ensemble):
        return init
    if n_particles is None:
        raise ValueError("n_particles is required when init is not an ensemble")
    if init == "equilibrium":
        return sample_equilibrium(n_particles, params.b, rng, params)
    if init == "uniform":
        half = math.sqrt(3.0 * max(target.values[0], 1e-12))
        if params.force_model is ForceModel.FENE:
            half = min(half, params.sqrt_b * (1.0 - 1e-6))
        u = rng.uniforms(n_particles)
        return Ensemble(half * (2.0 * u - 1.0), 0.0, params)
    raise ValueError(f"unknown init {init!r}")


def initial_projection(ens: Ensemble, target: MacroState, spec: StrategySpec, dt: float,
                       tol: float = NEWTON_TOL) -> Ensemble:
    """Project an arbitrary ensemble onto ``target``.

    Falls back to continuation along ``R(ens) + s (M - R(ens))`` when a direct
    projection fails.
    """
    bound = ens.params.rejection_bound(dt)
    goal = target.core_targets

    def attempt(cur, core):
        g = gradient_matrix(cur, spec)
        x_new, *_ = project_configs(cur.configs, g, core, spec, tol)
        if np.any(x_new * x_new > bound):
            raise DomainViolation("projected particle beyond the FENE bound")
        return cur.with_configs(x_new)

    try:
        return attempt(ens, goal)
    except (NewtonDivergence, DomainViolation):
        logger.debug("direct initial projection failed; using continuation")
    start = spec.core_means(ens.configs)
    cur, s, ds = ens, 0.0, 0.25
    while s < 1.0:
        s_try = min(1.0, s + ds)
        try:
            cur = attempt(cur, start + s_try * (goal - start))
            s = s_try
            ds = min(2 * ds, 0.5)
        except (NewtonDivergence, DomainViolation) as e:
            ds *= 0.5
            if ds < 1e-4:
                raise DomainViolation(
                    f"initial projection stalled at fraction {s:.3g} of the way to the target "
                    f"({e}); start from a uniform or warm ensemble") from e
    return cur


def lift(target: MacroState, spec: StrategySpec, kappa_frozen: float, dt: float, m_inf: int,
         init="equilibrium", rng=None, *, n_particles: int | None = None,
         plateau_window: int | None = None, monitor=None, observer=None,
         tol: float = NEWTON_TOL) -> LiftReport:
    """Reconstruct an ensemble consistent with ``target``.

    Parameters
    ----------
    init : Ensemble or {"equilibrium", "uniform"}
        Starting ensemble; it is first projected onto the target.
    m_inf : int
        Maximum number of constrained steps.
    plateau_window : int, optional
        Stop early once :func:`plateau_detected` fires on the monitor series.
    monitor : (label, callable) or False, optional
        Observable recorded after every step; see :func:`default_monitor`.
        ``False`` records nothing.
    observer : callable, optional
        ``observer(ensemble, m)`` after the initial projection (``m = 0``) and each step.
    """
    if m_inf < 0:
        raise ValueError("m_inf must be >= 0")
    ens = _initial_ensemble(init, target, spec, n_particles, rng)
    ens = initial_projection(ens, target, spec, dt, tol)
    if monitor is False:
        if plateau_window:
            raise ValueError("plateau detection needs a monitor")
        label, fn = "", None
    else:
        label, fn = monitor or default_monitor(spec)
    series = [] if fn is None else [fn(ens.configs)]
    if observer is not None:
        observer(ens, 0)
    core = target.core_targets
    rounds = 0
    iters = []
    reached = False
    check_every = max(1, (plateau_window or 1) // 20)
    steps = 0
    for m in range(1, m_inf + 1):
        ens, it, rnd = _constrained_step(ens, core, spec, kappa_frozen, dt, rng, tol)
        rounds += rnd
        iters.append(it)
        if fn is not None:
            series.append(fn(ens.configs))
        steps = m
        if observer is not None:
            observer(ens, m)
        if plateau_window and m % check_every == 0 and plateau_detected(series, plateau_window):
            reached = True
            break
    return LiftReport(ens, steps, np.asarray(series), label, reached, rounds, plateau_window, iters)


def quasi_equilibrium_lift(target: MacroState, spec: StrategySpec, dt: float, m_inf: int,
                           init="equilibrium", rng=None, **kwargs) -> LiftReport:
    """:func:`lift` with the velocity gradient set to zero."""
    return lift(target, spec, 0.0, dt, m_inf, init, rng, **kwargs)
