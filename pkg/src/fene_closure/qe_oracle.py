"""Quasi-equilibrium densities: entropy minimization under moment constraints.

The minimizer of ``int phi log(phi / phi_eq)`` subject to ``int m_l phi = M_l``
is the exponential tilt ``phi_eq exp(sum_l lam_l m_l) / W``. The multipliers
minimize the convex dual ``log W(lam) - lam . M`` whose gradient is
``E_lam[m] - M`` and whose Hessian is the covariance of ``m`` under the tilt.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleMoments, QuadratureFailure, SupportViolation
from .model import ModelParams, equilibrium_log_density
from .observables import MacroState, StrategySpec
from .quadrature import integrate

logger = logging.getLogger(__name__)

ETA = 1e-8  # truncation |x| <= sqrt(b) (1 - ETA) for divergent observables
TAIL_LOG_GAP = 36.0  # edge integrand must sit this far (in log) below the peak
QUAD_RTOL = 1e-12
NEWTON_TOL = 1e-10
NEWTON_MAXIT = 100


def _limit(spec: StrategySpec) -> float:
    sb = math.sqrt(spec.params.b)
    return sb * (1.0 - ETA) if spec.singular else sb


def _log_tilt(x, lam, spec: StrategySpec):
    """``log phi_eq(x) + lam . core(x)`` (unnormalized log-density)."""
    m = spec.evaluate(x)
    return equilibrium_log_density(x, spec.params.b) + lam @ m, m


def _shift(lam, spec: StrategySpec, lim: float):
    grid = np.linspace(0.0, lim, 4001)
    lg, _ = _log_tilt(grid, lam, spec)
    peak = float(np.max(lg))
    return peak, float(lg[-1])


def _moments(lam, spec: StrategySpec, rtol: float = QUAD_RTOL):
    """``(log W, E[m], Cov[m])`` under the tilt with multipliers ``lam``.

    ``log W`` is ``+inf`` when the tilt does not decay at the support edge,
    i.e. a divergent observable carries a positive net weight.
    """
    lim = _limit(spec)
    peak, edge = _shift(lam, spec, lim)
    if not math.isfinite(peak):
        return math.inf, None, None
    if spec.singular and edge > peak - TAIL_LOG_GAP:
        return math.inf, None, None
    L = spec.L

    def f(x):
        lg, m = _log_tilt(x, lam, spec)
        w = np.exp(lg - peak)
        rows = [w[None, :], m * w]
        rows.append((m[:, None, :] * m[None, :, :]).reshape(L * L, -1) * w)
        return np.concatenate(rows, axis=0)

    vals = 2.0 * integrate(f, 0.0, lim, rtol=rtol)
    w0 = vals[0]
    if not (w0 > 0 and math.isfinite(w0)):
        raise QuadratureFailure("tilted density has zero or non-finite mass")
    mean = vals[1:1 + L] / w0
    second = vals[1 + L:].reshape(L, L) / w0
    cov = second - np.outer(mean, mean)
    return peak + math.log(w0), mean, 0.5 * (cov + cov.T)


@dataclass
class QEDensity:
    """``phi(x) = phi_eq(x) exp(lam . core(x) - log_norm)`` on ``|x| <= limit``.

    ``log_norm`` is the log of the normalizing integral of the tilt, so the
    density integrates to one.
    """

    multipliers: np.ndarray
    log_norm: float
    spec: StrategySpec = field(repr=False)
    params: ModelParams = field(repr=False)
    iterations: int = 0
    min_eigenvalues: list = field(default_factory=list, repr=False)

    @property
    def limit(self) -> float:
        return _limit(self.spec)

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.abs(x) <= self.limit
        xs = np.where(inside, x, 0.0)
        lg, _ = _log_tilt(xs, self.multipliers, self.spec)
        return np.where(inside, lg - self.log_norm, -np.inf)

    def __call__(self, x):
        out = np.exp(self.log_density(x))
        return out if np.ndim(out) else float(out)

    def bin_masses(self, edges) -> np.ndarray:
        """Probability of each bin ``[edges[i], edges[i+1])``."""
        edges = np.asarray(edges, dtype=float)
        lim = self.limit
        out = np.zeros(edges.size - 1)
        for i, (a, c) in enumerate(zip(edges[:-1], edges[1:])):
            lo, hi = max(a, -lim), min(c, lim)
            if hi > lo:
                out[i] = integrate(lambda x: self(x)[None, :], lo, hi, rtol=1e-10)[0]
        return out

    def to_csv(self, path, n_points: int = 401):
        grid = np.linspace(-self.limit, self.limit, n_points)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "phi"])
            for a, v in zip(grid, self(grid)):
                w.writerow([repr(float(a)), repr(float(v))])


def _feasibility_screen(core, spec: StrategySpec):
    b = spec.params.b
    for o, v in zip(spec.observables, core):
        if o.label == "x^2" and not 0.0 < v < b:
            raise InfeasibleMoments(f"<x^2> = {v} is not in (0, b = {b})")
        if o.label.startswith("x^") and "/" not in o.label and not v > 0:
            raise InfeasibleMoments(f"<{o.label}> = {v} must be positive")


def moment_jacobian(density: QEDensity) -> np.ndarray:
    """Covariance of the core observables under ``density``."""
    _, _, cov = _moments(density.multipliers, density.spec)
    return cov


def qe_equilibrium(spec: StrategySpec) -> QEDensity:
    """The ``lam = 0`` member, i.e. ``phi_eq`` itself."""
    lam = np.zeros(spec.L)
    log_w, _, _ = _moments(lam, spec)
    return QEDensity(lam, log_w, spec, spec.params)


def qe_solve(target: MacroState, spec: StrategySpec | None = None,
             params: ModelParams | None = None, tol: float = NEWTON_TOL,
             maxit: int = NEWTON_MAXIT, lam0=None) -> QEDensity:
    """Multipliers reproducing ``target`` by damped Newton on the dual.

    Raises
    ------
    InfeasibleMoments
        If the covariance degenerates, the line search stalls, or the iteration
        does not converge; this is how targets outside the realizable set show up.
    """
    spec = spec or target.spec
    params = params or spec.params
    core = np.asarray(target.core_targets, dtype=float)
    if not np.all(np.isfinite(core)):
        raise InfeasibleMoments("target has non-finite entries")
    _feasibility_screen(core, spec)
    scale = np.maximum(1.0, np.abs(core))
    lam = np.zeros(spec.L) if lam0 is None else np.array(lam0, dtype=float)
    log_w, mean, cov = _moments(lam, spec)
    if not math.isfinite(log_w):
        raise InfeasibleMoments("initial multipliers give a non-integrable tilt")
    eigs = []
    for it in range(maxit + 1):
        grad = mean - core
        if np.max(np.abs(grad) / scale) < tol:
            return QEDensity(lam, log_w, spec, params, it, eigs)
        if it == maxit:
            break
        d = np.sqrt(np.diag(cov))
        if not np.all(d > 0):
            raise InfeasibleMoments("moment covariance is singular")
        corr = cov / np.outer(d, d)
        w_min = float(np.linalg.eigvalsh(corr)[0])
        eigs.append(w_min)
        if not w_min > 1e-14:
            raise InfeasibleMoments(f"moment covariance not positive definite (min eig {w_min:.3g})")
        step = -np.linalg.solve(corr, grad / d) / d
        phi0 = log_w - lam @ core
        slope = grad @ step
        t = 1.0
        hit_edge = False
        for _ in range(60):
            cand = lam + t * step
            try:
                lw, mn, cv = _moments(cand, spec)
            except QuadratureFailure:
                t *= 0.5
                continue
            hit_edge = hit_edge or not math.isfinite(lw)
            if math.isfinite(lw) and lw - cand @ core <= phi0 + 1e-4 * t * slope + 1e-15 * abs(phi0):
                break
            t *= 0.5
        else:
            if hit_edge:
                raise InfeasibleMoments("target needs a positive multiplier on a divergent "
                                        "observable; the tilt is not integrable")
            raise InfeasibleMoments("dual line search stalled; target likely not realizable")
        lam, log_w, mean, cov = cand, lw, mn, cv
    raise InfeasibleMoments(f"Newton did not converge in {maxit} iterations "
                            f"(residual {np.max(np.abs(mean - core) / scale):.3g})")


def qe_moment(density: QEDensity, g, rtol: float = 1e-10) -> float:
    """``int g phi`` for a scalar function ``g``."""
    lim = density.limit

    def f(x):
        return (np.broadcast_to(np.asarray(g(x), dtype=float), x.shape) * density(x))[None, :]

    return float(integrate(f, -lim, lim, rtol=rtol)[0])


def qe_stress(density: QEDensity) -> float:
    """Kramers stress ``(eps/We)(<x F_FENE(x)> - 1)`` under the density."""
    p = density.params
    return p.eps / p.we * (qe_moment(density, lambda x: x * x / (1.0 - x * x / p.b)) - 1.0)


def relative_entropy(density, params: ModelParams | None = None) -> float:
    """``H(phi | phi_eq)``.

    Accepts a :class:`QEDensity` (exact integral) or a histogram, for which the
    discrete divergence of bin masses against equilibrium bin masses is returned.
    """
    if isinstance(density, QEDensity):
        _, mean, _ = _moments(density.multipliers, density.spec)
        return max(0.0, float(density.multipliers @ mean - density.log_norm))
    if params is None:
        raise ValueError("params are required for a histogram")
    h = density
    if h.underflow or h.overflow:
        raise SupportViolation("histogram has mass outside [-sqrt(b), sqrt(b)]")
    q = equilibrium_bin_masses(h.edges, params.b)
    p = h.masses
    nz = p > 0
    if np.any(q[nz] <= 0):
        raise SupportViolation("histogram has mass where the equilibrium density vanishes")
    return float(np.sum(p[nz] * np.log(p[nz] / q[nz])))


def equilibrium_bin_masses(edges, b: float) -> np.ndarray:
    from .model import equilibrium_density

    sb = math.sqrt(b)
    edges = np.asarray(edges, dtype=float)
    out = np.zeros(edges.size - 1)
    for i, (a, c) in enumerate(zip(edges[:-1], edges[1:])):
        lo, hi = max(a, -sb), min(c, sb)
        if hi > lo:
            out[i] = integrate(lambda x: equilibrium_density(x, b)[None, :], lo, hi, rtol=1e-11)[0]
    return out
