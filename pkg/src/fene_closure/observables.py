"""Macroscopic state variables, restriction and stress estimation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from ._kernels import STRATEGY_CASCADE, STRATEGY_EVEN, STRATEGY_EVEN_STRESS
from .errors import DimensionMismatch, DomainError
from .model import ForceModel, ModelParams, force


class Strategy(str, enum.Enum):
    EVEN_MOMENTS = "even"
    EVEN_MOMENTS_PLUS_STRESS = "even+stress"
    STRESS_CASCADE = "cascade"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Observable:
    """A configuration-space function ``m(x) = core(x) - offset`` with derivatives.

    The constant ``offset`` has zero gradient, so it only shifts the target a
    projection aims for; kernels work with ``core``.
    """

    core: Callable
    deriv: Callable
    second_deriv: Callable
    label: str
    offset: float = 0.0
    singular: bool = False  # diverges as |x| -> sqrt(b)

    def eval(self, x):
        return self.core(x) - self.offset


def _even(p: int) -> Observable:
    return Observable(
        core=lambda x: x ** (2 * p),
        deriv=lambda x: 2 * p * x ** (2 * p - 1),
        second_deriv=lambda x: 2 * p * (2 * p - 1) * x ** (2 * p - 2),
        label=f"x^{2 * p}",
    )


def _u(x, b):
    return 1.0 / (1.0 - x * x / b)


def _stress_obs(b: float, offset: float) -> Observable:
    return Observable(
        core=lambda x: x * x * _u(x, b),
        deriv=lambda x: 2 * x * _u(x, b) ** 2,
        second_deriv=lambda x: 2 * _u(x, b) ** 2 + 8 * x * x * _u(x, b) ** 3 / b,
        label="x^2/(1-x^2/b)" + (" - 1" if offset else ""),
        offset=offset,
        singular=True,
    )


def _cascade_obs(b: float) -> list[Observable]:
    u = lambda x: _u(x, b)  # noqa: E731
    m3 = Observable(
        core=lambda x: x * x * u(x) ** 2,
        deriv=lambda x: 2 * x * u(x) ** 2 + 4 * x ** 3 * u(x) ** 3 / b,
        second_deriv=lambda x: (2 * u(x) ** 2 + 20 * x * x * u(x) ** 3 / b
                                + 24 * x ** 4 * u(x) ** 4 / b ** 2),
        label="x^2/(1-x^2/b)^2",
        singular=True,
    )
    m4 = Observable(
        core=lambda x: x ** 4 * u(x) ** 3,
        deriv=lambda x: 4 * x ** 3 * u(x) ** 3 + 6 * x ** 5 * u(x) ** 4 / b,
        second_deriv=lambda x: (12 * x * x * u(x) ** 3 + 54 * x ** 4 * u(x) ** 4 / b
                                + 48 * x ** 6 * u(x) ** 5 / b ** 2),
        label="x^4/(1-x^2/b)^3",
        singular=True,
    )
    return [_even(1), _stress_obs(b, offset=1.0), m3, m4]


@dataclass(frozen=True)
class StrategySpec:
    """An ordered set of observables defining restriction and constraints.

    ``code`` selects the compiled kernel path; ``None`` means the observables
    are evaluated through their Python callables.
    """

    strategy: Strategy
    observables: tuple
    params: ModelParams
    code: int | None = None

    @property
    def L(self) -> int:
        return len(self.observables)

    @property
    def offsets(self) -> np.ndarray:
        return np.array([o.offset for o in self.observables], dtype=float)

    @property
    def singular(self) -> bool:
        return any(o.singular for o in self.observables)

    @property
    def token(self) -> str:
        if self.strategy is Strategy.STRESS_CASCADE:
            return "cascade"
        return f"{self.strategy.value}:{self.L}"

    def in_domain(self, x) -> bool:
        return not self.singular or bool(np.all(np.square(x) / self.params.b < 1.0))

    def evaluate(self, x, order: int = 0) -> np.ndarray:
        """``(L, N)`` array of core values (order 0) or derivatives (1, 2)."""
        x = np.asarray(x, dtype=float)
        if self.code is not None:
            return _kernels.get().obs_eval(x, self.code, self.L, self.params.b, order)
        attr = ("core", "deriv", "second_deriv")[order]
        return np.stack([np.broadcast_to(getattr(o, attr)(x), x.shape) for o in self.observables])

    def core_means(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.code is not None:
            means, ok = _kernels.get().obs_means(x, self.code, self.L, self.params.b)
        else:
            ok = self.in_domain(x)
            means = np.sum(self.evaluate(x), axis=1) / x.size if ok else None
        if not ok:
            raise DomainError(f"observable evaluated at |x| >= sqrt(b) = {self.params.sqrt_b}")
        return means

    def gram_matrix(self) -> np.ndarray:
        """Inner products ``int m_i m_j phi_eq`` by quadrature."""
        from .model import equilibrium_density
        from .quadrature import integrate

        b = self.params.b
        lim = np.sqrt(b) * (1 - 1e-8)

        def f(x):
            v = np.stack([o.eval(x) for o in self.observables])
            return (v[:, None, :] * v[None, :, :]) * equilibrium_density(x, b)

        return integrate(f, -lim, lim, rtol=1e-10)

    def check_independence(self, cond_limit: float = 1e13):
        g = self.gram_matrix()
        d = 1.0 / np.sqrt(np.diag(g))
        cond = np.linalg.cond(g * d[:, None] * d[None, :])
        if not cond < cond_limit:
            raise ValueError(f"observables are not linearly independent (cond {cond:.3g})")
        return self


def even_moments(L: int, params: ModelParams) -> StrategySpec:
    if L < 1:
        raise ValueError("L must be >= 1")
    obs = tuple(_even(p) for p in range(1, L + 1))
    return StrategySpec(Strategy.EVEN_MOMENTS, obs, params, STRATEGY_EVEN)


def even_moments_plus_stress(L: int, params: ModelParams) -> StrategySpec:
    """``L - 1`` even moments followed by ``C = <x F_FENE(x)>``."""
    if L < 2:
        raise ValueError("even+stress needs L >= 2")
    obs = tuple(_even(p) for p in range(1, L)) + (_stress_obs(params.b, 0.0),)
    return StrategySpec(Strategy.EVEN_MOMENTS_PLUS_STRESS, obs, params, STRATEGY_EVEN_STRESS)


def stress_cascade(params: ModelParams) -> StrategySpec:
    return StrategySpec(Strategy.STRESS_CASCADE, tuple(_cascade_obs(params.b)), params,
                        STRATEGY_CASCADE)


def custom_strategy(observables: Sequence[Observable], params: ModelParams) -> StrategySpec:
    return StrategySpec(Strategy.CUSTOM, tuple(observables), params, None)


def parse_strategy(token: str, params: ModelParams) -> StrategySpec:
    """``even:L``, ``even+stress:L`` or ``cascade``."""
    kind, _, arg = token.strip().lower().partition(":")
    if kind == "cascade":
        if arg:
            raise ValueError("cascade fixes L = 4; no L may be given")
        return stress_cascade(params)
    if not arg:
        raise ValueError(f"strategy {token!r} needs an L, e.g. '{kind}:2'")
    L = int(arg)
    if kind == "even":
        return even_moments(L, params)
    if kind == "even+stress":
        return even_moments_plus_stress(L, params)
    raise ValueError(f"unknown strategy {token!r}")


@dataclass
class MacroState:
    values: np.ndarray
    spec: StrategySpec = field(repr=False)
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.spec.L,):
            raise DimensionMismatch(f"expected {self.spec.L} values, got {self.values.shape}")

    @property
    def core_targets(self) -> np.ndarray:
        return self.values + self.spec.offsets


def restrict(ensemble, spec: StrategySpec) -> MacroState:
    """Empirical means of the observables over the ensemble."""
    x = ensemble.configs
    if x.size == 0:
        raise ValueError("cannot restrict an empty ensemble")
    return MacroState(spec.core_means(x) - spec.offsets, spec, ensemble.time)


def stress_from_configs(x, params: ModelParams) -> float:
    x = np.asarray(x, dtype=float)
    mean = _kernels.get().mean
    msq = mean(x * x) if params.force_model is ForceModel.FENEP else None
    return params.eps / params.we * (mean(x * force(x, params, msq)) - 1.0)


def stress(ensemble, params: ModelParams | None = None) -> float:
    """Kramers estimator ``(eps/We) (mean(X F(X)) - 1)``; FENE-P uses the ensemble's own ``<X^2>``."""
    params = params or ensemble.params
    if ensemble.configs.size == 0:
        raise ValueError("cannot estimate stress on an empty ensemble")
    return stress_from_configs(ensemble.configs, params)


def gradient_matrix(ensemble, spec: StrategySpec) -> np.ndarray:
    """``(L, N)`` gradient of the restriction: row l holds ``m_l'(X^n) / N``."""
    x = ensemble.configs
    if not spec.in_domain(x):
        raise DomainError("observable gradient evaluated outside |x| < sqrt(b)")
    return spec.evaluate(x, 1) / x.size


def eos_rhs(M: MacroState, extra, kappa_val: float, params: ModelParams) -> np.ndarray:
    """Time derivative of the even moments given the unclosed connector terms.

    ``dM_l/dt = 2 l kappa M_l - C_l / (2 We) + l (2l - 1) M_{l-1} / We`` with
    ``M_0 = 1``; ``extra`` holds ``C_l = <F(X) m_l'(X)>``.
    """
    vals = M.values
    extra = np.asarray(extra, dtype=float)
    if extra.shape != vals.shape:
        raise DimensionMismatch(f"extra has shape {extra.shape}, expected {vals.shape}")
    lower = np.concatenate([[1.0], vals[:-1]])
    ell = np.arange(1, vals.size + 1)
    return 2 * ell * kappa_val * vals - extra / (2 * params.we) + ell * (2 * ell - 1) * lower / params.we


def eos_terms(ensemble, spec: StrategySpec, params: ModelParams | None = None):
    """Ensemble estimates of the drag, connector and Brownian terms.

    Returns ``(D, C, B)`` with ``D_l = <X m_l'>``, ``C_l = <F m_l'>`` and
    ``B_l = <m_l''>``; then ``dM/dt = kappa D - C/(2 We) + B/(2 We)``.
    """
    params = params or ensemble.params
    x = ensemble.configs
    mean = _kernels.get().mean
    msq = mean(x * x) if params.force_model is ForceModel.FENEP else None
    d1 = spec.evaluate(x, 1)
    d2 = spec.evaluate(x, 2)
    f = force(x, params, msq)
    D = np.array([mean(x * row) for row in d1])
    C = np.array([mean(f * row) for row in d1])
    B = np.array([mean(row) for row in d2])
    return D, C, B


def eos_general_rhs(D, C, B, kappa_val: float, params: ModelParams) -> np.ndarray:
    return kappa_val * np.asarray(D) - (np.asarray(C) - np.asarray(B)) / (2 * params.we)
