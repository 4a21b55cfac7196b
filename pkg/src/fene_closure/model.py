"""Spring laws, equilibrium distribution and model parameters for 1D dumbbells."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import DomainError, MissingMoment


class ForceModel(str, enum.Enum):
    HOOKEAN = "hookean"
    FENE = "fene"
    FENEP = "fenep"

    @property
    def code(self) -> int:
        return _FORCE_CODES[self]


_FORCE_CODES = {ForceModel.HOOKEAN: 0, ForceModel.FENE: 1, ForceModel.FENEP: 2}


@dataclass(frozen=True)
class ModelParams:
    """Nondimensional dumbbell parameters.

    Parameters
    ----------
    b : float
        Maximal extension parameter; FENE configurations satisfy ``|x| < sqrt(b)``.
    we : float
        Weissenberg number.
    eps : float
        Polymer viscosity ratio, ``0 < eps <= 1``.
    force_model : ForceModel
    """

    b: float = 49.0
    we: float = 1.0
    eps: float = 1.0
    force_model: ForceModel = ForceModel.FENE

    def __post_init__(self):
        object.__setattr__(self, "force_model", ForceModel(self.force_model))
        if not (self.b > 0 and math.isfinite(self.b)):
            raise ValueError(f"b must be positive, got {self.b}")
        if not self.we > 0:
            raise ValueError(f"we must be positive, got {self.we}")
        if not 0 < self.eps <= 1:
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")

    @property
    def sqrt_b(self) -> float:
        return math.sqrt(self.b)

    def rejection_bound(self, dt: float) -> float:
        """Squared-length bound ``(1 - sqrt(dt)) b`` used by accept-reject.

        Infinite for models without a per-particle length limit.
        """
        if self.force_model is ForceModel.FENE:
            return (1.0 - math.sqrt(dt)) * self.b
        return math.inf


@dataclass(frozen=True)
class ForceEvaluation:
    value: float
    denominator: float


def evaluate_force(x, params: ModelParams, msq=None) -> ForceEvaluation:
    """Force together with its denominator (1 for Hookean)."""
    model = params.force_model
    if model is ForceModel.HOOKEAN:
        return ForceEvaluation(value=np.asarray(x, dtype=float) * 1.0, denominator=1.0)
    if model is ForceModel.FENEP:
        if msq is None:
            raise MissingMoment("FENE-P force requires the ensemble mean-square length")
        denom = 1.0 - msq / params.b
        if denom <= 0:
            raise DomainError(f"<X^2> = {msq} is not below b = {params.b}")
    else:
        denom = 1.0 - np.square(x) / params.b
        if np.any(denom <= 0):
            raise DomainError(f"FENE force undefined: x^2 >= b = {params.b}")
    return ForceEvaluation(value=x / denom, denominator=denom)


def force(x, params: ModelParams, msq=None):
    """Spring force ``F(x)``; accepts scalars or arrays.

    For FENE-P ``msq`` is the ensemble mean-square length that replaces ``x**2``
    in the denominator.
    """
    return evaluate_force(x, params, msq).value


@lru_cache(maxsize=64)
def _equilibrium_norm(b: float) -> float:
    # Z = sqrt(b) * B(1/2, b/2 + 1); the quadrature check lives in the tests.
    return math.sqrt(b) * math.exp(special.betaln(0.5, b / 2.0 + 1.0))


def equilibrium_log_density(x, b: float):
    """``log phi_eq(x)``; ``-inf`` outside ``|x| < sqrt(b)``."""
    x = np.asarray(x, dtype=float)
    s = 1.0 - x * x / b
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(s > 0, 0.5 * b * np.log(np.where(s > 0, s, 1.0)), -np.inf)
    return out - math.log(_equilibrium_norm(b))


def equilibrium_density(x, b: float):
    """Normalized FENE equilibrium density ``Z^-1 (1 - x^2/b)^(b/2)``."""
    out = np.exp(equilibrium_log_density(x, b))
    return out if np.ndim(out) else float(out)


def equilibrium_second_moment(b: float) -> float:
    """``<X^2>`` at equilibrium, ``b/(b+3)``."""
    return b / (b + 3.0)


def sample_equilibrium(n: int, b: float, rng, params: ModelParams | None = None):
    """Draw ``n`` configurations from the FENE equilibrium distribution.

    Uses ``X = sqrt(b) (2B - 1)`` with ``B ~ Beta(b/2 + 1, b/2 + 1)``, which is
    the exact law of ``phi_eq``. Beta variates come from inverting the
    regularized incomplete beta function at per-index counter-based uniforms,
    so the result does not depend on how the index range is partitioned.
    """
    from .sde import Ensemble

    if n < 1:
        raise ValueError("n must be >= 1")
    u = rng.uniforms(n)
    a = b / 2.0 + 1.0
    beta = special.betaincinv(a, a, u)
    x = math.sqrt(b) * (2.0 * beta - 1.0)
    # guard the closed support against rounding at the extreme tails
    lim = math.sqrt(b) * (1.0 - 1e-15)
    np.clip(x, -lim, lim, out=x)
    if params is None:
        params = ModelParams(b=b)
    return Ensemble(configs=x, time=0.0, params=params)
