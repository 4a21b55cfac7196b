"""Monte Carlo numerical closure for one-dimensional FENE dumbbells."""

from __future__ import annotations

__version__ = "0.1.0"

from .coarse import CoarseConfig, LiftMode, MacroTrajectory, coarse_step, run_coarse, run_micro_reference
from .constrained import constrained_step, lift, project, quasi_equilibrium_lift
from .errors import FeneClosureError
from .flow import Complex, Constant, Tabulated, Zero, parse_flow
from .model import ForceModel, ModelParams, sample_equilibrium
from .observables import (MacroState, Strategy, StrategySpec, custom_strategy, even_moments,
                          even_moments_plus_stress, parse_strategy, restrict, stress,
                          stress_cascade)
from .qe_oracle import QEDensity, qe_moment, qe_solve, relative_entropy
from .rng import RngStream
from .sde import Ensemble, ensemble_step, simulate

__all__ = [
    "CoarseConfig", "Complex", "Constant", "Ensemble", "FeneClosureError", "ForceModel",
    "LiftMode", "MacroState", "MacroTrajectory", "ModelParams", "QEDensity", "RngStream",
    "Strategy", "StrategySpec", "Tabulated", "Zero", "coarse_step", "constrained_step",
    "custom_strategy", "ensemble_step", "even_moments", "even_moments_plus_stress", "lift",
    "parse_flow", "parse_strategy", "project", "qe_moment", "qe_solve",
    "quasi_equilibrium_lift", "relative_entropy", "restrict", "run_coarse",
    "run_micro_reference", "sample_equilibrium", "simulate", "stress", "stress_cascade",
]
