from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import se_of_mean
from fene_closure.constrained import (constrained_step, initial_projection, lift,
                                      plateau_detected, project, quasi_equilibrium_lift)
from fene_closure.errors import DomainViolation, SingularJacobian
from fene_closure.flow import Constant
from fene_closure.model import ModelParams, sample_equilibrium
from fene_closure.observables import (MacroState, custom_strategy, even_moments, parse_strategy,
                                      restrict, stress_cascade)
from fene_closure.rng import RngStream
from fene_closure.sde import Ensemble, simulate

P = ModelParams()


def ens(xs, params=P):
    return Ensemble(np.asarray(xs, dtype=float), 0.0, params)


@pytest.fixture(scope="module")
def kappa2_reference():
    e = sample_equilibrium(5000, 49.0, RngStream(31), P)
    return simulate(e, Constant(2.0), 2e-4, 2500, RngStream(32))


def test_projection_closed_form(backend):
    spec = even_moments(1, P)
    res = project(ens([1, -1]), ens([1.1, -0.9]), MacroState([1.0], spec), spec)
    lam = (-2 + math.sqrt(3.96)) / 2
    assert res.multipliers[0] == pytest.approx(lam, rel=1e-10)
    np.testing.assert_allclose(res.ensemble.configs, [1.1 + lam, -0.9 - lam], rtol=1e-10)
    assert np.mean(res.ensemble.configs ** 2) == pytest.approx(1.0, abs=1e-12)


def test_projection_of_feasible_trial_is_identity():
    spec = even_moments(2, P)
    e = sample_equilibrium(100, 49.0, RngStream(1))
    res = project(e, e, restrict(e, spec), spec)
    assert res.newton_iters == 0
    np.testing.assert_array_equal(res.multipliers, 0.0)
    np.testing.assert_array_equal(res.ensemble.configs, e.configs)


def test_duplicate_constraints_are_singular():
    spec = custom_strategy(even_moments(1, P).observables * 2, P)
    e = sample_equilibrium(100, 49.0, RngStream(1))
    t = e.with_configs(e.configs * 1.01)
    with pytest.raises(SingularJacobian):
        project(e, t, MacroState([1.2, 1.2], spec), spec)


def test_hookean_zero_noise_drift_preserves_constraint():
    """kappa = 1/(2 We) cancels the Hookean drift; projection has nothing to do."""
    p = ModelParams(force_model="hookean")
    spec = even_moments(1, p)
    e = ens([0.5, -1.0, 2.0], p)
    from fene_closure.sde import em_step

    trial = e.with_configs(em_step(e.configs, 0.5, 1e-2, 0.0, p))
    res = project(e, trial, restrict(e, spec), spec)
    assert res.newton_iters == 0
    np.testing.assert_allclose(res.multipliers, 0.0, atol=1e-15)


def test_constrained_step_hits_target(backend):
    spec = even_moments(1, P)
    target = MacroState([1.5], spec)
    e = initial_projection(sample_equilibrium(20_000, 49.0, RngStream(2)), target, spec, 2e-4)
    rng = RngStream(3)
    for _ in range(5):
        e = constrained_step(e, target, spec, 0.0, 2e-4, rng)
        assert np.mean(e.configs ** 2) == pytest.approx(1.5, abs=1e-10)
        assert np.all(e.configs ** 2 <= P.rejection_bound(2e-4))
    assert e.time == 0.0


@pytest.mark.parametrize("token", ["even:1", "even:3", "even+stress:3", "cascade"])
def test_lift_consistency(token, kappa2_reference):
    spec = parse_strategy(token, P)
    target = restrict(kappa2_reference, spec)
    rep = lift(target, spec, 2.0, 2e-4, 40, "uniform", RngStream(4), n_particles=5000)
    np.testing.assert_allclose(restrict(rep.ensemble, spec).values, target.values,
                               rtol=1e-8, atol=1e-8)
    assert np.all(rep.ensemble.configs ** 2 <= P.rejection_bound(2e-4))
    assert rep.steps_run == 40 and len(rep.monitor_series) == 41


@pytest.mark.parametrize("token", ["even:2", "cascade"])
def test_projection_idempotent(token, kappa2_reference):
    spec = parse_strategy(token, P)
    target = restrict(kappa2_reference, spec)
    rep = lift(target, spec, 2.0, 2e-4, 5, kappa2_reference, RngStream(5))
    e = rep.ensemble
    again = project(e, e, target, spec)
    assert again.newton_iters == 0
    np.testing.assert_array_equal(again.ensemble.configs, e.configs)


@given(st.floats(0.3, 3.0), st.integers(0, 1000))
def test_lift_constraint_preservation_property(m1, seed):
    spec = even_moments(1, P)
    target = MacroState([m1], spec)
    rng = RngStream(seed)
    seen = []
    lift(target, spec, 1.0, 1e-3, 10, "uniform", rng, n_particles=400,
         observer=lambda e, m: seen.append(np.mean(e.configs ** 2)))
    np.testing.assert_allclose(seen, m1, rtol=1e-8)


def test_uniform_init_continuation_to_far_target():
    """A far cascade target from a narrow uniform start needs continuation."""
    spec = stress_cascade(P)
    ref = simulate(sample_equilibrium(3000, 49.0, RngStream(6)), Constant(2.0), 2e-4, 5000,
                   RngStream(7))
    target = restrict(ref, spec)
    rep = lift(target, spec, 2.0, 2e-4, 2, "uniform", RngStream(8), n_particles=3000)
    np.testing.assert_allclose(restrict(rep.ensemble, spec).values, target.values, rtol=1e-8)


def test_qe_lift_same_as_zero_kappa():
    spec = even_moments(2, P)
    target = MacroState([1.5, 5.0], spec)
    a = lift(target, spec, 0.0, 1e-3, 20, "equilibrium", RngStream(9), n_particles=1000)
    b = quasi_equilibrium_lift(target, spec, 1e-3, 20, "equilibrium", RngStream(9), n_particles=1000)
    np.testing.assert_array_equal(a.ensemble.configs, b.ensemble.configs)
    np.testing.assert_array_equal(a.monitor_series, b.monitor_series)


def test_fenep_lift_is_gaussian():
    """Linear force: the quasi-equilibrium law at fixed <X^2> = M is N(0, M)."""
    p = ModelParams(force_model="fenep")
    spec = even_moments(1, p)
    M = 2.0
    rep = lift(MacroState([M], spec), spec, 0.0, 1e-2, 400, "equilibrium", RngStream(10),
               n_particles=50_000)
    x4 = rep.ensemble.configs ** 4
    assert abs(x4.mean() - 3 * M * M) < 3 * se_of_mean(x4)
    assert rep.monitor_label == "x^4"


def test_plateau_detector():
    rng = np.random.default_rng(0)
    flat = 1.0 + 0.01 * rng.normal(size=400)
    ramp = np.linspace(0, 1, 400) + 0.01 * rng.normal(size=400)
    assert plateau_detected(flat, 200)
    assert not plateau_detected(ramp, 200)
    assert not plateau_detected(flat[:50], 200)
    assert not plateau_detected(flat, 4)


def test_lift_stops_at_plateau(kappa2_reference):
    spec = even_moments(2, P)
    target = restrict(kappa2_reference, spec)
    rep = lift(target, spec, 2.0, 2e-4, 3000, kappa2_reference, RngStream(11), plateau_window=200)
    assert rep.plateau_reached and rep.steps_run < 3000
    assert math.isfinite(rep.plateau_value)


def test_unreachable_initial_projection_is_reported(kappa2_reference):
    """Rescaling an equilibrium sample to a large <X^2> pushes its tail past the bound."""
    spec = even_moments(1, P)
    target = restrict(kappa2_reference, spec)
    with pytest.raises(DomainViolation, match="uniform or warm"):
        lift(target, spec, 2.0, 2e-4, 1, "equilibrium", RngStream(4), n_particles=5000)


def test_lift_argument_errors():
    spec = even_moments(1, P)
    t = MacroState([1.0], spec)
    with pytest.raises(ValueError):
        lift(t, spec, 0.0, 1e-3, -1, "equilibrium", RngStream(1), n_particles=10)
    with pytest.raises(ValueError):
        lift(t, spec, 0.0, 1e-3, 5, "equilibrium", RngStream(1))
    with pytest.raises(ValueError):
        lift(t, spec, 0.0, 1e-3, 5, "gaussian", RngStream(1), n_particles=10)
    with pytest.raises(ValueError):
        lift(t, spec, 0.0, 1e-3, 5, "equilibrium", RngStream(1), n_particles=10, monitor=False,
             plateau_window=10)
