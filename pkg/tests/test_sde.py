from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import se_of_mean
from fene_closure.errors import DomainError, RejectionOverflow
from fene_closure.flow import Complex, Constant, Zero
from fene_closure.model import ModelParams, sample_equilibrium
from fene_closure.rng import RngStream
from fene_closure.sde import Ensemble, _advance, em_step, ensemble_step, simulate


def test_em_step_examples(fene):
    assert em_step(0.0, 0.0, 1e-2, 0.0, fene) == 0.0
    assert em_step(1.0, 2.0, 2e-4, 0.0, fene) == pytest.approx(1.000297917, abs=1e-9)
    hook = ModelParams(force_model="hookean")
    assert em_step(1.0, 0.0, 0.01, 1.0, hook) == pytest.approx(1.095)


def test_bound_after_step(fene, backend):
    e = sample_equilibrium(100_000, 49.0, RngStream(1), fene)
    e = ensemble_step(e, Constant(2.0), 2e-4, RngStream(2))
    assert np.max(e.configs ** 2) <= 48.3070
    assert e.time == 2e-4


@given(st.integers(0, 2**32), st.floats(-5, 0.9), st.sampled_from([1e-3, 1e-2, 4e-2]))
def test_fene_bound_holds_every_step(seed, frac, dt):
    # drift balance x^2 = b (1 - 1/(2 kappa)) must sit inside the bound, i.e. kappa < 1/(2 sqrt(dt))
    k = frac / (2 * math.sqrt(dt))
    p = ModelParams()
    e = sample_equilibrium(500, 49.0, RngStream(seed), p)
    bound = p.rejection_bound(dt)

    def check(ens, _):
        assert np.all(ens.configs ** 2 <= bound)

    simulate(e, Constant(k), dt, 20, RngStream(seed + 1), observer=check)


def test_zero_noise_hookean_contracts():
    p = ModelParams(force_model="hookean")
    x0 = np.linspace(-3, 3, 13)
    x1 = em_step(x0, 0.0, 0.1, 0.0, p)
    x2 = em_step(x1, 0.0, 0.1, 0.0, p)
    assert np.all(np.abs(x1) <= np.abs(x0)) and np.all(np.abs(x2) <= np.abs(x1))
    assert np.all(np.abs(x2[x0 != 0]) < np.abs(x1[x0 != 0]))


def test_simulate_zero_steps_is_identity(fene, rng):
    e = sample_equilibrium(100, 49.0, rng, fene)
    assert simulate(e, Complex(), 1e-2, 0, RngStream(3)) is e
    with pytest.raises(ValueError):
        simulate(e, Complex(), 1e-2, -1, RngStream(3))
    with pytest.raises(ValueError):
        ensemble_step(e, Complex(), 0.0, RngStream(3))


@pytest.mark.parametrize("force_model", ["fene", "fenep", "hookean"])
def test_sign_equivariance(force_model, backend):
    p = ModelParams(force_model=force_model)
    e = sample_equilibrium(3000, 49.0, RngStream(5), p)
    neg = e.with_configs(-e.configs)
    a = simulate(e, Complex(), 1e-2, 40, RngStream(6))
    b = simulate(neg, Complex(), 1e-2, 40, RngStream(6, sign=-1))
    np.testing.assert_array_equal(a.configs, -b.configs)


def test_rerun_is_deterministic(fene):
    e = sample_equilibrium(2000, 49.0, RngStream(5), fene)
    a = simulate(e, Constant(3.0), 1e-2, 30, RngStream(6))
    b = simulate(e, Constant(3.0), 1e-2, 30, RngStream(6))
    np.testing.assert_array_equal(a.configs, b.configs)


def test_rejection_overflow(fene):
    x = np.array([0.1, 0.2])
    with pytest.raises(RejectionOverflow):
        _advance(x, fene, 0.0, 1e-2, RngStream(1), bound=0.0)


def test_overflow_when_drift_balance_exceeds_bound(fene):
    e = sample_equilibrium(500, 49.0, RngStream(0), fene)
    with pytest.raises(RejectionOverflow):
        simulate(e, Constant(5.0), 4e-2, 50, RngStream(1))


def test_fene_rejects_invalid_start(fene):
    e = Ensemble(np.array([7.0]), 0.0, fene)
    with pytest.raises(DomainError):
        from fene_closure.model import force
        force(e.configs, fene)


def test_fenep_drifts_to_fixed_point(fenep):
    e = sample_equilibrium(20_000, 49.0, RngStream(9), fenep)
    m0 = e.mean_square()
    e = simulate(e, Zero(), 1e-2, 800, RngStream(10))
    # Euler-Maruyama fixed point of M -> (1 - a dt)^2 M + dt with a = 1/(2(1 - M/b))
    target = 49 / 50
    assert abs(e.mean_square() - target) < abs(m0 - target)
    assert e.mean_square() == pytest.approx(target, rel=0.02)


def test_fene_stationary_at_equilibrium(fene):
    e = sample_equilibrium(50_000, 49.0, RngStream(12), fene)
    e = simulate(e, Zero(), 2e-3, 500, RngStream(13))
    x2 = e.configs ** 2
    assert abs(x2.mean() - 49 / 52) < 3 * se_of_mean(x2)


def test_hookean_weak_order():
    """Ornstein-Uhlenbeck second moment after T = 1: error halves with dt."""
    p = ModelParams(force_model="hookean")
    exact = 1 - math.exp(-1.0)
    errs, ses = [], []
    for dt in (0.2, 0.1):
        e = Ensemble(np.zeros(400_000), 0.0, p)
        e = simulate(e, Zero(), dt, int(round(1 / dt)), RngStream(21))
        x2 = e.configs ** 2
        errs.append(x2.mean() - exact)
        ses.append(se_of_mean(x2))
    ratio = errs[0] / errs[1]
    se_ratio = ratio * math.hypot(ses[0] / errs[0], ses[1] / errs[1])
    assert abs(ratio - 2) < 3 * se_ratio + 0.15
