from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import se_of_mean
from fene_closure.errors import DimensionMismatch, DomainError
from fene_closure.model import ModelParams, sample_equilibrium
from fene_closure.observables import (MacroState, custom_strategy, eos_general_rhs, eos_rhs,
                                      eos_terms, even_moments, even_moments_plus_stress,
                                      gradient_matrix, parse_strategy, restrict, stress,
                                      stress_cascade)
from fene_closure.rng import RngStream
from fene_closure.sde import Ensemble

P = ModelParams()
configs = st.lists(st.floats(-6.9, 6.9), min_size=1, max_size=40)


def ens(xs, params=P):
    return Ensemble(np.asarray(xs, dtype=float), 0.0, params)


def test_restrict_examples(backend):
    M = restrict(ens([1, -1, 2, -2]), even_moments(2, P))
    np.testing.assert_allclose(M.values, [2.5, 8.5], rtol=1e-15)
    M = restrict(ens([1, -1]), even_moments_plus_stress(2, P))
    np.testing.assert_allclose(M.values, [1.0, 49 / 48], rtol=1e-15)


@given(st.floats(-6.9, 6.9), st.integers(1, 20))
def test_constant_ensemble_restricts_to_observable(c, n):
    spec = stress_cascade(P)
    M = restrict(ens([c] * n), spec)
    expected = [o.eval(c) for o in spec.observables]
    np.testing.assert_allclose(M.values, expected, rtol=1e-12, atol=1e-12)


@given(configs, configs)
def test_restrict_affine_under_concatenation(a, b):
    spec = even_moments(3, P)
    ma, mb = restrict(ens(a), spec).values, restrict(ens(b), spec).values
    mab = restrict(ens(a + b), spec).values
    np.testing.assert_allclose(mab, (len(a) * ma + len(b) * mb) / (len(a) + len(b)),
                               rtol=1e-12, atol=1e-9)


@given(configs, st.randoms())
def test_restrict_permutation_invariant(a, r):
    spec = stress_cascade(P)
    b = list(a)
    r.shuffle(b)
    np.testing.assert_allclose(restrict(ens(a), spec).values, restrict(ens(b), spec).values,
                               rtol=1e-12)


def test_stress_examples(fene):
    assert stress(ens(np.zeros(5))) == -1.0
    assert stress(ens([1, -1])) == pytest.approx(49 / 48 - 1)
    e = sample_equilibrium(100_000, 49.0, RngStream(17))
    x = e.configs
    xf = x * x / (1 - x * x / 49)
    assert abs(stress(e)) < 3 * se_of_mean(xf)


def test_stress_fenep_uses_ensemble_mean_square(fenep):
    e = ens([1.0, -3.0], fenep)
    msq = 5.0
    assert stress(e) == pytest.approx(msq / (1 - msq / 49) - 1)


def test_gradient_matrix_examples(backend):
    np.testing.assert_allclose(gradient_matrix(ens([1, -1]), even_moments(1, P)), [[1.0, -1.0]])
    g = gradient_matrix(ens([0.0]), stress_cascade(P))
    assert g[1, 0] == 0.0


def test_m4_derivative_value(backend):
    """Derivative of x^4/(1-x^2/b)^3 at 3.5 for b = 49.

    4 x^3 u^3 + 6 x^5 u^4 / b = 406.5185 + 203.2593 = 609.7778. The central
    difference below is the oracle.
    """
    spec = stress_cascade(P)
    x, h = 3.5, 1e-5
    m4 = spec.observables[3]
    fd = (m4.core(x + h) - m4.core(x - h)) / (2 * h)
    d = spec.evaluate(np.array([x]), 1)[3, 0]
    assert d == pytest.approx(fd, rel=1e-8)
    assert d == pytest.approx(609.7778, abs=1e-3)
    assert gradient_matrix(ens([x, 0.0]), spec)[3, 0] == pytest.approx(d / 2)


@pytest.mark.parametrize("token", ["even:4", "even+stress:3", "cascade"])
def test_derivatives_match_finite_differences(token, backend):
    spec = parse_strategy(token, P)
    x = np.linspace(-6.5, 6.5, 41)
    h = 1e-5
    for order in (1, 2):
        lo = spec.evaluate(x - h, order - 1)
        hi = spec.evaluate(x + h, order - 1)
        fd = (hi - lo) / (2 * h)
        np.testing.assert_allclose(spec.evaluate(x, order), fd, rtol=1e-6, atol=1e-6)


@pytest.mark.parametrize("token", ["even:3", "even+stress:3", "cascade"])
def test_kernel_path_matches_python_callables(token, backend):
    spec = parse_strategy(token, P)
    plain = custom_strategy(spec.observables, P)
    x = sample_equilibrium(500, 49.0, RngStream(3)).configs
    for order in (0, 1, 2):
        np.testing.assert_allclose(spec.evaluate(x, order), plain.evaluate(x, order), rtol=1e-12)


def test_domain_errors():
    spec = stress_cascade(P)
    with pytest.raises(DomainError):
        restrict(ens([7.0]), spec)
    with pytest.raises(DomainError):
        gradient_matrix(ens([-7.5]), spec)
    with pytest.raises(ValueError):
        restrict(ens([]), spec)


def test_strategy_parsing():
    assert parse_strategy("even:2", P).L == 2
    assert parse_strategy("cascade", P).L == 4
    assert parse_strategy("even+stress:3", P).token == "even+stress:3"
    for bad in ["even", "cascade:4", "even+stress:1", "odd:2", "even:0"]:
        with pytest.raises(ValueError):
            parse_strategy(bad, P)


def test_strategies_independent():
    for token in ["even:4", "even+stress:4", "cascade"]:
        parse_strategy(token, P).check_independence()
    dup = custom_strategy(even_moments(1, P).observables * 2, P)
    with pytest.raises(ValueError):
        dup.check_independence()


def test_macrostate_dimension():
    with pytest.raises(DimensionMismatch):
        MacroState([1.0, 2.0], even_moments(1, P))


def test_eos_examples():
    spec = even_moments(1, P)
    M = MacroState([49 / 52], spec)
    assert eos_rhs(M, [2.0], 0.0, P)[0] == pytest.approx(0.0)
    assert eos_rhs(MacroState([1.0], spec), [2.0], 2.0, P)[0] == pytest.approx(4.0)
    # Hookean closure C = 2 M gives the Oldroyd-B right-hand side
    for m, k, we in [(0.5, 1.0, 1.0), (2.0, -0.3, 0.5)]:
        p = ModelParams(we=we)
        assert eos_rhs(MacroState([m], spec), [2 * m], k, p)[0] == pytest.approx(
            2 * k * m - m / we + 1 / we)
    with pytest.raises(DimensionMismatch):
        eos_rhs(M, [1.0, 2.0], 0.0, P)


def test_eos_terms_agree_with_even_moment_form():
    e = sample_equilibrium(5000, 49.0, RngStream(8))
    spec = even_moments(3, P)
    D, C, B = eos_terms(e, spec)
    M = restrict(e, spec)
    np.testing.assert_allclose(eos_general_rhs(D, C, B, 1.3, P), eos_rhs(M, C, 1.3, P), rtol=1e-10)
