from __future__ import annotations

import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fene_closure import histio
from fene_closure.constrained import lift
from fene_closure.errors import InfeasibleMoments, SupportViolation
from fene_closure.model import ModelParams, equilibrium_density, sample_equilibrium
from fene_closure.observables import (MacroState, even_moments, even_moments_plus_stress,
                                      stress_cascade)
from fene_closure.qe_oracle import (moment_jacobian, qe_equilibrium, qe_moment, qe_solve, qe_stress,
                                    relative_entropy)
from fene_closure.rng import RngStream

P = ModelParams()


def test_equilibrium_target_gives_zero_multipliers():
    spec = even_moments(1, P)
    d = qe_solve(MacroState([49 / 52], spec))
    assert abs(d.multipliers[0]) < 1e-9
    x = np.linspace(-6.9, 6.9, 11)
    np.testing.assert_allclose(d(x), equilibrium_density(x, 49.0), rtol=1e-8)
    assert relative_entropy(d) < 1e-15


def test_larger_second_moment_tilts_outward():
    d = qe_solve(MacroState([2.0], even_moments(1, P)))
    assert d.multipliers[0] > 0
    assert relative_entropy(d) > 0


@pytest.mark.parametrize("m1", [49.0, 60.0, -1.0, 0.0])
def test_infeasible_second_moment(m1):
    with pytest.raises(InfeasibleMoments):
        qe_solve(MacroState([m1], even_moments(1, P)))


def test_moment_examples():
    spec = even_moments(2, P)
    d = qe_solve(MacroState([1.5, 4.0], spec))
    assert qe_moment(d, lambda x: 1.0) == pytest.approx(1.0, abs=1e-10)
    assert qe_moment(d, lambda x: x * x) == pytest.approx(1.5, rel=1e-9)
    assert qe_moment(d, lambda x: x ** 4) == pytest.approx(4.0, rel=1e-9)
    eq = qe_equilibrium(spec)
    assert qe_moment(eq, lambda x: x * x / (1 - x * x / 49)) == pytest.approx(1.0, rel=1e-9)
    assert qe_stress(eq) == pytest.approx(0.0, abs=1e-9)


@given(st.floats(0.4, 4.0), st.floats(1.3, 2.5))
def test_round_trip_even_moments(m1, ratio):
    # ratio = M2 / M1^2 kept inside the realizable band for b = 49
    spec = even_moments(2, P)
    target = MacroState([m1, ratio * m1 * m1], spec)
    try:
        d = qe_solve(target)
    except InfeasibleMoments:
        return
    np.testing.assert_allclose([qe_moment(d, lambda x: x * x), qe_moment(d, lambda x: x ** 4)],
                               target.values, rtol=1e-8)
    # dual Hessian is the covariance: positive definite along the whole path
    assert all(e > 0 for e in d.min_eigenvalues)
    jac = moment_jacobian(d)
    np.testing.assert_allclose(jac, jac.T)
    assert np.linalg.eigvalsh(jac)[0] > 0


def test_round_trip_from_sample():
    spec = even_moments(3, P)
    e = sample_equilibrium(20_000, 49.0, RngStream(3))
    x = e.configs * 1.2
    target = MacroState([np.mean(x ** 2), np.mean(x ** 4), np.mean(x ** 6)], spec)
    d = qe_solve(target)
    for k, v in zip((2, 4, 6), target.values):
        assert qe_moment(d, lambda y, k=k: y ** k) == pytest.approx(v, rel=1e-8)


def test_cascade_target_round_trip():
    spec = stress_cascade(P)
    lam = np.array([2.587, -6.403, 3.931, -0.031])
    from fene_closure.qe_oracle import _moments

    _, mean, _ = _moments(lam, spec)
    target = MacroState(mean - spec.offsets, spec)
    d = qe_solve(target)
    np.testing.assert_allclose(d.multipliers, lam, rtol=1e-6, atol=1e-8)


def test_positive_stress_multiplier_is_refused():
    """With the stress among the constraints a tilt toward extension is not integrable."""
    spec = even_moments_plus_stress(2, P)
    # moments of exp(a x^2) phi_eq with a > 0 need a positive multiplier on the stress
    eq = qe_solve(MacroState([2.0], even_moments(1, P)))
    m2 = qe_moment(eq, lambda x: x * x)
    c = qe_moment(eq, lambda x: x * x / (1 - x * x / 49))
    with pytest.raises(InfeasibleMoments, match="not integrable"):
        qe_solve(MacroState([m2, c + 0.5], spec))


def test_entropy_minimal_among_densities_with_same_moment():
    """Every two-moment QE density with <x^2> = 2 has more entropy relative to equilibrium."""
    base = relative_entropy(qe_solve(MacroState([2.0], even_moments(1, P))))
    d1 = qe_solve(MacroState([2.0], even_moments(1, P)))
    m4 = qe_moment(d1, lambda x: x ** 4)
    for f in (0.8, 0.9, 1.1, 1.25):
        other = qe_solve(MacroState([2.0, f * m4], even_moments(2, P)))
        assert relative_entropy(other) > base


def test_entropy_minimal_against_lifted_histogram():
    spec = even_moments(1, P)
    target = MacroState([2.0], spec)
    d = qe_solve(target)
    edges = histio.uniform_edges(49.0, 100)
    q = d.bin_masses(edges)
    assert q.sum() == pytest.approx(1.0, abs=1e-9)
    qe_hist = histio.Histogram(edges, q * 1e12, int(1e12))
    rep = lift(target, spec, 2.0, 2e-3, 200, "uniform", RngStream(4), n_particles=20_000)
    h = histio.bin(rep.ensemble, 100)
    assert relative_entropy(h, P) > relative_entropy(qe_hist, P) > 0


def test_histogram_entropy_errors():
    h = histio.bin(np.array([8.0, 0.0]), 10, 49.0)
    with pytest.raises(SupportViolation):
        relative_entropy(h, P)
    with pytest.raises(ValueError):
        relative_entropy(histio.bin(np.zeros(3), 10, 49.0))


def test_density_csv(tmp_path):
    d = qe_solve(MacroState([1.5], even_moments(1, P)))
    d.to_csv(tmp_path / "q.csv", n_points=11)
    rows = list(csv.reader(open(tmp_path / "q.csv")))
    assert rows[0] == ["x", "phi"] and len(rows) == 12
