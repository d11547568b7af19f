import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_density, random_hermitian, random_state, random_unitary
from qfp.errors import ValidationError
from qfp.linalg import HermitianOperator
from qfp.quantum import (
    DensityMatrix,
    ProbabilityVector,
    StateAmplitudes,
    StochasticMatrix,
    UnitaryPropagator,
    coherence_terms,
    decompose_probability,
    evolve_amplitudes,
    evolve_density,
    occupation_probabilities,
    propagator,
    transition_matrix,
    transition_rates,
)
from test_linalg import taylor_expm

seeds = st.integers(0, 2**32 - 1)


def brute_force_sigma(u, a):
    n = len(a)
    out = np.zeros(n, complex)
    for k in range(n):
        for l in range(n):
            for m in range(n):
                if l != m:
                    out[k] += u[k, l] * np.conj(u[k, m]) * a[l] * np.conj(a[m])
    return out


def test_identity_propagator_keeps_amplitudes(rng):
    a = StateAmplitudes(random_state(rng, 4))
    out = evolve_amplitudes(UnitaryPropagator(np.eye(4), 1.0), a)
    np.testing.assert_array_equal(out.a, a.a)


def test_flip_propagator():
    u = UnitaryPropagator(-1j * np.array([[0, 1], [1, 0]]), np.pi / 2)
    out = evolve_amplitudes(u, StateAmplitudes([1, 0]))
    np.testing.assert_allclose(out.a, [0, -1j])


def test_dimension_mismatch():
    with pytest.raises(ValidationError):
        evolve_amplitudes(UnitaryPropagator(np.eye(3), 1.0), StateAmplitudes([1, 0]))


def test_unnormalised_amplitudes_rejected():
    with pytest.raises(ValidationError):
        StateAmplitudes([1, 1])


def test_non_unitary_rejected():
    with pytest.raises(ValidationError):
        UnitaryPropagator(2 * np.eye(2), 1.0)


@pytest.mark.parametrize(
    "a, p",
    [
        ([1, 0], [1, 0]),
        ([1 / np.sqrt(2), 1j / np.sqrt(2)], [0.5, 0.5]),
        ([0.6, 0.8j], [0.36, 0.64]),
    ],
)
def test_occupation_probabilities(a, p):
    np.testing.assert_allclose(occupation_probabilities(StateAmplitudes(a)).p, p, atol=1e-15)


def test_probability_vector_clamps_dust():
    p = ProbabilityVector([1.0 + 5e-15, -5e-15])
    assert p.p[1] == 0.0
    with pytest.raises(ValidationError):
        ProbabilityVector([1.1, -0.1])


def test_transition_matrix_identity():
    np.testing.assert_array_equal(transition_matrix(UnitaryPropagator(np.eye(3), 1.0)).t, np.eye(3))


@pytest.mark.parametrize("delta, t", [(1.0, 0.3), (0.7, 2.0), (2.5, 1.1)])
def test_two_level_rabi(delta, t):
    h = np.array([[0, delta], [delta, 0]])
    # closed form checked against the series oracle first
    u_series = taylor_expm(-1j * h * t)
    assert abs(abs(u_series[0, 1]) ** 2 - np.sin(delta * t) ** 2) < 1e-13
    tm = transition_matrix(propagator(h, t))
    assert tm.t[0, 1] == pytest.approx(np.sin(delta * t) ** 2, abs=1e-14)


@given(seed=seeds, dim=st.integers(2, 64))
def test_double_stochasticity(seed, dim):
    rng = np.random.default_rng(seed)
    tm = transition_matrix(UnitaryPropagator(random_unitary(rng, dim), 1.0))
    assert np.abs(tm.t.sum(axis=0) - 1).max() < 1e-10
    assert np.abs(tm.t.sum(axis=1) - 1).max() < 1e-10
    assert tm.t.min() >= 0


def test_stochastic_matrix_rejects_bad_rows():
    with pytest.raises(ValidationError):
        StochasticMatrix([[0.5, 0.5], [0.2, 0.8]], 1.0)


def test_sigma_zero_for_basis_state(rng):
    u = UnitaryPropagator(random_unitary(rng, 5), 1.0)
    sig = coherence_terms(u, StateAmplitudes.basis(5, 2))
    assert np.abs(sig.sigma).max() < 1e-14


def test_sigma_zero_for_identity(rng):
    sig = coherence_terms(UnitaryPropagator(np.eye(4), 1.0), StateAmplitudes(random_state(rng, 4)))
    assert np.abs(sig.sigma).max() < 1e-15


def test_sigma_matches_brute_force(rng):
    u = random_unitary(rng, 4)
    a = random_state(rng, 4)
    oracle = brute_force_sigma(u, a)
    assert np.abs(oracle.imag).max() < 1e-14
    sig = coherence_terms(UnitaryPropagator(u, 1.0), StateAmplitudes(a))
    np.testing.assert_allclose(sig.sigma, oracle.real, atol=1e-13)
    # same thing as P(t) - T P(0)
    p_t = np.abs(u @ a) ** 2
    np.testing.assert_allclose(sig.sigma, p_t - (np.abs(u) ** 2) @ (np.abs(a) ** 2), atol=1e-13)


def test_decompose_identity(rng):
    a = StateAmplitudes(random_state(rng, 3))
    markov, sig = decompose_probability(UnitaryPropagator(np.eye(3), 1.0), a)
    np.testing.assert_allclose(markov, np.abs(a.a) ** 2, atol=1e-15)
    assert np.abs(sig.sigma).max() < 1e-15


def test_decompose_basis_state_is_column(rng):
    u = UnitaryPropagator(random_unitary(rng, 4), 1.0)
    markov, sig = decompose_probability(u, StateAmplitudes.basis(4, 1))
    np.testing.assert_allclose(markov, np.abs(u.u[:, 1]) ** 2, atol=1e-15)
    assert np.abs(sig.sigma).max() < 1e-14


@given(seed=seeds, dim=st.integers(2, 16))
def test_exact_decomposition(seed, dim):
    rng = np.random.default_rng(seed)
    u = UnitaryPropagator(random_unitary(rng, dim), 0.5)
    a0 = StateAmplitudes(random_state(rng, dim))
    markov, sig = decompose_probability(u, a0)
    exact = occupation_probabilities(evolve_amplitudes(u, a0)).p
    assert np.abs(markov + sig.sigma - exact).max() < 1e-12
    assert abs(sig.sigma.sum()) < 1e-10


def test_transition_rates_identity():
    w = transition_rates(StochasticMatrix(np.eye(3), 0.4))
    np.testing.assert_array_equal(w.w, np.zeros((3, 3)))


def test_transition_rates_arithmetic():
    w = transition_rates(StochasticMatrix([[0.9, 0.1], [0.1, 0.9]], 0.1))
    np.testing.assert_allclose(w.w, [[-1, 1], [1, -1]], atol=1e-14)
    assert w.dt == 0.1


def test_transition_rates_need_positive_dt():
    with pytest.raises(ValidationError):
        transition_rates(StochasticMatrix(np.eye(2), 0.0))


@given(seed=seeds, dim=st.integers(2, 32), dt=st.floats(1e-3, 5))
def test_rate_columns_sum_to_zero(seed, dim, dt):
    rng = np.random.default_rng(seed)
    w = transition_rates(transition_matrix(UnitaryPropagator(random_unitary(rng, dim), dt)))
    assert np.abs(w.w.sum(axis=0)).max() * dt < 1e-10


def test_density_identity_and_pure(rng):
    a = random_state(rng, 3)
    rho = DensityMatrix.pure(a)
    np.testing.assert_allclose(evolve_density(UnitaryPropagator(np.eye(3), 1.0), rho).rho, rho.rho, atol=1e-15)
    u = random_unitary(rng, 3)
    ua = u @ a
    np.testing.assert_allclose(evolve_density(UnitaryPropagator(u, 1.0), rho).rho, np.outer(ua, ua.conj()), atol=1e-14)


@given(seed=seeds, dim=st.integers(2, 16))
def test_density_spectrum_invariant(seed, dim):
    rng = np.random.default_rng(seed)
    rho = DensityMatrix(random_density(rng, dim))
    h = HermitianOperator(random_hermitian(rng, dim))
    out = evolve_density(propagator(h, 1.3), rho)
    np.testing.assert_allclose(np.linalg.eigvalsh(out.rho), np.linalg.eigvalsh(rho.rho), atol=1e-10)
    assert abs(np.trace(out.rho) - 1) < 1e-12


def test_density_matrix_validation():
    with pytest.raises(ValidationError):
        DensityMatrix(np.diag([0.5, 0.6]))
    with pytest.raises(ValidationError):
        DensityMatrix(np.diag([1.5, -0.5]))
