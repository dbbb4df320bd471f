import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings, strategies as st

from localdyn.errors import InvalidDistributionError, InvalidInputError, InvalidSystemError
from localdyn.flowcore import check_flow_axioms
from localdyn.quantumflow import (
    AMPLITUDE_SIGN_NOTE,
    QuantumSystem,
    ScatteringSystem,
    entropy_rate,
    htheorem_trace,
    is_irreducible,
    master_step,
    omega_survival,
    propagator,
    quantum_flow,
    quantum_xi,
    random_hermitian,
    random_unitary,
    scattering_entropy,
    transition_matrix,
)

DIAG = np.diag([1.0, -1.0])
UP = np.array([1.0, 0.0])
PLUS = np.array([1.0, 1.0]) / math.sqrt(2)
HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)


def random_system(rng, n):
    psi = rng.normal(size=n) + 1j * rng.normal(size=n)
    return QuantumSystem(random_hermitian(n, rng), psi / np.linalg.norm(psi))


class TestSystem:
    def test_non_hermitian(self):
        with pytest.raises(InvalidSystemError):
            QuantumSystem(np.array([[0, 1], [0, 0]]), UP)

    def test_unnormalised(self):
        with pytest.raises(InvalidSystemError):
            QuantumSystem(DIAG, np.array([1.0, 1.0]))


class TestPropagator:
    def test_identity_at_zero(self):
        npt.assert_allclose(propagator(QuantumSystem(DIAG, UP), 0.0), np.eye(2))

    @given(st.floats(-20, 20))
    def test_diagonal(self, t):
        U = propagator(QuantumSystem(DIAG, UP), t)
        npt.assert_allclose(U, np.diag([np.exp(-1j * t), np.exp(1j * t)]), atol=1e-14)

    def test_group_law(self):
        rng = np.random.default_rng(0)
        q = random_system(rng, 5)
        for t1, t2 in rng.normal(size=(20, 2)):
            dev = np.max(np.abs(propagator(q, t1) @ propagator(q, t2) - propagator(q, t1 + t2)))
            assert dev < 1e-10

    def test_flow_axioms(self):
        rng = np.random.default_rng(1)
        q = random_system(rng, 4)
        samples = [(a, b, q.psi0) for a, b in rng.normal(size=(30, 2))]
        assert check_flow_axioms(quantum_flow(q), samples, tol=1e-10).ok

    def test_non_finite_time(self):
        with pytest.raises(InvalidInputError):
            propagator(QuantumSystem(DIAG, UP), float("nan"))


class TestSurvival:
    def test_at_zero(self):
        q = random_system(np.random.default_rng(2), 3)
        assert omega_survival(q, 0.0) == pytest.approx(1.0)

    @given(st.floats(-10, 10))
    def test_stationary_state(self, t):
        assert omega_survival(QuantumSystem(DIAG, UP), t) == pytest.approx(1.0)

    @given(st.floats(-10, 10))
    def test_two_level_interference(self, t):
        assert omega_survival(QuantumSystem(DIAG, PLUS), t) == pytest.approx(math.cos(t) ** 2, abs=1e-12)


class TestQuantumXi:
    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 8))
    def test_survival_vanishes(self, seed, n):
        q = random_system(np.random.default_rng(seed), n)
        assert abs(quantum_xi(q, "survival").xi_value) <= 1e-12

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 8))
    def test_amplitude_is_minus_2i_energy(self, seed, n):
        q = random_system(np.random.default_rng(seed), n)
        value = quantum_xi(q, "amplitude").xi_value
        assert abs(value - (-2j * q.expectation())) <= 1e-6

    def test_diag_example(self):
        report = quantum_xi(QuantumSystem(DIAG, UP), "amplitude")
        assert abs(report.xi_value) == pytest.approx(2.0, abs=1e-8)
        assert report.xi_value.imag < 0
        assert report.note == AMPLITUDE_SIGN_NOTE
        assert report.arrow_sign is None

    def test_zero_energy_state(self):
        assert abs(quantum_xi(QuantumSystem(DIAG, PLUS), "amplitude").xi_value) <= 1e-8

    def test_invalid_kind(self):
        with pytest.raises(InvalidInputError):
            quantum_xi(QuantumSystem(DIAG, UP), "phase")


class TestScattering:
    def test_entropy_examples(self):
        assert scattering_entropy(ScatteringSystem(np.eye(4), np.full(4, 0.25))) == pytest.approx(math.log(4))
        assert scattering_entropy(ScatteringSystem(np.eye(3), np.array([1.0, 0, 0]))) == 0.0
        s = ScatteringSystem(np.eye(4), np.array([0.5, 0.5, 0, 0]))
        assert scattering_entropy(s) == pytest.approx(math.log(2))

    def test_validation(self):
        with pytest.raises(InvalidDistributionError):
            ScatteringSystem(np.eye(2), np.array([1.2, -0.2]))
        with pytest.raises(InvalidDistributionError):
            ScatteringSystem(np.eye(2), np.array([0.5, 0.5]), c=np.array([1.0, 0.0]))
        with pytest.raises(InvalidSystemError):
            ScatteringSystem(np.ones((2, 2)), np.array([0.5, 0.5]))

    def test_transition_matrix_doubly_stochastic(self):
        T = transition_matrix(random_unitary(6, np.random.default_rng(3)))
        npt.assert_allclose(T.sum(axis=0), 1.0, atol=1e-12)
        npt.assert_allclose(T.sum(axis=1), 1.0, atol=1e-12)

    def test_uniform_fixed_point(self):
        s = ScatteringSystem(random_unitary(5, np.random.default_rng(4)), np.full(5, 0.2))
        npt.assert_allclose(master_step(s).P, 0.2, atol=1e-15)

    def test_hadamard_step(self):
        s = ScatteringSystem(HADAMARD, UP)
        nxt = master_step(s)
        npt.assert_allclose(nxt.P, [0.5, 0.5], atol=1e-15)
        assert abs(scattering_entropy(nxt) - scattering_entropy(s) - math.log(2)) <= 1e-12

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 12))
    def test_entropy_never_decreases(self, seed, n):
        rng = np.random.default_rng(seed)
        s = ScatteringSystem(random_unitary(n, rng), rng.dirichlet(np.ones(n)))
        assert np.diff(htheorem_trace(s, 50)).min() >= -1e-12

    def test_irreducibility(self):
        assert is_irreducible(transition_matrix(HADAMARD))
        assert not is_irreducible(np.eye(3))


class TestEntropyRate:
    def test_uniform(self):
        s = ScatteringSystem(random_unitary(4, np.random.default_rng(5)), np.full(4, 0.25))
        assert entropy_rate(s) == pytest.approx(0.0, abs=1e-14)

    def test_identity_scattering(self):
        assert entropy_rate(ScatteringSystem(np.eye(3), np.array([0.7, 0.2, 0.1]))) == 0.0

    def test_delta_start_is_positive(self):
        s = ScatteringSystem(HADAMARD, UP)
        assert entropy_rate(s) > 0

    def test_matches_small_step(self):
        # A near-identity unitary moves P by O(eps^2); the rate is the
        # first-order entropy change of that step.
        from scipy.linalg import expm

        rng = np.random.default_rng(6)
        P = rng.dirichlet(np.ones(4))
        S = expm(-1j * random_hermitian(4, rng) * 1e-4)
        s = ScatteringSystem(S, P)
        dS = scattering_entropy(master_step(s)) - scattering_entropy(s)
        assert entropy_rate(s) == pytest.approx(dS, rel=1e-3)
        assert dS > 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.floats(-50, 50))
def test_unitarity_preserved(seed, n, t):
    q = random_system(np.random.default_rng(seed), n + 1)
    assert abs(np.linalg.norm(quantum_flow(q)(t, q.psi0)) - 1) <= 1e-12


def test_master_step_conserves_mass_and_entropy():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n = int(rng.integers(2, 9))
        s = ScatteringSystem(random_unitary(n, rng), rng.dirichlet(np.ones(n)))
        nxt = master_step(s)
        assert abs(nxt.P.sum() - 1) <= 1e-14
        assert scattering_entropy(nxt) - scattering_entropy(s) >= -1e-12
