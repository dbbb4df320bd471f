import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from localdyn.errors import EvaluationError, InvalidInputError
from localdyn.quantumflow import ScatteringSystem, htheorem_trace, random_unitary
from localdyn.thermolab import (
    EQUILIBRIUM_NOTE,
    EntropyFunction,
    ThermoSpace,
    arrow_coincidence,
    asymptotic_thermo_check,
    extensivity_check,
    monotonicity_check,
)

value = EntropyFunction(lambda t, s: s, "S")
real = st.floats(-1e3, 1e3, allow_nan=False)


def inverse_square_partial_sums(N):
    return sum(1.0 / k**2 for k in range(1, N + 1))


class TestThermoSpace:
    def test_needs_two_components(self):
        with pytest.raises(InvalidInputError):
            ThermoSpace(["R^3"])

    def test_function_at_size(self):
        space = ThermoSpace(["R^3"] * 5, lambda N: 2.0 * N)
        assert space.N == 5
        assert space.P() == 10.0
        assert asymptotic_thermo_check(space, -1.0, 20).ok is False


class TestAsymptotic:
    def test_summable_increments_pass(self):
        assert asymptotic_thermo_check(inverse_square_partial_sums, -1.0, 200).ok

    def test_linear_growth_fails(self):
        rep = asymptotic_thermo_check(lambda N: float(N), -1.0)
        assert not rep.ok
        np.testing.assert_allclose(rep.r, rep.N)

    @given(st.floats(-5, -0.01), st.floats(-100, 100))
    def test_constant_passes(self, delta, c):
        assert asymptotic_thermo_check(lambda N: c, delta, 50).ok

    @given(st.floats(1.2, 3.0))
    def test_power_law_increments(self, s):
        # increments N^-s are o(N^-1) for s > 1
        assert asymptotic_thermo_check(lambda N: -float(N) ** (1 - s), -1.0, 400).ok

    def test_pre_conditions(self):
        with pytest.raises(InvalidInputError):
            asymptotic_thermo_check(lambda N: 0.0, 0.5)
        with pytest.raises(InvalidInputError):
            asymptotic_thermo_check(lambda N: 0.0, -1.0, 9)

    def test_non_finite(self):
        with pytest.raises(EvaluationError):
            asymptotic_thermo_check(lambda N: math.inf if N == 7 else 0.0, -1.0, 20)


L1 = EntropyFunction(lambda t, u: float(np.sum(u**2)), "L1")
L2 = EntropyFunction(lambda t, u: float(np.sum(np.abs(u))), "L2")


def _samples(n=50, seed=0):
    rng = np.random.default_rng(seed)
    return [(float(t), rng.normal(size=3), rng.normal(size=3)) for t in rng.uniform(size=n)]


class TestExtensivity:
    def test_additive(self):
        L = EntropyFunction(lambda t, s: L1(t, s[0]) + L2(t, s[1]))
        assert extensivity_check(L, L1, L2, _samples()).ok

    def test_positive_coupling(self):
        L = EntropyFunction(lambda t, s: L1(t, s[0]) + L2(t, s[1]) + float(s[0] @ s[1]) ** 2)
        assert extensivity_check(L, L1, L2, _samples()).ok

    def test_deficit_fails_everywhere(self):
        L = EntropyFunction(lambda t, s: L1(t, s[0]) + L2(t, s[1]) - 1.0)
        rep = extensivity_check(L, L1, L2, _samples())
        assert [v.index for v in rep.violations] == list(range(50))
        assert all(v.deficit == pytest.approx(1.0) for v in rep.violations)

    def test_non_finite_entropy(self):
        L = EntropyFunction(lambda t, s: float("nan"))
        with pytest.raises(EvaluationError):
            extensivity_check(L, L1, L2, _samples(1))


class TestMonotonicity:
    def _trace(self, seed=1, n=8, steps=200):
        rng = np.random.default_rng(seed)
        P = np.zeros(n)
        P[0] = 1.0
        return htheorem_trace(ScatteringSystem(random_unitary(n, rng), P), steps)

    def test_htheorem_trace(self):
        assert monotonicity_check(value, list(enumerate(self._trace()))).ok

    def test_constant(self):
        assert monotonicity_check(value, [(k, 3.0) for k in range(5)]).ok

    @given(st.integers(1, 199))
    def test_injected_drop_located(self, k):
        trace = self._trace()
        trace[k] = trace[k - 1] - 1e-3
        rep = monotonicity_check(value, list(enumerate(trace)))
        assert rep.indices == [k]

    def test_subsystems_checked(self):
        traj = [(t, np.array([t, 1.0 - 0.1 * t])) for t in range(5)]
        total = EntropyFunction(lambda t, s: float(s.sum()), "total")
        part = EntropyFunction(lambda t, s: float(s[1]), "second")
        rep = monotonicity_check(total, traj, {"second": part})
        assert {v.function for v in rep.violations} == {"second"}
        assert rep.indices == [1, 2, 3, 4]

    def test_unordered(self):
        with pytest.raises(InvalidInputError):
            monotonicity_check(value, [(0.0, 1.0), (2.0, 2.0), (1.0, 3.0)])


class TestArrow:
    def test_aligned_positive(self):
        rep = arrow_coincidence([2.0] * 4, [0.3, 0.2, 0.1, 0.05])
        assert rep.fraction == 1.0
        assert rep.status == ["coincide"] * 4

    def test_turning_point_sides(self):
        xi = [-2.0, -1.0, 0.0, 1.0, 2.0]
        ds = [0.1, 0.1, 0.1, 0.1, 0.1]
        rep = arrow_coincidence(xi, ds)
        assert rep.status == ["oppose", "oppose", "turning", "coincide", "coincide"]
        assert rep.side == [0, 0, 0, 1, 1]
        assert rep.side_fractions == {0: 0.0, 1: 1.0}
        assert rep.n_turning == 1

    def test_equilibrium(self):
        rep = arrow_coincidence([1.0, -1.0, 0.5], [0.0, 0.0, 0.0])
        assert rep.status == ["indeterminate"] * 3
        assert rep.fraction is None
        assert rep.equilibrium and rep.note == EQUILIBRIUM_NOTE

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            arrow_coincidence([1.0, 2.0], [1.0])

    def test_complex_rejected(self):
        with pytest.raises(InvalidInputError):
            arrow_coincidence([1j], [1.0])

    @given(st.lists(st.tuples(real, real), min_size=1, max_size=30))
    def test_joint_sign_flip_symmetry(self, pairs):
        xi, ds = map(np.array, zip(*pairs))
        a, b = arrow_coincidence(xi, ds), arrow_coincidence(-xi, -ds)
        assert a.to_dict() == b.to_dict()
