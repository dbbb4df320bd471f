import json
from fractions import Fraction

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings, strategies as st

from localdyn.errors import EvaluationError, NotConjugableError, UnsupportedStateSpace
from localdyn.flowcore import (
    Flow,
    Observable,
    StateSpace,
    check_conjugacy,
    check_flow_axioms,
    check_flow_axioms_batch,
    conjugate,
    detect_turning_points,
    linear_flow,
    permutation_flow,
    reversibility_residual,
    shift_flow,
    symmetrize,
    translation_flow,
    xi,
    xi_support_fraction,
    xi_value,
)
from localdyn.timefield import RATIONALS, TimeField

finite = st.floats(-10, 10, allow_nan=False)
square = Observable("x^2", lambda x: float(np.sum(np.asarray(x) ** 2)))
CYCLE7 = [1, 2, 3, 4, 5, 6, 0]


class TestFlowAxioms:
    def test_translation_clean(self):
        phi = translation_flow([1.0, -2.0])
        rng = np.random.default_rng(0)
        samples = [(a, b, rng.normal(size=2)) for a, b in rng.normal(size=(200, 2))]
        assert check_flow_axioms(phi, samples).ok

    def test_z7_cycle_exhaustive(self):
        phi = permutation_flow(CYCLE7)
        report = check_flow_axioms(phi, [(a, b, u) for a in range(7) for b in range(7) for u in range(7)])
        assert report.ok
        assert report.max_deviation == 0

    def test_broken_map_flagged(self):
        broken = Flow(lambda t, x: x + t * t, name="broken")
        report = check_flow_axioms(broken, [(0.5, 0.7, 1.0)])
        assert [v.check for v in report.violations] == ["composition", "inverse"]

    def test_domain_violations_reported(self):
        from localdyn.timefield import REALS, TimeParameter

        phi = Flow(lambda t, x: x + t, time_param=TimeParameter.between(REALS, -1.0, 1.0))
        report = check_flow_axioms(phi, [(0.8, 0.8, 0.0)])
        assert report.violations[0].check == "domain"
        assert report.n_checked == 0

    @settings(max_examples=40)
    @given(finite, finite, st.lists(finite, min_size=3, max_size=3))
    def test_linear_group_law_property(self, t1, t2, x):
        A = np.array([[0.0, 1.0, 0.2], [-1.0, 0.1, 0.0], [0.3, 0.0, -0.2]]) * 0.1
        phi = linear_flow(A)
        report = check_flow_axioms(phi, [(t1, t2, np.array(x))], tol=1e-9, relative=True)
        assert report.max_deviation <= 1e-9

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(1)
        phi = translation_flow([0.5, 2.0])
        t1, t2, X = rng.normal(size=50), rng.normal(size=50), rng.normal(size=(50, 2))
        assert check_flow_axioms_batch(phi, t1, t2, X, 1e-12).ok


class TestConjugate:
    def test_translation_conjugate(self):
        phic = conjugate(translation_flow([2.0]))
        npt.assert_allclose(phic(0.5, np.array([1.0])), [0.0])

    def test_double_conjugate_is_identity(self):
        rng = np.random.default_rng(2)
        phi = linear_flow(rng.normal(size=(3, 3)))
        cc = conjugate(conjugate(phi))
        for t, x in zip(rng.normal(size=100), rng.normal(size=(100, 3))):
            npt.assert_array_equal(cc(t, x), phi(t, x))

    def test_z7_conjugate_is_inverse_power(self):
        g = permutation_flow(CYCLE7)
        gc = conjugate(g)
        for t in range(7):
            for u in range(7):
                assert gc(t, u) == g(7 - t, u)

    def test_conjugate_undoes_flow(self):
        phi = linear_flow([[0.0, 1.0], [-2.0, -0.1]])
        samples = [(t, np.array([1.0, -0.5])) for t in np.linspace(-1, 1, 11)]
        assert check_conjugacy(phi, samples) < 1e-12

    def test_incomplete_flow_needs_explicit_conjugate(self):
        with pytest.raises(NotConjugableError):
            conjugate(Flow(lambda t, x: x, complete=False))

    def test_names(self):
        phi = translation_flow([1.0])
        assert conjugate(conjugate(phi)).name == phi.name


class TestXi:
    @given(st.floats(-5, 5, allow_nan=False))
    def test_square_along_translation(self, x):
        assert xi_value(square, translation_flow(1.0), np.array([x])) == pytest.approx(4 * x, abs=1e-8)

    def test_constant_observable(self):
        report = xi(Observable.constant(3.0), linear_flow([[0.0, 1.0], [0.0, 0.0]]), np.array([1.0, 2.0]))
        assert report.xi_value == 0
        assert report.degenerate

    def test_z7_shift(self):
        report = xi(Observable.identity(), shift_flow(7), 4)
        assert report.xi_value == 2
        assert report.estimator == "exact-discrete"

    def test_rational_field_is_exact(self):
        f = RATIONALS
        phi = Flow(lambda t, x: x + t, field=f)
        omega = Observable("x^2", lambda x: x * x)
        assert xi_value(omega, phi, Fraction(3, 7)) == Fraction(12, 7)

    def test_non_finite_observable(self):
        with pytest.raises(EvaluationError):
            xi_value(Observable("inf", lambda x: float("inf")), translation_flow(1.0), np.array([0.0]))

    def test_report_json(self):
        report = xi(square, translation_flow(1.0), np.array([0.5]))
        data = json.loads(report.to_json())
        assert set(data) >= {"xi", "estimator", "h", "arrow_sign", "support_fraction"}
        assert data["arrow_sign"] == 1

    def test_complex_value_has_no_arrow(self):
        omega = Observable("phase", lambda x: complex(np.exp(1j * x[0])))
        assert xi(omega, translation_flow(1.0), np.array([0.3])).arrow_sign is None

    def test_support_fraction(self):
        phi = translation_flow(1.0)
        states = [np.array([x]) for x in np.linspace(-1, 1, 20)]
        assert xi_support_fraction(square, phi, states) == 1.0
        assert xi_support_fraction(Observable.constant(), phi, states) == 0.0
        assert xi_support_fraction(square, phi, states, workers=4) == 1.0


class TestSymmetrize:
    def test_translation_symmetrizes_to_identity(self):
        sym = symmetrize(translation_flow([1.0, 3.0]))
        npt.assert_allclose(sym(0.7, np.array([2.0, 1.0])), [2.0, 1.0])

    @settings(max_examples=30)
    @given(st.lists(finite, min_size=2, max_size=2), st.floats(-1, 1))
    def test_sym_linear_xi_vanishes(self, x, c):
        A = np.array([[0.2, 1.0], [-0.4, c]])
        sym = symmetrize(linear_flow(A))
        omega = Observable("lin", lambda u: float(np.dot([1.0, -2.0], u)))
        assert abs(xi_value(omega, sym, np.array(x))) <= 1e-8

    def test_sym_is_self_conjugate(self):
        sym = symmetrize(linear_flow([[0.0, 1.0], [0.5, 0.0]]))
        x = np.array([1.0, 1.0])
        npt.assert_array_equal(conjugate(sym)(0.3, x), sym(0.3, x))

    def test_reversible_flow_matches_to_first_order(self):
        # x lies in the kernel of A, so the residual vanishes at x
        from localdyn.timefield import extrapolated_quotient

        phi = linear_flow([[0.0, 1.0], [0.0, 0.0]])
        x = np.array([1.0, 0.0])
        npt.assert_allclose(reversibility_residual(phi, x), 0.0, atol=1e-12)
        sym = symmetrize(phi)
        d_phi = extrapolated_quotient(lambda t: phi(t, x), 0.0, 1e-4)
        d_sym = extrapolated_quotient(lambda t: sym(t, x), 0.0, 1e-4)
        npt.assert_allclose(d_sym, d_phi, atol=1e-8)

    def test_z2_rejected(self):
        with pytest.raises(UnsupportedStateSpace):
            symmetrize(shift_flow(2))

    def test_finite_labels_rejected(self):
        with pytest.raises(UnsupportedStateSpace):
            symmetrize(permutation_flow(CYCLE7))

    def test_zp_symmetrization_is_identity_for_shift(self):
        sym = symmetrize(shift_flow(7, 3))
        assert all(sym(t, u) == u for t in range(7) for u in range(7))


class TestResidual:
    def test_translation(self):
        npt.assert_allclose(reversibility_residual(translation_flow([2.0, -1.0]), np.zeros(2)), [4.0, -2.0])

    def test_trivial_flow(self):
        phi = Flow(lambda t, x: x, space=StateSpace.real(1))
        npt.assert_array_equal(reversibility_residual(phi, np.array([3.0])), [0.0])

    def test_sym_residual_vanishes(self):
        sym = symmetrize(linear_flow([[0.3, 1.0], [-1.0, 0.2]]))
        npt.assert_allclose(reversibility_residual(sym, np.array([1.0, 2.0])), 0.0, atol=1e-10)


class TestTurningPoints:
    def test_bracket(self):
        path = [np.array([x]) for x in (-1.0, -0.5, 0.5, 1.0)]
        report = detect_turning_points(square, translation_flow(1.0), path)
        assert report.brackets == [(1, 2)]
        assert report.signs == [-1, -1, 1, 1]

    def test_positive_path(self):
        path = [np.array([x]) for x in (0.5, 1.0, 2.0)]
        assert detect_turning_points(square, translation_flow(1.0), path).brackets == []

    def test_all_degenerate(self):
        path = [np.array([x]) for x in (0.5, 1.0, 2.0)]
        report = detect_turning_points(Observable.constant(), translation_flow(1.0), path)
        assert report.degenerate == [0, 1, 2]


def test_state_space_distances():
    assert StateSpace.residue(7).distance(3, 3) == 0
    assert StateSpace.residue(7).distance(3, 4) == float("inf")
    assert StateSpace.real(2).distance(np.array([0.0, 1.0]), np.array([0.5, 1.0])) == 0.5


def test_zp_field_flows_use_residue_times():
    phi = shift_flow(5, 2)
    assert phi.field == TimeField.prime(5)
    assert phi(-1, 0) == 3
