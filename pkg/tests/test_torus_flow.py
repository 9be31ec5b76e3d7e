import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from lyapform.torus_flow import (
    GOLDEN_ALPHA,
    ClosedOneForm,
    ConfigurationError,
    TorusFlowSpec,
    TrigPoly,
    TrigTerm,
    eval_vector_field,
    integrate_form_along,
    integrate_trajectory,
    linear_field,
    morse_gradient_field,
    morse_potential,
    pair_form_with_field,
    periodic_orbit_field,
    zero_field,
)

TWO_PI = 2 * math.pi

term = st.builds(
    TrigTerm,
    st.floats(-2, 2),
    st.tuples(st.integers(-3, 3), st.integers(-3, 3)),
    st.sampled_from(["sin", "cos"]),
)
poly2 = st.lists(term, max_size=4).map(lambda ts: TrigPoly(ts, 2))
point2 = st.tuples(st.floats(-5, 5), st.floats(-5, 5)).map(np.array)


@given(st.tuples(poly2, poly2), point2, st.integers(0, 1))
def test_field_is_periodic(comps, x, axis):
    spec = TorusFlowSpec(2, comps)
    shifted = x + np.eye(2)[axis]
    assert np.allclose(spec(x), spec(shifted), atol=1e-9)


@given(poly2, st.tuples(st.floats(-3, 3), st.floats(-3, 3)), st.integers(0, 1))
@settings(max_examples=30, deadline=None)
def test_form_class_is_its_periods(f, periods, axis):
    # integrate omega around the axis loop by quadrature
    omega = ClosedOneForm(periods, f)
    base = np.array([0.37, 0.81])
    e = np.eye(2)[axis]
    val, _ = quad(lambda s: omega.coefficients(base + s * e)[axis], 0.0, 1.0, limit=200)
    assert val == pytest.approx(periods[axis], abs=1e-9)


class TestEvaluation:
    def test_zero_field(self):
        assert np.array_equal(eval_vector_field(zero_field(), [0.3, 0.9]), [0.0, 0.0])

    def test_linear_field(self):
        v = eval_vector_field(linear_field(), [0.3, 0.7])
        assert v == pytest.approx([1.0, 0.6180339887498949], abs=1e-15)

    def test_morse_field_value(self):
        v = eval_vector_field(morse_gradient_field(), [0.25, 0.0])
        assert v == pytest.approx([TWO_PI, 0.0], abs=1e-12)

    def test_morse_field_is_minus_gradient(self, rng):
        F = morse_potential()
        x = rng.random((20, 2))
        h = 1e-6
        grad = np.stack([(F(x + h * e) - F(x - h * e)) / (2 * h) for e in np.eye(2)], -1)
        assert np.allclose(morse_gradient_field()(x), -grad, atol=1e-8)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            eval_vector_field(linear_field(), [0.1, 0.2, 0.3])


class TestPairing:
    def test_constant_pairing(self, rng):
        vals = pair_form_with_field(ClosedOneForm((-1.0, 0.0)), linear_field(), rng.random((50, 2)))
        assert np.allclose(vals, -1.0)

    def test_gradient_identity(self, rng):
        F = morse_potential()
        omega = ClosedOneForm((0.0, 0.0), F)
        x = rng.random((100, 2))
        vals = pair_form_with_field(omega, morse_gradient_field(), x)
        assert np.allclose(vals, -np.sum(F.gradient(x) ** 2, axis=-1))
        assert np.all(vals <= 1e-12)

    def test_exact_perturbation(self):
        f = TrigPoly([TrigTerm(0.1, (0, 1), "sin")], 2)
        val = pair_form_with_field(ClosedOneForm((-1.0, 0.0), f), linear_field(), [0.0, 0.0])
        assert val == pytest.approx(-1 + 0.2 * math.pi * GOLDEN_ALPHA, abs=1e-14)


class TestIntegration:
    def test_zero_field_constant(self):
        tr = integrate_trajectory(zero_field(), [0.2, 0.4], 10.0, 0.1)
        assert np.all(tr.points_unwrapped == [0.2, 0.4])

    def test_linear_endpoint_exact(self):
        tr = integrate_trajectory(linear_field(), [0.0, 0.0], 2.0, 0.01)
        assert tr.end == pytest.approx([2.0, 2 * GOLDEN_ALPHA], abs=1e-10)
        assert tr.duration == 2.0

    def test_no_wrap_ambiguity(self):
        tr = integrate_trajectory(morse_gradient_field(), [0.1, 0.3], 5.0, 0.025)
        assert np.max(np.abs(np.diff(tr.points_unwrapped, axis=0))) < 0.5

    def test_saddle_neighbourhood_goes_to_sink(self):
        spec = morse_gradient_field()
        x0 = [0.01, 0.49]  # next to the saddle at (0, 1/2)
        coarse = integrate_trajectory(spec, x0, 6.0, 0.01).end
        fine = integrate_trajectory(spec, x0, 6.0, 0.005).end
        assert np.max(np.abs(coarse - fine)) < 1e-6
        assert np.linalg.norm((coarse % 1.0) - [0.5, 0.5]) < 1e-3

    def test_cfl_violation(self):
        with pytest.raises(ConfigurationError, match="0.25"):
            integrate_trajectory(morse_gradient_field(), [0.1, 0.1], 1.0, 0.1)


class TestLineIntegral:
    def test_exact_form_on_closed_loop(self):
        # rational linear flow closes up after t = 3 with displacement (3, 1)
        spec = linear_field((1.0, 1.0 / 3.0))
        tr = integrate_trajectory(spec, [0.0, 0.0], 3.0, 0.01)
        omega = ClosedOneForm((0.0, 0.0), TrigPoly([TrigTerm(0.7, (1, 2), "cos")], 2))
        # displacement is integral, but the exact part integrates to zero only on a closed lift
        assert integrate_form_along(omega, tr) == pytest.approx(0.0, abs=1e-10)

    def test_linear(self):
        tr = integrate_trajectory(linear_field(), [0.0, 0.0], 7.0, 0.01)
        assert integrate_form_along(ClosedOneForm((-1.0, 0.0)), tr) == pytest.approx(-7.0, abs=1e-10)

    def test_linear_plus_exact(self):
        tr = integrate_trajectory(linear_field(), [0.0, 0.0], 7.0, 0.01)
        f = TrigPoly([TrigTerm(0.3, (0, 1), "cos")], 2)
        expected = -7 + 0.3 * (math.cos(14 * math.pi * GOLDEN_ALPHA) - 1)
        assert integrate_form_along(ClosedOneForm((-1.0, 0.0), f), tr) == pytest.approx(expected, abs=1e-10)

    def test_matches_quadrature(self):
        # the telescoped value agrees with integrating omega(V) in time
        spec = periodic_orbit_field()
        f = TrigPoly([TrigTerm(0.4, (1, 1), "sin"), TrigTerm(-0.2, (0, 2), "cos")], 2)
        omega = ClosedOneForm((0.5, -1.0), f)
        tr = integrate_trajectory(spec, [0.1, 0.2], 3.0, 0.001)
        vals = pair_form_with_field(omega, spec, tr.points_unwrapped)
        assert integrate_form_along(omega, tr) == pytest.approx(np.trapezoid(vals, tr.times), abs=1e-5)


def test_json_roundtrip():
    spec = periodic_orbit_field(0.3)
    again = TorusFlowSpec.from_json(json.loads(json.dumps(spec.to_json())))
    x = np.random.default_rng(0).random((10, 2))
    assert np.array_equal(spec(x), again(x))
    omega = ClosedOneForm((1.0, -2.0), morse_potential())
    back = ClosedOneForm.from_json(json.loads(json.dumps(omega.to_json())))
    assert np.array_equal(omega.coefficients(x), back.coefficients(x))
    assert set(omega.to_json()) == {"periods", "potential"}
    assert set(omega.to_json()["potential"][0]) == {"c", "k", "basis"}


def test_dim_must_be_two_or_three():
    with pytest.raises(ValueError):
        zero_field(4)
