import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from favard import (
    NearSingularityError,
    QuasiPeriodicSpec,
    ReciprocalForcing,
    TrigPolynomial,
    angular_distance,
    eval_base,
    reduce_phase,
)

SQRT2 = math.sqrt(2.0)


def scalar_spec(time_domain="continuous"):
    doc = {
        "frequencies": [1.0, SQRT2],
        "matrix_terms": [{"k": [0, 0], "cos": [[-1.0]], "sin": [[0.0]]}],
        "forcing_terms": [
            {"k": [1, 0], "cos": [1.0], "sin": [0.0]},
            {"k": [0, 1], "cos": [1.0], "sin": [0.0]},
        ],
        "time_domain": time_domain,
        "dimension": 1,
    }
    return QuasiPeriodicSpec.from_dict(doc)


class TestPhaseArithmetic:
    @given(st.floats(-1e6, 1e6))
    def test_reduce_phase_range(self, x):
        r = reduce_phase(np.array([x]))
        assert 0.0 <= r[0] < 2 * np.pi

    @given(st.floats(-1e3, 1e3))
    def test_angular_distance_symmetric(self, x):
        assert angular_distance(np.array([x])) == pytest.approx(
            angular_distance(np.array([-x]))[0], abs=1e-9
        )
        assert 0.0 <= angular_distance(np.array([x]))[0] <= np.pi + 1e-12

    def test_angular_distance_known(self):
        assert angular_distance(np.array([2 * np.pi]))[0] == pytest.approx(0.0, abs=1e-12)
        assert angular_distance(np.array([np.pi]))[0] == pytest.approx(np.pi)


class TestTrigPolynomial:
    def test_matches_direct_formula(self):
        # f(theta) = cos(theta1) + cos(theta2)
        p = TrigPolynomial.from_terms(
            [
                {"k": [1, 0], "cos": [1.0], "sin": [0.0]},
                {"k": [0, 1], "cos": [1.0], "sin": [0.0]},
            ]
        )
        theta = np.array([0.3, 1.7])
        assert p(theta)[0] == pytest.approx(math.cos(0.3) + math.cos(1.7), abs=1e-14)

    def test_batch_matches_scalar(self):
        p = TrigPolynomial.from_terms(
            [{"k": [2, -1], "cos": [0.5], "sin": [-1.25]}]
        )
        thetas = np.random.default_rng(3).uniform(0, 2 * np.pi, size=(17, 2))
        batch = p(thetas)
        single = np.array([p(th) for th in thetas])
        np.testing.assert_allclose(batch, single, atol=1e-14)

    def test_matrix_valued(self):
        p = TrigPolynomial.constant(np.array([[0.0, 1.0], [-1.0, 0.0]]), 1)
        np.testing.assert_array_equal(p(np.array([2.0])), [[0.0, 1.0], [-1.0, 0.0]])


class TestQuasiPeriodicSpec:
    def test_forcing_along_flow_known_value(self):
        # two-frequency cosine forcing evaluated one full turn of the first
        # phase: 1 + cos(2 pi sqrt(2))
        spec = scalar_spec()
        _, f = eval_base(spec, np.zeros(2), 2 * np.pi)
        expected = 1.0 + math.cos(2 * np.pi * SQRT2)
        assert f[0] == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.14178, abs=1e-4)

    def test_base_return_quality(self):
        spec = scalar_spec()
        # 2 pi returns the first phase exactly; the second is off by the
        # wrap of 2 pi sqrt(2)
        q = spec.base_return_quality(2 * np.pi)
        expected = float(angular_distance(np.array([2 * np.pi * SQRT2]))[0])
        assert q == pytest.approx(expected, abs=1e-12)

    def test_roundtrip_json(self):
        spec = scalar_spec()
        again = QuasiPeriodicSpec.from_json(spec.to_json())
        np.testing.assert_array_equal(spec.frequencies, again.frequencies)
        theta = np.array([0.4, 0.9])
        np.testing.assert_allclose(spec.matrix_form(theta), again.matrix_form(theta))
        np.testing.assert_allclose(spec.forcing_form(theta), again.forcing_form(theta))

    def test_rejects_duplicate_frequencies(self):
        doc = scalar_spec().to_dict()
        doc["frequencies"] = [1.0, 1.0]
        with pytest.raises(ValueError):
            QuasiPeriodicSpec.from_dict(doc)

    def test_rejects_zero_frequency(self):
        doc = scalar_spec().to_dict()
        doc["frequencies"] = [0.0, SQRT2]
        with pytest.raises(ValueError):
            QuasiPeriodicSpec.from_dict(doc)

    def test_rejects_continuous_delay(self):
        doc = scalar_spec().to_dict()
        doc["delay_order"] = 1
        with pytest.raises(ValueError):
            QuasiPeriodicSpec.from_dict(doc)

    def test_rejects_missing_field(self):
        doc = scalar_spec().to_dict()
        del doc["matrix_terms"]
        with pytest.raises(KeyError):
            QuasiPeriodicSpec.from_dict(doc)

    def test_rejects_shape_mismatch(self):
        doc = scalar_spec().to_dict()
        doc["dimension"] = 2
        with pytest.raises(ValueError):
            QuasiPeriodicSpec.from_dict(doc)

    def test_discrete_rejects_fractional_time(self):
        spec = scalar_spec("discrete")
        with pytest.raises(ValueError):
            eval_base(spec, np.zeros(2), 0.5)


class TestReciprocalForcing:
    def reciprocal(self, margin=1e-6):
        num = TrigPolynomial.constant(np.array([1.0]), 2)
        q = TrigPolynomial.from_terms(
            [
                {"k": [1, 0], "cos": [1.0], "sin": [0.0]},
                {"k": [0, 1], "cos": [1.0], "sin": [0.0]},
            ]
        )
        return ReciprocalForcing(numerator=num, c=2.0, q=q, margin=margin)

    def test_matches_direct_formula(self):
        r = self.reciprocal()
        t = 3.7
        theta = np.array([t % (2 * np.pi), (SQRT2 * t) % (2 * np.pi)])
        direct = 1.0 / (2.0 + math.cos(t) + math.cos(SQRT2 * t))
        assert r(theta)[0] == pytest.approx(direct, abs=1e-12)

    def test_near_singularity_raises(self):
        r = self.reciprocal(margin=1e-2)
        # denominator 2 + cos(pi) + cos(pi) = 0 at theta = (pi, pi)
        with pytest.raises(NearSingularityError):
            r(np.array([np.pi, np.pi]))
