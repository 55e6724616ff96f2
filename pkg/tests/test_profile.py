import math

import numpy as np
import pydantic
import pytest

from conftest import quadratic
from ipop_dispatch.models.documents import ProfileDocument
from ipop_dispatch.profile import (
    EfficiencySample, ModuleProfile, PowerPolynomial, efficiency, eval_pin, eval_pout,
    invert_pout, marginal_rate, peak_efficiency, pin_at_pout, pin_at_pout_array,
    profile_from_document, profile_to_document,
)
from ipop_dispatch.validation import ModelError, OperatingRangeError, ValidationError


def make_profile(pin, pout, i_min=0.1, i_max=3.0, module_id="m"):
    return ModuleProfile(module_id, PowerPolynomial(tuple(pin)), PowerPolynomial(tuple(pout)), i_min, i_max)


@pytest.fixture
def cubic_profile():
    return make_profile([10.0, 60.0, 3.0, 0.6], [0.0, 50.0, 2.0, 0.5], i_min=0.5, i_max=5.0)


class TestEvaluation:
    def test_linear_and_quadratic_pin(self):
        assert eval_pin(make_profile([0, 100], [0, 80]), 2.0) == pytest.approx(200.0)
        assert eval_pin(make_profile([5, 100, 1], [0, 80]), 1.0) == pytest.approx(106.0)

    def test_pout(self):
        profile = make_profile([0, 100], [0, 80])
        assert eval_pout(profile, 2.0) == pytest.approx(160.0)
        assert eval_pout(profile, 0.5) == pytest.approx(40.0)

    def test_efficiency(self):
        assert efficiency(make_profile([5, 100, 1], [0, 80]), 1.0) == pytest.approx(80 / 106)
        assert efficiency(make_profile([0, 80], [0, 80]), 1.7) == pytest.approx(1.0)

    def test_quadratic_loss_efficiency(self):
        profile = quadratic("q", 5.0, 0.001)
        assert efficiency(profile, 70.7107) == pytest.approx(1 / (1 + 2 * math.sqrt(0.005)), abs=1e-9)

    def test_out_of_range_current_names_module(self):
        with pytest.raises(OperatingRangeError) as excinfo:
            eval_pin(make_profile([0, 100], [0, 80], module_id="dab-7"), 3.5)
        assert "dab-7" in str(excinfo.value)
        assert excinfo.value.high == 3.0

    def test_efficiency_bounded_on_range(self, cubic_profile):
        for current in np.linspace(cubic_profile.i_min, cubic_profile.i_max, 200):
            assert 0 < efficiency(cubic_profile, float(current)) <= 1


class TestInversion:
    def test_linear_inverse(self):
        profile = make_profile([0, 100], [0, 80])
        assert invert_pout(profile, 160.0) == pytest.approx(2.0)
        assert invert_pout(profile, profile.p_out_min) == profile.i_min

    def test_cubic_round_trip(self, cubic_profile, rng):
        for p_out in rng.uniform(cubic_profile.p_out_min, cubic_profile.p_out_max, 200):
            current = invert_pout(cubic_profile, float(p_out))
            assert eval_pout(cubic_profile, current) == pytest.approx(p_out, rel=1e-9)

    def test_out_of_range_power(self, cubic_profile):
        with pytest.raises(OperatingRangeError):
            invert_pout(cubic_profile, cubic_profile.p_out_max * 1.01)

    def test_vectorized_pin_matches_scalar(self, cubic_profile):
        powers = np.linspace(cubic_profile.p_out_min, cubic_profile.p_out_max, 50)
        expected = [pin_at_pout(cubic_profile, float(p)) for p in powers]
        np.testing.assert_allclose(pin_at_pout_array(cubic_profile, powers), expected, rtol=1e-10)


class TestMarginalRate:
    def test_constant_ratio(self):
        assert marginal_rate(make_profile([0, 100], [0, 80]), 1.3) == pytest.approx(0.8)

    def test_quadratic_loss(self):
        assert marginal_rate(quadratic("A", 3.0, 0.002), 100.0) == pytest.approx(1 / 1.4)

    def test_matches_finite_difference(self, cubic_profile):
        h = 1e-5
        for current in (0.8, 1.7, 3.2, 4.5):
            slope = (
                (eval_pout(cubic_profile, current + h) - eval_pout(cubic_profile, current - h))
                / (eval_pin(cubic_profile, current + h) - eval_pin(cubic_profile, current - h))
            )
            assert marginal_rate(cubic_profile, current) == pytest.approx(slope, abs=1e-6)


class TestPeakEfficiency:
    def test_quadratic_loss_closed_form(self):
        current, eta = peak_efficiency(quadratic("q", 5.0, 0.001))
        p_star = math.sqrt(5.0 / 0.001)
        assert current == pytest.approx(p_star, rel=1e-3)
        assert eta == pytest.approx(p_star / (p_star + 10.0), abs=1e-8)

    def test_second_closed_form(self):
        current, eta = peak_efficiency(quadratic("q", 10.0, 0.001))
        assert current == pytest.approx(100.0, rel=1e-3)
        assert eta == pytest.approx(100 / 120, abs=1e-8)

    def test_monotone_efficiency_peaks_at_i_max(self):
        profile = make_profile([10, 1], [0, 0.9], i_min=1.0, i_max=50.0)
        current, _ = peak_efficiency(profile)
        assert current == profile.i_max

    def test_peak_dominates_samples(self, cubic_profile, rng):
        _, eta = peak_efficiency(cubic_profile)
        currents = rng.uniform(cubic_profile.i_min, cubic_profile.i_max, 1000)
        assert all(eta >= efficiency(cubic_profile, float(i)) for i in currents)


class TestModelValidation:
    def test_non_monotone_pout_rejected(self):
        with pytest.raises(ModelError):
            make_profile([100, 1], [10, -1], i_min=0.5, i_max=2.0)

    def test_efficiency_above_one_rejected(self):
        with pytest.raises(ModelError):
            make_profile([0, 70], [0, 80])

    def test_bad_range_rejected(self):
        with pytest.raises(ValidationError):
            make_profile([0, 100], [0, 80], i_min=2.0, i_max=1.0)

    def test_sample_efficiency_above_one(self):
        with pytest.raises(pydantic.ValidationError):
            EfficiencySample(module_id="m", current=1.0, p_in=90.0, p_out=100.0)


def test_document_round_trip(cubic_profile):
    document = profile_to_document(cubic_profile)
    restored = profile_from_document(ProfileDocument.model_validate_json(document.model_dump_json()))
    assert restored == cubic_profile
    assert document.pin_coeffs[0] == 10.0
