import numpy as np
import pytest

from ipop_dispatch.curvefit import fit_module, fit_polynomial, fit_profile, group_samples
from ipop_dispatch.profile import EfficiencySample, efficiency, pin_at_pout
from ipop_dispatch.synth import dab_pair_samples
from ipop_dispatch.validation import ConditioningError, FitInputError


def test_exact_cubic_recovered():
    xs = [0.5, 1.0, 1.5, 2.0, 2.5]
    poly, report = fit_polynomial([(x, 2 * x ** 3 + x) for x in xs], 3)
    np.testing.assert_allclose(poly.coefficients, (0.0, 1.0, 0.0, 2.0), atol=1e-9)
    assert report.rmse < 1e-9
    assert report.sample_count == 5


def test_model_mismatch_leaves_residual():
    xs = np.linspace(0, 2, 21)
    _, report = fit_polynomial([(x, x ** 2) for x in xs], 1)
    assert report.rmse > 0
    assert 0 <= report.r_squared < 1


def test_noisy_quadratic_loss_coefficient(rng):
    powers = np.linspace(10, 200, 50)
    p_in = powers + 0.001 * powers ** 2 + 5 + rng.uniform(-0.1, 0.1, len(powers))
    poly, _ = fit_polynomial(list(zip(powers, p_in)), 2)
    assert poly.coefficients[2] == pytest.approx(0.001, rel=0.1)


def test_higher_degree_fits_lower_degree_data():
    xs = np.linspace(1, 4, 12)
    ys = 3 + 2 * xs - 0.5 * xs ** 2
    poly, report = fit_polynomial(list(zip(xs, ys)), 5)
    assert report.max_residual < 1e-8 * np.max(np.abs(ys))


def test_rmse_matches_independent_recomputation(rng):
    xs = np.linspace(0.2, 3, 30)
    ys = np.sin(xs) + rng.normal(0, 0.01, len(xs))
    poly, report = fit_polynomial(list(zip(xs, ys)), 3)
    residuals = ys - np.array([poly(x) for x in xs])
    assert report.rmse == pytest.approx(np.sqrt(np.mean(residuals ** 2)), rel=1e-9)


def test_row_order_does_not_matter(rng):
    xs = np.linspace(0.5, 5, 40)
    rows = list(zip(xs, 1 + xs + 0.3 * xs ** 3 + rng.normal(0, 0.05, len(xs))))
    shuffled = [rows[i] for i in rng.permutation(len(rows))]
    first, _ = fit_polynomial(rows, 3)
    second, _ = fit_polynomial(shuffled, 3)
    np.testing.assert_allclose(first.coefficients, second.coefficients, rtol=0, atol=1e-12)


def test_underdetermined_rejected():
    with pytest.raises(FitInputError):
        fit_polynomial([(1.0, 1.0), (2.0, 3.0), (3.0, 2.0)], 3)


def test_identical_x_values_are_rank_deficient():
    with pytest.raises(ConditioningError) as excinfo:
        fit_polynomial([(1.0, float(y)) for y in range(6)], 3)
    assert excinfo.value.degree == 3


def ideal_samples(module_id="ideal", count=10):
    return [
        EfficiencySample(module_id=module_id, current=float(i), p_in=100.0 * i, p_out=80.0 * i)
        for i in np.linspace(0.1, 1.0, count)
    ]


def test_constant_efficiency_recovered():
    profile = fit_profile(ideal_samples(), 3)
    for current in np.linspace(profile.i_min, profile.i_max, 25):
        assert efficiency(profile, float(current)) == pytest.approx(0.8, abs=1e-9)
    assert profile.i_min == pytest.approx(0.1)
    assert profile.i_max == pytest.approx(1.0)


def test_degree_below_three_rejected():
    with pytest.raises(FitInputError, match="N is at least 3"):
        fit_profile(ideal_samples(), 2)


def test_mixed_module_ids_rejected():
    with pytest.raises(FitInputError):
        fit_profile(ideal_samples("a", 5) + ideal_samples("b", 5), 3)


def test_group_samples_keeps_first_seen_order():
    groups = group_samples(ideal_samples("b", 4) + ideal_samples("a", 4))
    assert list(groups) == ["b", "a"]
    assert len(groups["a"]) == 4


def test_dab_pair_fits_cross_near_290_w():
    fits = {module_id: fit_module(samples, 3) for module_id, samples in group_samples(dab_pair_samples()).items()}
    heavy, light = fits["dab-100uH"].profile, fits["dab-150uH"].profile
    powers = np.linspace(100, 500, 4001)
    gap = np.array([
        p / pin_at_pout(heavy, float(p)) - p / pin_at_pout(light, float(p)) for p in powers
    ])
    crossing = powers[np.argmax(gap > 0)]
    assert gap[0] < 0
    assert crossing == pytest.approx(290.0, abs=1.0)
    assert fits["dab-100uH"].pin_report.r_squared > 0.999999
