import math

import numpy as np
import pytest

from app.core.errors import ConfigurationError
from app.schemas.models import ModelSpec, NoiseSpec, RotationSpec
from app.services.datagen import apply_noise, mu_of, rotation_matrix, sample_clean
from app.services.diagnostics import (
    analytic_risk_gaussian,
    bayes_reference,
    check_events,
    corollary_bound,
    dot_vs_norm_bound,
    margin_ratio,
    mc_risk,
    minimal_passing_c,
    normal_cdf,
    risk_report,
    sample_scaling_exponent,
    scaling_exponent,
    separability_witness,
    theorem_bound,
    wilson_halfwidth,
)


def test_normal_cdf_reference_values() -> None:
    assert normal_cdf(0.0) == pytest.approx(0.5)
    assert normal_cdf(-2.0) == pytest.approx(0.0227501, abs=1e-7)
    assert normal_cdf(2.0) + normal_cdf(-2.0) == pytest.approx(1.0)


def test_analytic_risk_of_the_mean_direction() -> None:
    mu = np.array([3.0, 4.0, 0.0])
    assert analytic_risk_gaussian(mu, mu, None, 0.0) == pytest.approx(normal_cdf(-5.0))
    assert analytic_risk_gaussian(2.5 * mu, mu, None, 0.0) == pytest.approx(normal_cdf(-5.0))
    assert analytic_risk_gaussian(np.array([1.0, 0.0]), np.zeros(2), None, 0.0) == pytest.approx(0.5)


def test_analytic_risk_with_symmetric_flips() -> None:
    mu = np.array([2.0, 0.0])
    expected = 0.95 * normal_cdf(-2.0) + 0.05 * normal_cdf(2.0)
    assert analytic_risk_gaussian(mu, mu, None, 0.05) == pytest.approx(expected)
    assert expected == pytest.approx(0.0705, abs=1e-4)


def test_analytic_risk_uses_the_latent_variances() -> None:
    mu = np.array([1.0, 0.0])
    w = np.array([1.0, 1.0])
    # w . mu = 1, w^T Sigma w = 1 + 0.25
    risk = analytic_risk_gaussian(w, mu, np.array([1.0, 0.25]), 0.0)
    assert risk == pytest.approx(normal_cdf(-1.0 / math.sqrt(1.25)))


def test_analytic_risk_is_rotation_invariant() -> None:
    rotation = rotation_matrix(4, 9)
    latent_mu = np.array([1.0, 0.5, 0.0, 0.0])
    latent_w = np.array([0.3, 1.0, -0.2, 0.4])
    plain = analytic_risk_gaussian(latent_w, latent_mu, None, 0.1)
    turned = analytic_risk_gaussian(rotation @ latent_w, rotation @ latent_mu, None, 0.1, rotation=rotation)
    assert turned == pytest.approx(plain)


def test_analytic_risk_rejects_zero_w() -> None:
    with pytest.raises(ValueError):
        analytic_risk_gaussian(np.zeros(2), np.ones(2), None, 0.0)


def test_bayes_reference_values() -> None:
    assert bayes_reference(0.0, 0.0).exact_gaussian == pytest.approx(0.5)
    assert bayes_reference(2.0, 0.0).exact_gaussian == pytest.approx(normal_cdf(-2.0))
    assert bayes_reference(2.0, 0.1).exact_gaussian == pytest.approx(0.1182, abs=1e-4)
    assert bayes_reference(2.0, 0.1).exp_bound == pytest.approx(0.1 + math.exp(-4.0))
    with pytest.raises(ConfigurationError):
        bayes_reference(1.0, 0.5)


def test_theorem_bound_limits_and_monotonicity() -> None:
    assert theorem_bound(0.0, 100, 0.05, 1.0) == pytest.approx(1.05)
    values = [theorem_bound(16.0, p, 0.05, 1.0) for p in (100, 1000, 10_000)]
    assert values == sorted(values)
    with pytest.raises(ConfigurationError):
        theorem_bound(1.0, 0, 0.0, 1.0)


def test_corollary_bound_matches_the_general_bound() -> None:
    gamma, s, p = 0.2, 100, 1000
    value = corollary_bound(gamma, s, p, 0.05, 1.0)
    assert value == pytest.approx(0.05 + math.exp(-0.016))
    assert value == pytest.approx(theorem_bound(4 * gamma**2 * s, p, 0.05, 1.0 / 16.0))


def test_dot_vs_norm_bound() -> None:
    mu = np.array([2.0, 0.0])
    assert dot_vs_norm_bound(np.array([1.0, 0.0]), mu, 0.1, 1.0) == pytest.approx(0.1 + math.exp(-4.0))
    with pytest.raises(ValueError):
        dot_vs_norm_bound(np.zeros(2), mu, 0.1, 1.0)


def test_scaling_exponents() -> None:
    assert scaling_exponent(0.5) == pytest.approx(0.0)
    assert scaling_exponent(0.65) == pytest.approx(0.3)
    assert sample_scaling_exponent(0.5, 0.5) == pytest.approx(0.5)


def test_margin_ratio_examples() -> None:
    mu = np.zeros(16)
    mu[0] = 2.0
    assert margin_ratio(mu, mu, 16) == pytest.approx(2.0)
    orthogonal = np.zeros(16)
    orthogonal[1] = 1.0
    assert margin_ratio(orthogonal, mu, 16) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        margin_ratio(np.zeros(16), mu, 16)
    with pytest.raises(ValueError):
        margin_ratio(mu, np.zeros(16), 16)


def test_separability_witness(dataset_from, contradictory_data) -> None:
    single = separability_witness(dataset_from([[3.0, 4.0]], [1]))
    assert single.separates
    assert single.min_margin == pytest.approx(25.0)
    assert not separability_witness(contradictory_data).separates


def test_single_example_events_are_vacuous(dataset_from) -> None:
    data = dataset_from([[1.0, 0.0, 0.0, 0.0]], [1])
    report = check_events(data, np.zeros(4), delta=0.1, c=2.0, c_prime=0.0)
    assert report.pairwise.holds
    assert report.pairwise.statistic == 0.0
    assert report.clean_alignment.holds is None
    assert report.noisy_alignment.holds is None
    assert report.separability.holds


def test_unit_norm_rows_give_unit_norm_statistics() -> None:
    spec = ModelSpec.boolean(p=200, s=20, gamma=0.2)
    data = sample_clean(spec, 30, seed=2)
    report = check_events(data, mu_of(spec), delta=0.05, c=10.0, c_prime=0.05)
    assert report.norms.max_ratio == pytest.approx(1.0)
    assert report.norms.min_ratio == pytest.approx(1.0)
    assert report.norms.holds
    assert report.noise_count.noisy_fraction == 0.0


def test_event_statistics_ignore_example_order() -> None:
    spec = ModelSpec.boolean(p=300, s=60, gamma=0.2)
    mu = mu_of(spec)
    data = apply_noise(sample_clean(spec, 25, seed=4), NoiseSpec.random_flip(0.2), seed=5)
    order = np.random.default_rng(1).permutation(data.n)
    first = check_events(data, mu, 0.05, 10.0, 0.05, eta=0.2)
    second = check_events(data.permuted(order), mu, 0.05, 10.0, 0.05, eta=0.2)
    assert first.pairwise.statistic == pytest.approx(second.pairwise.statistic)
    assert first.clean_alignment.statistic == pytest.approx(second.clean_alignment.statistic)
    assert first.noisy_alignment.statistic == pytest.approx(second.noisy_alignment.statistic)
    assert first.noise_count == second.noise_count


def test_witness_implies_solver_separability() -> None:
    spec = ModelSpec.boolean(p=500, s=100, gamma=0.2)
    data = sample_clean(spec, 20, seed=6)
    report = check_events(data, mu_of(spec), 0.05, 10.0, 0.05)
    assert report.separability.witness_separable
    assert report.separability.solver_separable


def test_minimal_passing_c_passes() -> None:
    spec = ModelSpec.rare_weak(p=400, s=40, gamma=0.5)
    mu = mu_of(spec)
    data = sample_clean(spec, 20, seed=3)
    loose = check_events(data, mu, 0.05, 1.0, 0.05)
    c_min = minimal_passing_c(loose)
    tight = check_events(data, mu, 0.05, c_min, 0.05)
    assert tight.norms.holds
    assert tight.pairwise.holds


def test_event_constants_are_validated(two_point_data) -> None:
    with pytest.raises(ConfigurationError):
        check_events(two_point_data, np.zeros(2), delta=1.0, c=1.0, c_prime=0.0)
    with pytest.raises(ConfigurationError):
        check_events(two_point_data, np.zeros(2), delta=0.1, c=0.0, c_prime=0.0)
    with pytest.raises(ValueError):
        check_events(two_point_data, np.zeros(3), delta=0.1, c=1.0, c_prime=0.0)


def test_wilson_interval_is_positive_at_zero_errors() -> None:
    assert wilson_halfwidth(0, 1000) > 0.0
    assert wilson_halfwidth(500, 1000) == pytest.approx(1.96 * math.sqrt(0.25 / 1000), rel=0.01)


def test_mc_risk_of_an_uninformative_model_is_a_coin_flip() -> None:
    spec = ModelSpec.rare_weak(p=5, s=0, gamma=0.0)
    estimate = mc_risk(np.ones(5), spec, NoiseSpec(), 10_000, seed=3)
    assert estimate.trials == 10_000
    assert abs(estimate.estimate - 0.5) <= 4 * math.sqrt(0.25 / 10_000)


def test_mc_risk_agrees_with_the_closed_form() -> None:
    spec = ModelSpec.gaussian([1.0, 0.5, 0.0, 0.0])
    noise = NoiseSpec.random_flip(0.1)
    w = np.array([1.0, 0.2, 0.3, -0.1])
    exact = analytic_risk_gaussian(w, mu_of(spec), None, 0.1)
    estimate = mc_risk(w, spec, noise, 20_000, seed=11)
    assert abs(estimate.estimate - exact) <= 4 * math.sqrt(exact * (1 - exact) / 20_000)


def test_mc_risk_needs_enough_samples() -> None:
    with pytest.raises(ConfigurationError):
        mc_risk(np.ones(3), ModelSpec.rare_weak(p=3, s=1, gamma=1.0), NoiseSpec(), 99, seed=0)


def test_risk_report_for_a_gaussian_model() -> None:
    spec = ModelSpec.gaussian([1.5, 0.0, 0.0], rotation=RotationSpec.seeded(4))
    w = mu_of(spec)
    report = risk_report(w, spec, NoiseSpec.random_flip(0.05), 2000, seed=1)
    assert report.analytic_risk == pytest.approx(0.95 * normal_cdf(-1.5) + 0.05 * normal_cdf(1.5))
    assert report.bayes_exact == pytest.approx(report.analytic_risk)
    assert report.margin_ratio == pytest.approx(math.sqrt(3) / 1.5)
    assert report.mc_trials == 2000


def test_risk_report_for_a_boolean_model_has_no_closed_form() -> None:
    spec = ModelSpec.boolean(p=50, s=10, gamma=0.2)
    report = risk_report(mu_of(spec), spec, NoiseSpec.random_flip(0.05), 1000, seed=2)
    assert report.analytic_risk is None
    assert report.bayes_exact is None
    assert 0.0 <= report.mc_estimate <= 1.0
    assert report.theorem_bound == pytest.approx(theorem_bound(1.6, 50, 0.05, 1.0))
