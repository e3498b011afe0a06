import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.core.errors import ConfigurationError
from app.schemas.models import ModelSpec, NoiseSpec
from app.schemas.solver import SolverConfig
from app.services.datagen import Dataset, apply_noise, mu_of, rotation_matrix, sample_clean
from app.services.solver import (
    BRUTE_FORCE_MAX_N,
    Classifier,
    NotSeparable,
    brute_force_max_margin,
    kkt_residuals,
    margin_stats,
    max_margin,
    separable_lp,
)


def _pushed_apart(seed: int, n: int, p: int) -> Dataset:
    """Random points labeled by a random hyperplane, moved off it by at least 1/2."""
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(p)
    direction /= np.linalg.norm(direction)
    x = rng.standard_normal((n, p))
    y = np.where(x @ direction >= 0.0, 1, -1).astype(np.int8)
    x = x + 0.5 * y[:, None] * direction
    return Dataset(x=x, y=y, y_tilde=y)


def test_single_example(dataset_from) -> None:
    classifier = max_margin(dataset_from([[2.0, 0.0]], [1]))
    np.testing.assert_allclose(classifier.w, [0.5, 0.0], atol=1e-12)
    assert classifier.support_set == (0,)


def test_symmetric_pair(two_point_data) -> None:
    classifier = max_margin(two_point_data)
    np.testing.assert_allclose(classifier.w, [1.0, 0.0], atol=1e-9)
    stats = margin_stats(classifier, two_point_data)
    assert stats.min_margin == pytest.approx(1.0)


def test_contradictory_labels_are_not_separable(contradictory_data) -> None:
    assert not separable_lp(contradictory_data)
    with pytest.raises(NotSeparable):
        max_margin(contradictory_data)


def test_zero_example_is_not_separable(dataset_from) -> None:
    with pytest.raises(NotSeparable):
        max_margin(dataset_from([[0.0, 0.0], [1.0, 1.0]], [1, -1]))


def test_pass_budget_is_enforced() -> None:
    data = _pushed_apart(seed=3, n=30, p=10)
    with pytest.raises(NotSeparable):
        max_margin(data, SolverConfig(max_passes=3))


def test_kkt_conditions_hold_on_a_sampled_instance() -> None:
    spec = ModelSpec.boolean(p=400, s=40, gamma=0.2)
    clean = sample_clean(spec, 40, seed=5)
    data = apply_noise(clean, NoiseSpec.random_flip(0.1), seed=6, mu=mu_of(spec))
    classifier = max_margin(data)
    assert classifier.kkt is not None
    assert classifier.kkt.worst() <= 1e-8
    margins = margin_stats(classifier, data).margins
    assert margins.min() >= 1.0 - 1e-8
    np.testing.assert_allclose(margins[list(classifier.support_set)], 1.0, atol=1e-8)
    assert separable_lp(data)


def test_scaling_the_data_scales_w_inversely() -> None:
    data = _pushed_apart(seed=11, n=12, p=6)
    base = max_margin(data)
    scaled = max_margin(data.scaled(2.0))
    np.testing.assert_allclose(scaled.w, base.w / 2.0, rtol=1e-6, atol=1e-9)


def test_permuting_examples_keeps_w() -> None:
    data = _pushed_apart(seed=12, n=15, p=8)
    order = np.random.default_rng(0).permutation(data.n)
    np.testing.assert_allclose(max_margin(data.permuted(order)).w, max_margin(data).w, rtol=1e-6, atol=1e-9)


def test_kkt_residuals_flag_an_infeasible_w(two_point_data) -> None:
    residuals = kkt_residuals(np.array([0.5, 0.0]), np.array([0.5, 0.5]), two_point_data)
    assert residuals.feasibility == pytest.approx(0.5)
    assert residuals.dual_feasibility == 0.0


def test_classifier_round_trips_through_its_schema(two_point_data) -> None:
    classifier = max_margin(two_point_data)
    restored = Classifier.from_out(classifier.to_out())
    np.testing.assert_array_equal(restored.w, classifier.w)
    assert restored.support_set == classifier.support_set
    assert restored.kkt == classifier.kkt


def test_brute_force_has_a_size_limit() -> None:
    data = _pushed_apart(seed=1, n=BRUTE_FORCE_MAX_N + 1, p=3)
    with pytest.raises(ConfigurationError):
        brute_force_max_margin(data)


def test_brute_force_rejects_inseparable_samples(contradictory_data) -> None:
    with pytest.raises(NotSeparable):
        brute_force_max_margin(contradictory_data)


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    n=st.integers(min_value=1, max_value=8),
    p=st.integers(min_value=2, max_value=10),
)
def test_solver_matches_brute_force_oracle(seed: int, n: int, p: int) -> None:
    data = _pushed_apart(seed, n, p)
    solved = max_margin(data)
    oracle = brute_force_max_margin(data)
    error = np.linalg.norm(solved.w - oracle.w) / np.linalg.norm(oracle.w)
    assert error <= 1e-6


def _model_instance(kind: str, seed: int, n: int, p: int) -> Dataset:
    if kind == "gaussian_cc":
        rng = np.random.default_rng(seed)
        spec = ModelSpec.gaussian(rng.normal(0.0, 1.0, size=p), rng.uniform(0.3, 1.0, size=p))
    elif kind == "rare_weak":
        spec = ModelSpec.rare_weak(p=p, s=min(4, p), gamma=1.0)
    else:
        spec = ModelSpec.boolean(p=p, s=min(4, p), gamma=0.3)
    clean = sample_clean(spec, n, seed)
    return apply_noise(clean, NoiseSpec.random_flip(0.2), seed + 1, mu=mu_of(spec))


def _assert_matches_oracle(data: Dataset) -> None:
    solved = max_margin(data)
    oracle = brute_force_max_margin(data)
    error = np.linalg.norm(solved.w - oracle.w) / np.linalg.norm(oracle.w)
    assert error <= 1e-6
    assert solved.kkt is not None
    assert solved.kkt.worst() <= 1e-8


@settings(max_examples=60, deadline=None)
@given(
    kind=st.sampled_from(["rare_weak", "gaussian_cc", "boolean_rare_weak"]),
    seed=st.integers(min_value=0, max_value=2**31),
    p=st.integers(min_value=3, max_value=10),
    data=st.data(),
)
def test_solver_matches_oracle_on_model_samples(kind: str, seed: int, p: int, data) -> None:
    n = data.draw(st.integers(min_value=1, max_value=min(8, p)), label="n")
    instance = _model_instance(kind, seed, n, p)
    if not separable_lp(instance):
        # Repeated sign vectors with opposite labels can occur in the boolean model.
        with pytest.raises(NotSeparable):
            max_margin(instance)
        with pytest.raises(NotSeparable):
            brute_force_max_margin(instance)
        return
    _assert_matches_oracle(instance)


def test_rare_weak_instance_matches_oracle() -> None:
    spec = ModelSpec.rare_weak(p=8, s=4, gamma=1.0)
    _assert_matches_oracle(sample_clean(spec, 6, seed=2024))


def test_gaussian_instance_with_more_points_than_dimensions_matches_oracle() -> None:
    rng = np.random.default_rng(7)
    spec = ModelSpec.gaussian([4.0, 0.0, 0.0, 0.0, 0.0], rng.uniform(0.5, 1.0, size=5))
    data = sample_clean(spec, 8, seed=7)
    assert separable_lp(data)
    _assert_matches_oracle(data)


def test_rotating_the_data_rotates_w() -> None:
    data = _pushed_apart(seed=21, n=10, p=6)
    rotation = rotation_matrix(6, 5)
    rotated = Dataset(x=data.x @ rotation.T, y=data.y, y_tilde=data.y_tilde)
    np.testing.assert_allclose(max_margin(rotated).w, rotation @ max_margin(data).w, rtol=1e-6, atol=1e-9)


def test_duplicated_point_gives_the_single_point_solution(dataset_from) -> None:
    single = dataset_from([[2.0, 1.0]], [1])
    doubled = dataset_from([[2.0, 1.0], [2.0, 1.0]], [1, 1])
    for w in (max_margin(single).w, max_margin(doubled).w, brute_force_max_margin(doubled).w):
        np.testing.assert_allclose(w, [0.4, 0.2], atol=1e-9)
