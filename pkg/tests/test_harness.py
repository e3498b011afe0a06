import numpy as np
import pytest
from pydantic import ValidationError

from app.core.errors import ConfigurationError
from app.schemas.harness import GridPoint, SweepConfig, TrialFailure, TrialOptions, journal_adapter
from app.services import harness
from app.services.artifacts import emit_csv
from app.services.harness import aggregate, read_journal, run_sweep, run_trial, trial_seed
from app.services.presets import PRESET_NAMES, log_spaced_p_grid, preset


def _small_sweep(**overrides) -> SweepConfig:
    fields = dict(
        name="small",
        n=10,
        s=20,
        gamma=0.2,
        eta=0.1,
        p_grid=(100, 200),
        trials=3,
        m_test=500,
        base_seed=5,
    )
    fields.update(overrides)
    return SweepConfig(**fields)


def _point(**overrides) -> GridPoint:
    fields = dict(grid_id=0, model="boolean_rare_weak", noise="random_flip", n=10, p=300, s=30, gamma=0.2, eta=0.0)
    fields.update(overrides)
    return GridPoint(**fields)


def test_trial_seed_is_a_pure_function() -> None:
    assert trial_seed(1, 2, 3) == trial_seed(1, 2, 3)
    assert trial_seed(1, 2, 3) != trial_seed(1, 3, 2)


def test_noiseless_high_dimensional_trial_interpolates() -> None:
    record = run_trial(_point(), seed=4, options=TrialOptions(m_test=500))
    assert record.separable
    assert record.train_err == 0.0
    assert record.min_margin == pytest.approx(1.0)
    assert record.n_noisy == 0
    assert 0.0 <= record.test_err <= 1.0
    assert record.test_ci > 0.0


def test_trial_is_reproducible() -> None:
    first = run_trial(_point(eta=0.2), seed=9, trial=1, options=TrialOptions(m_test=200))
    second = run_trial(_point(eta=0.2), seed=9, trial=1, options=TrialOptions(m_test=200))
    assert first.model_dump(exclude={"wall_ms"}) == second.model_dump(exclude={"wall_ms"})


def test_inseparable_trial_is_recorded_not_raised() -> None:
    point = _point(n=50, p=3, s=1, eta=0.3)
    record = run_trial(point, seed=1, options=TrialOptions(m_test=200))
    assert not record.separable
    assert record.test_err is None
    assert record.train_err is None


def test_gaussian_trials_use_the_exact_risk() -> None:
    record = run_trial(_point(model="gaussian_cc", gamma=0.3, eta=0.1), seed=2)
    assert record.test_ci == 0.0
    assert 0.0 < record.test_err < 0.6


def test_trial_with_gradient_descent_and_events() -> None:
    options = TrialOptions(m_test=200, run_gd=True, gd_iters=300, record_events=True)
    record = run_trial(_point(eta=0.1), seed=3, options=options)
    assert record.sup_amax >= 1.0
    assert 0.0 <= record.dir_gap <= 2.0
    assert record.events_hold is not None
    assert record.min_passing_c >= 1.0


def test_single_point_sweep_has_one_record() -> None:
    cfg = SweepConfig(name="one", n=10, p=200, s=20, gamma=0.2, eta=0.1, trials=1, m_test=200)
    result = run_sweep(cfg, threads=1)
    assert len(result.records) == 1
    assert result.failures == []
    assert len(result.aggregates) == 1
    assert result.aggregates[0].trials == 1
    assert result.aggregates[0].stderr_test_err is None


def test_results_do_not_depend_on_worker_count(tmp_path) -> None:
    cfg = _small_sweep()
    serial = run_sweep(cfg, threads=1)
    parallel = run_sweep(cfg, threads=2)
    emit_csv(serial, tmp_path / "serial.csv", include_timing=False)
    emit_csv(parallel, tmp_path / "parallel.csv", include_timing=False)
    assert (tmp_path / "serial.csv").read_bytes() == (tmp_path / "parallel.csv").read_bytes()


def test_resumed_sweep_matches_an_uninterrupted_run(tmp_path) -> None:
    cfg = _small_sweep()
    journal = tmp_path / "journal.jsonl"
    full = run_sweep(cfg, journal_path=journal, threads=1)
    lines = journal.read_text(encoding="utf-8").splitlines(keepends=True)
    assert len(lines) == cfg.task_count()

    # Keep two finished trials plus a torn third line.
    journal.write_text("".join(lines[:2]) + lines[2][:15], encoding="utf-8")
    resumed = run_sweep(cfg, journal_path=journal, threads=1)
    assert len(read_journal(journal)) == cfg.task_count()

    emit_csv(full, tmp_path / "full.csv", include_timing=False)
    emit_csv(resumed, tmp_path / "resumed.csv", include_timing=False)
    assert (tmp_path / "full.csv").read_bytes() == (tmp_path / "resumed.csv").read_bytes()


def test_journal_from_another_sweep_is_rejected(tmp_path) -> None:
    journal = tmp_path / "journal.jsonl"
    run_sweep(_small_sweep(trials=1), journal_path=journal, threads=1)
    with pytest.raises(ConfigurationError):
        run_sweep(_small_sweep(trials=1, base_seed=6), journal_path=journal, threads=1)


@pytest.mark.parametrize(
    "changed",
    [{"gamma": 0.3}, {"eta": 0.2}, {"n": 12}, {"m_test": 600}, {"run_gd": True}, {"record_events": True}],
)
def test_journal_written_under_other_parameters_is_rejected(tmp_path, changed) -> None:
    journal = tmp_path / "journal.jsonl"
    run_sweep(_small_sweep(trials=1), journal_path=journal, threads=1)
    before = journal.read_bytes()
    with pytest.raises(ConfigurationError):
        run_sweep(_small_sweep(trials=1, **changed), journal_path=journal, threads=1)
    assert journal.read_bytes() == before


def test_adding_trials_extends_a_journal(tmp_path) -> None:
    journal = tmp_path / "journal.jsonl"
    first = run_sweep(_small_sweep(trials=1), journal_path=journal, threads=1)
    extended = run_sweep(_small_sweep(trials=2), journal_path=journal, threads=1)
    assert len(extended.records) == 4
    assert len(read_journal(journal)) == 4
    kept = [record for record in extended.records if record.trial == 0]
    assert kept == first.records


def test_events_reuse_the_trial_solve(monkeypatch) -> None:
    calls = []
    real_max_margin = harness.max_margin

    def counted(data, cfg=None):
        calls.append(data.n)
        return real_max_margin(data, cfg)

    def unexpected(data, cfg=None):
        raise AssertionError("check_events solved the dataset again")

    monkeypatch.setattr("app.services.harness.max_margin", counted)
    monkeypatch.setattr("app.services.diagnostics.max_margin", unexpected)
    separable = run_trial(_point(eta=0.1), seed=3, options=TrialOptions(m_test=200, record_events=True))
    inseparable = run_trial(
        _point(n=50, p=3, s=1, eta=0.3), seed=1, options=TrialOptions(m_test=200, record_events=True)
    )
    assert calls == [10, 50]
    assert separable.separable and separable.events_hold is not None
    assert not inseparable.separable and inseparable.events_hold is False


def test_corrupt_journal_line_in_the_middle_is_an_error(tmp_path) -> None:
    journal = tmp_path / "journal.jsonl"
    run_sweep(_small_sweep(trials=1), journal_path=journal, threads=1)
    lines = journal.read_text(encoding="utf-8").splitlines()
    journal.write_text("\n".join(["{not json", *lines]) + "\n", encoding="utf-8")
    with pytest.raises(ConfigurationError):
        read_journal(journal)


def test_failures_are_recorded_and_the_sweep_continues(monkeypatch, tmp_path) -> None:
    real_run_trial = harness.run_trial

    def flaky(point, seed, *, trial=0, options=None):
        if point.grid_id == 0:
            raise RuntimeError("boom")
        return real_run_trial(point, seed, trial=trial, options=options)

    monkeypatch.setattr("app.services.harness.run_trial", flaky)
    cfg = _small_sweep(trials=2)
    journal = tmp_path / "journal.jsonl"
    result = run_sweep(cfg, journal_path=journal, threads=1)
    assert len(result.failures) == 2
    assert all(failure.error_type == "RuntimeError" for failure in result.failures)
    assert len(result.records) == 2
    entries = [journal_adapter.validate_json(line) for line in journal.read_text(encoding="utf-8").splitlines()]
    assert sum(isinstance(entry, TrialFailure) for entry in entries) == 2


def test_aggregation_ignores_record_order() -> None:
    result = run_sweep(_small_sweep(), threads=1)
    assert aggregate(reversed(result.records)) == result.aggregates
    for agg in result.aggregates:
        tests = [r.test_err for r in result.records if r.grid_id == agg.grid_id]
        assert agg.mean_test_err == pytest.approx(float(np.mean(tests)))


def test_separable_trials_have_zero_training_error() -> None:
    result = run_sweep(_small_sweep(eta=0.2), threads=1)
    for record in result.records:
        if record.separable:
            assert record.train_err == 0.0
            assert 0.0 <= record.test_err <= 0.5 + record.test_ci + 0.2


def test_sweep_config_rejects_inconsistent_grids() -> None:
    with pytest.raises(ValidationError):
        SweepConfig(p=50, s=100)
    with pytest.raises(ValidationError):
        SweepConfig(p_grid=(100, 200), s_grid=(10,), beta_grid=(0.5,))
    with pytest.raises(ValidationError):
        SweepConfig(p=200, s=10, beta_grid=(1.5,))
    with pytest.raises(ValidationError):
        SweepConfig(p=200, s=10, gamma=0.5)


def test_beta_grid_derives_s_from_p() -> None:
    cfg = SweepConfig(name="beta", gamma=0.1, beta_grid=(0.5, 0.65), p_grid=(100, 400), eta=0.1)
    points = cfg.grid_points()
    assert [(point.beta, point.p, point.s) for point in points] == [
        (0.5, 100, 10),
        (0.5, 400, 20),
        (0.65, 100, 20),
        (0.65, 400, 49),
    ]
    assert cfg.series_axis() == "beta"
    assert cfg.x_axis() == "p"


def test_log_spaced_grid_spans_the_range() -> None:
    grid = log_spaced_p_grid()
    assert grid[0] == 100
    assert grid[-1] == 3000
    assert len(grid) == 16
    assert list(grid) == sorted(set(grid))


def test_presets_build_and_validate() -> None:
    for name in PRESET_NAMES:
        cfg = preset(name, trials=2)
        assert cfg.name == name
        assert cfg.trials == 2
        assert cfg.grid_points()

    fig3 = preset("fig3", trials=1)
    assert {point.p for point in fig3.grid_points()} == {500}
    assert fig3.x_axis() == "s"
    assert fig3.series_axis() == "gamma"
    assert preset("fig1", trials=1).series_axis() is None


def test_unknown_preset_is_rejected() -> None:
    with pytest.raises(ConfigurationError, match="unknown preset"):
        preset("fig9")
