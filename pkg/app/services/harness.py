"""Deterministic, resumable sweeps over grid points x trials.

Each trial is addressed by mix(base_seed, grid_id, trial), so results do not
depend on worker count or completion order. Finished trials are appended to a
JSON-lines journal by a single writer; a resumed sweep skips every
(grid_id, trial) already journaled. Entries carry a fingerprint of their grid
point and trial options, so a journal written under another config is refused.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Iterable
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import TextIO

import numpy as np
from pydantic import ValidationError

from app.core.config import settings
from app.core.errors import ConfigurationError
from app.core.seeding import mix_seed
from app.schemas.gdflow import GdConfig
from app.schemas.harness import (
    GridAggregate,
    GridPoint,
    SweepConfig,
    SweepResult,
    TrialFailure,
    TrialOptions,
    TrialRecord,
    journal_adapter,
)
from app.services.datagen import apply_noise, mu_of, rotation_of, sample_clean
from app.services.diagnostics import (
    analytic_risk_gaussian,
    check_events,
    margin_ratio,
    mc_risk,
    minimal_passing_c,
)
from app.services.gdflow import train_gd
from app.services.solver import NotSeparable, margin_stats, max_margin

logger = logging.getLogger(__name__)

DATA_STREAM = 0
NOISE_STREAM = 1
TEST_STREAM = 2


class SweepIOError(RuntimeError):
    pass


def trial_seed(base_seed: int, grid_id: int, trial: int) -> int:
    return mix_seed(base_seed, grid_id, trial)


def _test_error(w: np.ndarray, point: GridPoint, seed: int, m_test: int) -> tuple[float, float]:
    spec = point.model_spec()
    noise = point.noise_spec()
    if spec.kind == "gaussian_cc" and noise.kind != "margin_targeted_flip":
        # Exact risk; there is no sampling error to report.
        return analytic_risk_gaussian(w, mu_of(spec), None, noise.eta, rotation=rotation_of(spec)), 0.0
    estimate = mc_risk(w, spec, noise, m_test, mix_seed(seed, TEST_STREAM))
    return estimate.estimate, estimate.ci_halfwidth


def run_trial(
    point: GridPoint,
    seed: int,
    *,
    trial: int = 0,
    options: TrialOptions | None = None,
) -> TrialRecord:
    """generate -> noise -> solve -> risk and diagnostics -> optional gradient descent."""
    options = options or TrialOptions()
    started = time.perf_counter()
    spec = point.model_spec()
    mu = mu_of(spec)
    clean = sample_clean(spec, point.n, mix_seed(seed, DATA_STREAM))
    data = apply_noise(clean, point.noise_spec(), mix_seed(seed, NOISE_STREAM), mu=mu)
    fields = dict(
        grid_id=point.grid_id,
        p=point.p,
        s=point.s,
        gamma=point.gamma,
        eta=point.eta,
        n=point.n,
        beta=point.beta,
        trial=trial,
        seed=seed,
        config_key=point.fingerprint(options),
        n_noisy=len(data.noisy_set),
    )

    try:
        classifier = max_margin(data)
    except NotSeparable as exc:
        logger.info("trial not separable grid_id=%s trial=%s reason=%s", point.grid_id, trial, exc)
        classifier = None

    if options.record_events:
        report = check_events(
            data,
            mu,
            options.event_delta,
            options.event_c,
            options.event_c_prime,
            eta=point.eta,
            solver_separable=classifier is not None,
        )
        fields.update(events_hold=report.all_hold(), min_passing_c=minimal_passing_c(report))

    if classifier is None:
        return TrialRecord(
            separable=False,
            wall_ms=(time.perf_counter() - started) * 1000.0,
            **fields,
        )

    w = classifier.w
    stats = margin_stats(classifier, data)
    test_err, test_ci = _test_error(w, point, seed, options.m_test)
    fields.update(
        train_err=float(np.mean(stats.margins <= 0.0)),
        test_err=test_err,
        test_ci=test_ci,
        min_margin=stats.min_margin,
        norm_w=classifier.norm,
        mu_dot_w=float(mu @ w),
        margin_ratio=margin_ratio(w, mu, point.p) if np.any(mu) else None,
    )

    if options.run_gd:
        cfg = GdConfig(max_iters=options.gd_iters, log_stride=max(1, options.gd_iters // 100))
        _, trace = train_gd(data, cfg, classifier, mu=mu)
        fields.update(sup_amax=trace.sup_a_max, dir_gap=trace.final.direction_gap)

    record = TrialRecord(separable=True, wall_ms=(time.perf_counter() - started) * 1000.0, **fields)
    logger.debug(
        "trial finished grid_id=%s trial=%s separable=%s test_err=%s",
        point.grid_id,
        trial,
        record.separable,
        record.test_err,
    )
    return record


def _execute(point: GridPoint, trial: int, seed: int, options: TrialOptions) -> TrialRecord | TrialFailure:
    try:
        return run_trial(point, seed, trial=trial, options=options)
    except Exception as exc:
        logger.exception("trial failed grid_id=%s trial=%s", point.grid_id, trial)
        return TrialFailure(
            grid_id=point.grid_id,
            trial=trial,
            seed=seed,
            config_key=point.fingerprint(options),
            error_type=type(exc).__name__,
            message=str(exc),
        )


def read_journal(path: Path) -> list[TrialRecord | TrialFailure]:
    if not path.exists():
        return []
    entries: list[TrialRecord | TrialFailure] = []
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise SweepIOError(f"cannot read journal {path}: {exc}") from exc
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            entries.append(journal_adapter.validate_json(line))
        except ValidationError:
            # A torn final line is what an interrupted writer leaves behind.
            if number == len(lines):
                logger.warning("skipping truncated journal line path=%s line=%s", path, number)
                continue
            raise ConfigurationError(f"journal {path} is corrupt at line {number}") from None
    return entries


def _drop_torn_tail(path: Path, entries: list[TrialRecord | TrialFailure]) -> None:
    """Rewrite a journal whose last line is partial so appends start on a fresh line."""
    try:
        if not path.exists():
            return
        raw = path.read_bytes()
        if not raw or raw.endswith(b"\n"):
            return
        path.write_text("".join(entry.model_dump_json() + "\n" for entry in entries), encoding="utf-8")
    except OSError as exc:
        raise SweepIOError(f"cannot repair journal {path}: {exc}") from exc
    logger.warning("journal tail rewritten path=%s entries=%s", path, len(entries))


def _append(handle: TextIO, entry: TrialRecord | TrialFailure) -> None:
    handle.write(entry.model_dump_json() + "\n")
    handle.flush()


def aggregate(records: Iterable[TrialRecord]) -> list[GridAggregate]:
    grouped: dict[int, list[TrialRecord]] = {}
    for record in records:
        grouped.setdefault(record.grid_id, []).append(record)

    aggregates = []
    for grid_id in sorted(grouped):
        group = sorted(grouped[grid_id], key=lambda record: record.trial)
        first = group[0]
        test = np.array([r.test_err for r in group if r.test_err is not None])
        train = np.array([r.train_err for r in group if r.train_err is not None])
        stderr = float(test.std(ddof=1) / math.sqrt(test.size)) if test.size > 1 else None
        aggregates.append(
            GridAggregate(
                grid_id=grid_id,
                p=first.p,
                s=first.s,
                gamma=first.gamma,
                eta=first.eta,
                n=first.n,
                beta=first.beta,
                trials=len(group),
                separable_fraction=sum(r.separable for r in group) / len(group),
                mean_train_err=float(train.mean()) if train.size else None,
                mean_test_err=float(test.mean()) if test.size else None,
                stderr_test_err=stderr,
            )
        )
    return aggregates


def run_sweep(
    cfg: SweepConfig,
    *,
    journal_path: Path | None = None,
    threads: int | None = None,
) -> SweepResult:
    points = cfg.grid_points()
    options = cfg.trial_options()
    tasks = {
        (point.grid_id, trial): (point, trial_seed(cfg.base_seed, point.grid_id, trial))
        for point in points
        for trial in range(cfg.trials)
    }

    finished: dict[tuple[int, int], TrialRecord | TrialFailure] = {}
    if journal_path is not None:
        journaled = read_journal(journal_path)
        fingerprints = {point.grid_id: point.fingerprint(options) for point in points}
        for entry in journaled:
            key = (entry.grid_id, entry.trial)
            if (
                key not in tasks
                or tasks[key][1] != entry.seed
                or fingerprints[entry.grid_id] != entry.config_key
            ):
                raise ConfigurationError(f"journal {journal_path} belongs to a different sweep")
            finished[key] = entry
        _drop_torn_tail(journal_path, journaled)
    pending = [key for key in sorted(tasks) if key not in finished]
    workers = settings.thread_cap(threads)
    logger.info(
        "sweep starting name=%s points=%s trials=%s pending=%s resumed=%s workers=%s",
        cfg.name,
        len(points),
        cfg.trials,
        len(pending),
        len(finished),
        workers,
    )

    handle: TextIO | None = None
    try:
        if journal_path is not None:
            journal_path.parent.mkdir(parents=True, exist_ok=True)
            handle = journal_path.open("a", encoding="utf-8")

        def collect(entry: TrialRecord | TrialFailure) -> None:
            finished[(entry.grid_id, entry.trial)] = entry
            if handle is not None:
                _append(handle, entry)
            done = len(finished)
            if done % 100 == 0 or done == len(tasks):
                logger.info("sweep progress name=%s done=%s total=%s", cfg.name, done, len(tasks))

        if workers == 1 or len(pending) <= 1:
            for key in pending:
                point, seed = tasks[key]
                collect(_execute(point, key[1], seed, options))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [
                    pool.submit(_execute, tasks[key][0], key[1], tasks[key][1], options) for key in pending
                ]
                for future in as_completed(futures):
                    collect(future.result())
    except OSError as exc:
        raise SweepIOError(f"sweep {cfg.name} aborted on I/O failure: {exc}") from exc
    finally:
        if handle is not None:
            handle.close()

    records = [entry for _, entry in sorted(finished.items()) if isinstance(entry, TrialRecord)]
    failures = [entry for _, entry in sorted(finished.items()) if isinstance(entry, TrialFailure)]
    logger.info(
        "sweep finished name=%s records=%s failures=%s", cfg.name, len(records), len(failures)
    )
    return SweepResult(config=cfg, records=records, failures=failures, aggregates=aggregate(records))
