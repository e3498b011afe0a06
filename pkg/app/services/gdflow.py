"""Gradient descent on the exponential loss R(v) = sum_k exp(-z_k . v).

Iterates start at v = 0. Per-example losses are carried as log-losses
(-z_k . v) so loss ratios are exponent differences and never overflow.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from app.core.errors import ConfigurationError
from app.schemas.gdflow import GdConfig, TraceRowOut, TrainTraceOut
from app.services.datagen import Dataset
from app.services.solver import Classifier

logger = logging.getLogger(__name__)

_OVERFLOW_EXPONENT = 700.0
MONOTONE_SLACK = 1e-9


class DivergingLoss(RuntimeError):
    pass


@dataclass(frozen=True)
class TraceRow:
    iter: int
    loss: float
    a_max: float
    mu_dot_v: float | None
    norm_v: float
    direction_gap: float | None

    def to_out(self) -> TraceRowOut:
        return TraceRowOut(
            iter=self.iter,
            R=self.loss,
            A_max=self.a_max,
            mu_dot_v=self.mu_dot_v,
            norm_v=self.norm_v,
            direction_gap=self.direction_gap,
        )


@dataclass(frozen=True, eq=False)
class TrainTrace:
    step_size: float
    rows: list[TraceRow]
    sup_a_max: float
    iterations: int
    stopped_early: bool = False
    loss_snapshots: np.ndarray | None = field(default=None, repr=False)

    @property
    def final(self) -> TraceRow:
        return self.rows[-1]

    def to_out(self) -> TrainTraceOut:
        return TrainTraceOut(
            step_size=self.step_size,
            iterations=self.iterations,
            sup_a_max=self.sup_a_max,
            stopped_early=self.stopped_early,
            rows=[row.to_out() for row in self.rows],
        )


def _check_dimensions(v: np.ndarray, data: Dataset) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (data.p,):
        raise ValueError(f"v must have length {data.p}")
    return v


def _loss_from_margins(margins: np.ndarray) -> float:
    exponents = -margins
    if exponents.max() > _OVERFLOW_EXPONENT:
        return float(np.exp(exponents.astype(np.longdouble)).sum())
    return float(np.exp(exponents).sum())


def exp_loss(v: np.ndarray, data: Dataset) -> float:
    v = _check_dimensions(v, data)
    return _loss_from_margins(data.z @ v)


def log_exp_loss(v: np.ndarray, data: Dataset) -> float:
    v = _check_dimensions(v, data)
    return float(logsumexp(-(data.z @ v)))


def grad_exp_loss(v: np.ndarray, data: Dataset) -> np.ndarray:
    v = _check_dimensions(v, data)
    exponents = -(data.z @ v)
    if exponents.max() > _OVERFLOW_EXPONENT:
        weights = np.exp(exponents.astype(np.longdouble))
        return -(weights @ data.z.astype(np.longdouble)).astype(np.float64)
    return -(np.exp(exponents) @ data.z)


def _ratio_from_margins(margins: np.ndarray) -> float:
    # max_k exp(-m_k) / min_l exp(-m_l) = exp(max m - min m)
    return float(np.exp(margins.max() - margins.min()))


def loss_ratio_max(v: np.ndarray, data: Dataset) -> float:
    v = _check_dimensions(v, data)
    return _ratio_from_margins(data.z @ v)


def direction_gap(v: np.ndarray | Classifier, w: np.ndarray | Classifier) -> float:
    a = v.w if isinstance(v, Classifier) else np.asarray(v, dtype=np.float64)
    b = w.w if isinstance(w, Classifier) else np.asarray(w, dtype=np.float64)
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("direction_gap is undefined for a zero vector")
    cosine = float(a @ b) / (norm_a * norm_b)
    return float(np.clip(1.0 - cosine, 0.0, 2.0))


def smoothness_step(data: Dataset) -> float:
    largest = float(np.max(np.einsum("ij,ij->i", data.x, data.x)))
    if largest == 0.0:
        raise ConfigurationError("smoothness step is undefined when every example is zero")
    return 1.0 / (data.n * largest)


def train_gd(
    data: Dataset,
    cfg: GdConfig | None = None,
    reference_w: Classifier | np.ndarray | None = None,
    *,
    mu: np.ndarray | None = None,
) -> tuple[np.ndarray, TrainTrace]:
    cfg = cfg or GdConfig()
    if cfg.direction_gap_target is not None and reference_w is None:
        raise ConfigurationError("early stopping on direction gap needs a reference classifier")
    reference = None
    if reference_w is not None:
        reference = reference_w.w if isinstance(reference_w, Classifier) else np.asarray(reference_w)
    monotone = cfg.step_size_policy == "smoothness"
    step = smoothness_step(data) if monotone else float(cfg.alpha)

    z = data.z
    v = np.zeros(data.p)
    margins = np.zeros(data.n)
    loss = _loss_from_margins(margins)
    sup_a_max = 1.0
    rows: list[TraceRow] = []
    snapshots: list[np.ndarray] = []

    def record(t: int, a_max: float) -> TraceRow:
        norm_v = float(np.linalg.norm(v))
        gap = direction_gap(v, reference) if reference is not None and norm_v > 0.0 else None
        row = TraceRow(
            iter=t,
            loss=loss,
            a_max=a_max,
            mu_dot_v=None if mu is None else float(mu @ v),
            norm_v=norm_v,
            direction_gap=gap,
        )
        rows.append(row)
        if cfg.keep_loss_snapshots:
            snapshots.append(-margins.copy())
        return row

    record(0, 1.0)
    stopped_early = False
    iterations = 0
    for t in range(1, cfg.max_iters + 1):
        weights = np.exp(-margins)
        v = v + step * (weights @ z)
        margins = z @ v
        new_loss = _loss_from_margins(margins)
        if not np.isfinite(new_loss):
            raise DivergingLoss(f"loss is not finite at iteration {t}")
        if monotone and new_loss > loss * (1.0 + MONOTONE_SLACK):
            raise DivergingLoss(f"loss increased at iteration {t}: {loss} -> {new_loss}")
        loss = new_loss
        a_max = _ratio_from_margins(margins)
        sup_a_max = max(sup_a_max, a_max)
        iterations = t

        if t % cfg.log_stride == 0 or t == cfg.max_iters:
            row = record(t, a_max)
            if (
                cfg.direction_gap_target is not None
                and row.direction_gap is not None
                and row.direction_gap <= cfg.direction_gap_target
            ):
                stopped_early = True
                break

    logger.debug(
        "gradient descent finished iterations=%s loss=%s sup_a_max=%s stopped_early=%s",
        iterations,
        loss,
        sup_a_max,
        stopped_early,
    )
    trace = TrainTrace(
        step_size=step,
        rows=rows,
        sup_a_max=sup_a_max,
        iterations=iterations,
        stopped_early=stopped_early,
        loss_snapshots=np.vstack(snapshots) if snapshots else None,
    )
    return v, trace
