"""Exact maximum l2-margin classifier through its n-dimensional dual.

The hard-margin problem min ||w|| s.t. z_k . w >= 1 has the dual
max_{alpha >= 0} sum(alpha) - 1/2 alpha^T Q alpha with Q = Z Z^T, and
w = Z^T alpha at the optimum. The solver runs greedy single-coordinate ascent
on the dual and, once per pass over n coordinates, tries an exact solve on the
current support (accepted only when it keeps alpha >= 0 and does not lower the
dual objective). Termination is decided by the KKT violations alone.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import linalg
from scipy.optimize import linprog

from app.core.errors import ConfigurationError
from app.schemas.solver import ClassifierOut, KktResidualsOut, MarginStatsOut, SolverConfig
from app.services.datagen import Dataset

logger = logging.getLogger(__name__)

BRUTE_FORCE_MAX_N = 12
_ORACLE_DUAL_TOL = 1e-10
_ORACLE_PRIMAL_TOL = 1e-10
_ORACLE_SINGULAR_CUTOFF = 1e-12


class NotSeparable(RuntimeError):
    pass


@dataclass(frozen=True)
class KktResiduals:
    feasibility: float
    stationarity: float
    complementary_slackness: float
    dual_feasibility: float

    def worst(self) -> float:
        return max(
            self.feasibility,
            self.stationarity,
            self.complementary_slackness,
            self.dual_feasibility,
        )

    def to_out(self) -> KktResidualsOut:
        return KktResidualsOut(
            feasibility=self.feasibility,
            stationarity=self.stationarity,
            complementary_slackness=self.complementary_slackness,
            dual_feasibility=self.dual_feasibility,
        )


@dataclass(frozen=True, eq=False)
class Classifier:
    w: np.ndarray
    support_set: tuple[int, ...] = ()
    dual: np.ndarray | None = None
    kkt: KktResiduals | None = None

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.w))

    def to_out(self) -> ClassifierOut:
        return ClassifierOut(
            w=self.w.tolist(),
            support_set=list(self.support_set),
            alpha=None if self.dual is None else self.dual.tolist(),
            kkt_residuals=None if self.kkt is None else self.kkt.to_out(),
        )

    @classmethod
    def from_out(cls, payload: ClassifierOut) -> "Classifier":
        kkt = None
        if payload.kkt_residuals is not None:
            kkt = KktResiduals(**payload.kkt_residuals.model_dump())
        return cls(
            w=np.asarray(payload.w, dtype=np.float64),
            support_set=tuple(payload.support_set),
            dual=None if payload.alpha is None else np.asarray(payload.alpha, dtype=np.float64),
            kkt=kkt,
        )


@dataclass(frozen=True, eq=False)
class MarginStats:
    min_margin: float
    argmin: int
    margins: np.ndarray

    def to_out(self) -> MarginStatsOut:
        return MarginStatsOut(
            min_margin=self.min_margin, argmin=self.argmin, margins=self.margins.tolist()
        )


def _weights(classifier: Classifier | np.ndarray) -> np.ndarray:
    if isinstance(classifier, Classifier):
        return classifier.w
    return np.asarray(classifier, dtype=np.float64)


def margin_stats(classifier: Classifier | np.ndarray, data: Dataset) -> MarginStats:
    margins = data.z @ _weights(classifier)
    argmin = int(np.argmin(margins))
    return MarginStats(min_margin=float(margins[argmin]), argmin=argmin, margins=margins)


def kkt_residuals(w: np.ndarray, alpha: np.ndarray, data: Dataset) -> KktResiduals:
    margins = data.z @ w
    norm_w = float(np.linalg.norm(w))
    reconstruction = data.z.T @ alpha
    return KktResiduals(
        feasibility=max(0.0, 1.0 - float(margins.min())),
        stationarity=float(np.linalg.norm(w - reconstruction)) / max(norm_w, np.finfo(float).tiny),
        complementary_slackness=float(np.max(np.abs(alpha * (margins - 1.0)))),
        dual_feasibility=max(0.0, -float(alpha.min())),
    )


def _violations(alpha: np.ndarray, grad: np.ndarray) -> np.ndarray:
    # grad_k = 1 - margin_k: active points need margin 1, inactive ones margin >= 1.
    return np.where(alpha > 0.0, np.abs(grad), np.maximum(grad, 0.0))


def _dual_objective(gram: np.ndarray, alpha: np.ndarray) -> float:
    return float(alpha.sum() - 0.5 * alpha @ gram @ alpha)


def _solve_on_support(gram: np.ndarray, support: np.ndarray) -> np.ndarray | None:
    sub = gram[np.ix_(support, support)]
    ones = np.ones(support.size)
    try:
        coef = linalg.solve(sub, ones, assume_a="pos")
    except linalg.LinAlgError:
        coef = linalg.lstsq(sub, ones)[0]
    if not np.all(np.isfinite(coef)) or coef.min() < 0.0:
        return None
    return coef


def _polish(gram: np.ndarray, alpha: np.ndarray) -> np.ndarray | None:
    support = np.flatnonzero(alpha > 0.0)
    if support.size == 0:
        return None
    coef = _solve_on_support(gram, support)
    if coef is None:
        return None
    candidate = np.zeros_like(alpha)
    candidate[support] = coef
    if _dual_objective(gram, candidate) < _dual_objective(gram, alpha):
        return None
    return candidate


def separable_lp(data: Dataset) -> bool:
    """Exact separability check: max t s.t. z_k . w >= t, |w_j| <= 1."""
    z = data.z
    n, p = z.shape
    objective = np.zeros(p + 1)
    objective[-1] = -1.0
    result = linprog(
        objective,
        A_ub=np.hstack([-z, np.ones((n, 1))]),
        b_ub=np.zeros(n),
        bounds=[(-1.0, 1.0)] * p + [(None, 1.0)],
        method="highs",
    )
    if result.status != 0:
        logger.warning("separability lp did not finish status=%s message=%s", result.status, result.message)
        return False
    scale = float(np.abs(z).max()) if z.size else 0.0
    return -float(result.fun) > 1e-9 * max(scale, np.finfo(float).tiny)


def _finish(data: Dataset, alpha: np.ndarray) -> Classifier:
    w = data.z.T @ alpha
    support = tuple(int(k) for k in np.flatnonzero(alpha > 0.0))
    return Classifier(w=w, support_set=support, dual=alpha, kkt=kkt_residuals(w, alpha, data))


def max_margin(data: Dataset, cfg: SolverConfig | None = None) -> Classifier:
    cfg = cfg or SolverConfig()
    z = data.z
    n = data.n
    gram = z @ z.T
    diag = np.diag(gram).copy()
    if np.any(diag <= 0.0):
        raise NotSeparable("a zero example cannot be separated")

    alpha = np.zeros(n)
    grad = np.ones(n)
    updates = 0
    checked = False

    while True:
        violation = _violations(alpha, grad)
        k = int(np.argmax(violation))
        if violation[k] <= cfg.kkt_tol:
            grad = 1.0 - gram @ alpha
            if _violations(alpha, grad).max() <= cfg.kkt_tol:
                break
            continue

        if updates >= cfg.max_passes:
            raise NotSeparable(f"kkt violations persist after {updates} updates")

        target = max(0.0, alpha[k] + grad[k] / diag[k])
        step = target - alpha[k]
        alpha[k] = target
        grad -= step * gram[:, k]
        updates += 1

        if updates % n == 0:
            total = float(alpha.sum())
            if not np.isfinite(total) or total > cfg.unboundedness_guard:
                raise NotSeparable("dual variables exceed the unboundedness guard")
            polished = _polish(gram, alpha)
            if polished is not None:
                alpha = polished
            grad = 1.0 - gram @ alpha

        if not checked and updates >= cfg.separability_check_after:
            checked = True
            if not separable_lp(data):
                logger.info("separability check failed n=%s p=%s updates=%s", n, data.p, updates)
                raise NotSeparable("linear program certifies the sample is not separable")

    polished = _polish(gram, alpha)
    if polished is not None and _violations(polished, 1.0 - gram @ polished).max() <= cfg.kkt_tol:
        alpha = polished

    classifier = _finish(data, alpha)
    logger.debug(
        "max margin solved n=%s p=%s updates=%s support=%s norm_w=%s",
        n,
        data.p,
        updates,
        len(classifier.support_set),
        classifier.norm,
    )
    return classifier


def brute_force_max_margin(data: Dataset) -> Classifier:
    """Enumerate candidate active sets; keep the feasible candidate of least norm."""
    if data.n > BRUTE_FORCE_MAX_N:
        raise ConfigurationError(f"brute force oracle supports n <= {BRUTE_FORCE_MAX_N}")
    z = data.z
    gram = z @ z.T
    best: tuple[float, np.ndarray] | None = None

    for size in range(1, data.n + 1):
        for subset in combinations(range(data.n), size):
            index = np.asarray(subset)
            sub = gram[np.ix_(index, index)]
            coef = linalg.pinv(sub, atol=_ORACLE_SINGULAR_CUTOFF, rtol=0.0) @ np.ones(size)
            if coef.min() < -_ORACLE_DUAL_TOL:
                continue
            w = z[index].T @ coef
            if (z @ w).min() < 1.0 - _ORACLE_PRIMAL_TOL:
                continue
            norm_sq = float(w @ w)
            if best is None or norm_sq < best[0] * (1.0 - 1e-12):
                alpha = np.zeros(data.n)
                alpha[index] = np.maximum(coef, 0.0)
                best = (norm_sq, alpha)

    if best is None:
        raise NotSeparable("no candidate active set is feasible")
    return _finish(data, best[1])
