"""Risk formulas, bounds and empirical checks of the events the risk bound rests on.

Absolute constants (c, c', C, kappa) are always supplied by the caller. The
checks report the extremal statistics so the smallest passing constant can be
read off instead of asserted.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import erfc, ndtri

from app.core.errors import ConfigurationError
from app.schemas.diagnostics import (
    BayesReference,
    EventReport,
    NoiseCountEventOut,
    NormEventOut,
    RiskReport,
    SeparabilityEventOut,
    StatisticEventOut,
)
from app.schemas.models import ModelSpec, NoiseSpec
from app.schemas.solver import SolverConfig
from app.services.datagen import Dataset, draw_labeled, mu_norm_sq, mu_of, rotation_of
from app.services.solver import Classifier, NotSeparable, max_margin

logger = logging.getLogger(__name__)

MIN_M_TEST = 100
_Z_95 = float(ndtri(0.975))


def normal_cdf(x: float) -> float:
    return float(0.5 * erfc(-x / math.sqrt(2.0)))


def _vector(w: Classifier | np.ndarray) -> np.ndarray:
    if isinstance(w, Classifier):
        return w.w
    return np.asarray(w, dtype=np.float64)


@dataclass(frozen=True)
class SeparabilityWitness:
    separates: bool
    min_margin: float


class MonteCarloRisk(NamedTuple):
    estimate: float
    ci_halfwidth: float
    trials: int


def _norm_constant(max_ratio: float, min_ratio: float) -> float:
    if min_ratio <= 0.0:
        return math.inf
    return max(max_ratio, 1.0 / min_ratio)


def separability_witness(data: Dataset) -> SeparabilityWitness:
    """Evaluate v = sum_j z_j as a separating direction."""
    v = data.z.sum(axis=0)
    min_margin = float((data.z @ v).min())
    return SeparabilityWitness(separates=min_margin > 0.0, min_margin=min_margin)


def check_events(
    data: Dataset,
    mu: np.ndarray,
    delta: float,
    c: float,
    c_prime: float,
    *,
    eta: float = 0.0,
    solver_cfg: SolverConfig | None = None,
    solver_separable: bool | None = None,
) -> EventReport:
    """Evaluate each event on one dataset.

    Pass `solver_separable` when the caller has already run the solver on `data`.
    """
    if not 0.0 < delta < 1.0 or c <= 0.0 or c_prime < 0.0:
        raise ConfigurationError("need delta in (0, 1), c > 0 and c_prime >= 0")
    mu = np.asarray(mu, dtype=np.float64)
    if mu.shape != (data.p,):
        raise ValueError(f"mu must have length {data.p}")
    z = data.z
    n, p = data.n, data.p
    norm_sq_mu = float(mu @ mu)

    row_norms = np.einsum("ij,ij->i", z, z) / p
    max_ratio = float(row_norms.max())
    min_ratio = float(row_norms.min())
    norms = NormEventOut(
        holds=min_ratio > 0.0 and _norm_constant(max_ratio, min_ratio) <= c,
        max_ratio=max_ratio,
        min_ratio=min_ratio,
    )

    if n > 1:
        gram = np.abs(z @ z.T)
        np.fill_diagonal(gram, 0.0)
        scale = norm_sq_mu + math.sqrt(p * math.log(n / delta))
        pair_stat = float(gram.max()) / scale
    else:
        pair_stat = 0.0
    pairwise = StatisticEventOut(holds=pair_stat <= c, statistic=pair_stat)

    alignments = z @ mu
    if norm_sq_mu > 0.0:
        clean = np.asarray(data.clean_set, dtype=np.int64)
        noisy = np.asarray(data.noisy_set, dtype=np.int64)
        clean_stat = (
            float(np.abs(alignments[clean] - norm_sq_mu).max()) / norm_sq_mu if clean.size else 0.0
        )
        noisy_stat = (
            float(np.abs(alignments[noisy] + norm_sq_mu).max()) / norm_sq_mu if noisy.size else 0.0
        )
        clean_alignment = StatisticEventOut(holds=clean_stat < 0.5, statistic=clean_stat)
        noisy_alignment = StatisticEventOut(holds=noisy_stat < 0.5, statistic=noisy_stat)
    else:
        clean_alignment = StatisticEventOut(holds=None)
        noisy_alignment = StatisticEventOut(holds=None)

    noisy_fraction = len(data.noisy_set) / n
    noise_count = NoiseCountEventOut(
        holds=noisy_fraction <= eta + c_prime,
        noisy_fraction=noisy_fraction,
        threshold=eta + c_prime,
    )

    witness = separability_witness(data)
    if solver_separable is None:
        try:
            max_margin(data, solver_cfg)
            solver_separable = True
        except NotSeparable:
            solver_separable = False
    separability = SeparabilityEventOut(
        holds=solver_separable,
        solver_separable=solver_separable,
        witness_separable=witness.separates,
        witness_min_margin=witness.min_margin,
    )

    return EventReport(
        n=n,
        p=p,
        c=c,
        c_prime=c_prime,
        delta=delta,
        eta=eta,
        norms=norms,
        pairwise=pairwise,
        clean_alignment=clean_alignment,
        noisy_alignment=noisy_alignment,
        noise_count=noise_count,
        separability=separability,
    )


def minimal_passing_c(report: EventReport) -> float:
    """Smallest c >= 1 at which the norm and pairwise events hold."""
    norm_c = _norm_constant(report.norms.max_ratio, report.norms.min_ratio)
    return max(1.0, norm_c, report.pairwise.statistic or 0.0)


def margin_ratio(w: Classifier | np.ndarray, mu: np.ndarray, p: int) -> float:
    """(mu . w) sqrt(p) / (||w|| ||mu||^2), the empirical 1/c of the dot-by-norm bound."""
    w = _vector(w)
    mu = np.asarray(mu, dtype=np.float64)
    norm_w = float(np.linalg.norm(w))
    norm_sq_mu = float(mu @ mu)
    if norm_w == 0.0 or norm_sq_mu == 0.0:
        raise ValueError("margin_ratio is undefined for a zero vector")
    return float(mu @ w) * math.sqrt(p) / (norm_w * norm_sq_mu)


def analytic_risk_gaussian(
    w: Classifier | np.ndarray,
    mu: np.ndarray,
    sigma_diag: np.ndarray | None,
    eta: float,
    *,
    rotation: np.ndarray | None = None,
) -> float:
    """Exact test error of sign(w . x) under the Gaussian model with symmetric flips.

    `mu` is the mean in the observed basis; `rotation` maps latent to observed
    coordinates and defaults to the identity.
    """
    w = _vector(w)
    if not np.any(w):
        raise ValueError("analytic risk is undefined for w = 0")
    latent_w = w if rotation is None else rotation.T @ w
    variances = np.ones_like(latent_w) if sigma_diag is None else np.asarray(sigma_diag)
    m = float(np.asarray(mu) @ w) / math.sqrt(float(variances @ (latent_w * latent_w)))
    return (1.0 - eta) * normal_cdf(-m) + eta * normal_cdf(m)


def wilson_halfwidth(errors: int, trials: int) -> float:
    rate = errors / trials
    z_sq = _Z_95 * _Z_95
    spread = math.sqrt(rate * (1.0 - rate) / trials + z_sq / (4.0 * trials * trials))
    return _Z_95 * spread / (1.0 + z_sq / trials)


def mc_risk(
    w: Classifier | np.ndarray,
    spec: ModelSpec,
    noise: NoiseSpec,
    m_test: int,
    seed: int,
) -> MonteCarloRisk:
    if m_test < MIN_M_TEST:
        raise ConfigurationError(f"m_test must be at least {MIN_M_TEST}")
    w = _vector(w)
    errors = 0
    for chunk in draw_labeled(spec, noise, m_test, seed):
        errors += int(np.count_nonzero(np.sign(chunk.x @ w) != chunk.y))
    return MonteCarloRisk(
        estimate=errors / m_test, ci_halfwidth=wilson_halfwidth(errors, m_test), trials=m_test
    )


def _check_positive_p(p: float) -> None:
    if p <= 0:
        raise ConfigurationError("p must be positive")


def theorem_bound(mu_norm_sq: float, p: float, eta: float, c: float) -> float:
    _check_positive_p(p)
    return eta + math.exp(-c * mu_norm_sq**2 / p)


def corollary_bound(gamma: float, s: float, p: float, eta: float, c: float) -> float:
    _check_positive_p(p)
    return eta + math.exp(-c * gamma**4 * s**2 / p)


def dot_vs_norm_bound(w: Classifier | np.ndarray, mu: np.ndarray, eta: float, c: float) -> float:
    w = _vector(w)
    norm_sq_w = float(w @ w)
    if norm_sq_w == 0.0:
        raise ValueError("dot_vs_norm_bound is undefined for w = 0")
    return eta + math.exp(-c * float(np.asarray(mu) @ w) ** 2 / norm_sq_w)


def bayes_reference(mu_norm: float, eta: float, c: float = 1.0) -> BayesReference:
    if not 0.0 <= eta < 0.5:
        raise ConfigurationError("eta must lie in [0, 1/2)")
    return BayesReference(
        exact_gaussian=eta + (1.0 - 2.0 * eta) * normal_cdf(-mu_norm),
        exp_bound=eta + math.exp(-c * mu_norm**2),
    )


def scaling_exponent(beta: float) -> float:
    """Exponent of p in exp(-c p^(2 beta - 1)) when s = p^beta."""
    return 2.0 * beta - 1.0


def sample_scaling_exponent(rho: float, lam: float) -> float:
    """Exponent of n in the bound when p = n^(2 + rho) and s = n^(1 + lam)."""
    return 2.0 * lam - rho


def _has_closed_form(spec: ModelSpec, noise: NoiseSpec) -> bool:
    return spec.kind == "gaussian_cc" and noise.kind != "margin_targeted_flip"


def risk_report(
    w: Classifier | np.ndarray,
    spec: ModelSpec,
    noise: NoiseSpec,
    m_test: int,
    seed: int,
    c: float = 1.0,
) -> RiskReport:
    w = _vector(w)
    mu = mu_of(spec)
    norm_sq = mu_norm_sq(spec)

    bayes = bayes_reference(math.sqrt(norm_sq), noise.eta, c)
    analytic = None
    bayes_exact = None
    if _has_closed_form(spec, noise):
        analytic = analytic_risk_gaussian(w, mu, spec.sigma_diag, noise.eta, rotation=rotation_of(spec))
        if spec.sigma_diag is None or all(value == 1.0 for value in spec.sigma_diag):
            bayes_exact = bayes.exact_gaussian

    estimate = mc_risk(w, spec, noise, m_test, seed)
    ratio = margin_ratio(w, mu, spec.p) if norm_sq > 0.0 else None
    logger.debug(
        "risk report kind=%s p=%s analytic=%s mc=%s ci=%s",
        spec.kind,
        spec.p,
        analytic,
        estimate.estimate,
        estimate.ci_halfwidth,
    )
    return RiskReport(
        analytic_risk=analytic,
        mc_estimate=estimate.estimate,
        mc_ci_halfwidth=estimate.ci_halfwidth,
        mc_trials=estimate.trials,
        theorem_bound=theorem_bound(norm_sq, spec.p, noise.eta, c),
        bayes_exact=bayes_exact,
        bayes_bound=bayes.exp_bound,
        margin_ratio=ratio,
    )