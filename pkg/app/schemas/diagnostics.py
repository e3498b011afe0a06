from __future__ import annotations

from pydantic import BaseModel


class NormEventOut(BaseModel):
    holds: bool
    max_ratio: float
    min_ratio: float


class StatisticEventOut(BaseModel):
    # holds is None when the event does not apply (for example mu = 0).
    holds: bool | None
    statistic: float | None = None


class NoiseCountEventOut(BaseModel):
    holds: bool
    noisy_fraction: float
    threshold: float


class SeparabilityEventOut(BaseModel):
    holds: bool
    solver_separable: bool
    witness_separable: bool
    witness_min_margin: float


class EventReport(BaseModel):
    """Empirical check of the high-probability events behind the risk bound."""

    n: int
    p: int
    c: float
    c_prime: float
    delta: float
    eta: float
    norms: NormEventOut
    pairwise: StatisticEventOut
    clean_alignment: StatisticEventOut
    noisy_alignment: StatisticEventOut
    noise_count: NoiseCountEventOut
    separability: SeparabilityEventOut

    def all_hold(self) -> bool:
        return all(
            event.holds is not False
            for event in (
                self.norms,
                self.pairwise,
                self.clean_alignment,
                self.noisy_alignment,
                self.noise_count,
                self.separability,
            )
        )


class RiskReport(BaseModel):
    analytic_risk: float | None = None
    mc_estimate: float
    mc_ci_halfwidth: float
    mc_trials: int
    theorem_bound: float
    bayes_exact: float | None = None
    bayes_bound: float
    margin_ratio: float | None = None


class BayesReference(BaseModel):
    exact_gaussian: float
    exp_bound: float
