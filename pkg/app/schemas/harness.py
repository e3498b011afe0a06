from __future__ import annotations

import hashlib
from itertools import product
from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, model_validator

from app.schemas.models import ModelKind, ModelSpec, NoiseKind, NoiseSpec, RotationSpec

SweepAxis = Literal["p", "s", "gamma", "eta", "n", "beta"]


class TrialOptions(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    m_test: int = Field(default=10_000, ge=100)
    run_gd: bool = False
    gd_iters: int = Field(default=2_000, ge=1)
    record_events: bool = False
    event_c: float = Field(default=10.0, gt=0.0)
    event_c_prime: float = Field(default=0.05, ge=0.0)
    event_delta: float = Field(default=0.05, gt=0.0, lt=1.0)


class GridPoint(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    grid_id: int = Field(ge=0)
    model: ModelKind
    noise: NoiseKind
    n: int = Field(ge=1)
    p: int = Field(ge=1)
    s: int = Field(ge=0)
    gamma: float
    eta: float
    beta: float | None = None
    rotation_seed: int | None = None

    def model_spec(self) -> ModelSpec:
        rotation = RotationSpec() if self.rotation_seed is None else RotationSpec.seeded(self.rotation_seed)
        if self.model == "gaussian_cc":
            # Sweeps over the Gaussian family use the rare-weak mean with unit covariance.
            mu = [self.gamma] * self.s + [0.0] * (self.p - self.s)
            return ModelSpec.gaussian(mu, rotation=rotation)
        return ModelSpec(kind=self.model, p=self.p, s=self.s, gamma=self.gamma, rotation=rotation)

    def noise_spec(self) -> NoiseSpec:
        if self.eta == 0.0:
            return NoiseSpec()
        return NoiseSpec(kind=self.noise, eta=self.eta)

    def fingerprint(self, options: TrialOptions) -> str:
        """Digest of everything that determines a trial besides its seed."""
        payload = self.model_dump_json() + options.model_dump_json()
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


class SweepConfig(BaseModel):
    """A grid of model parameters, each point run for `trials` independent seeds.

    Scalars give the fixed value of an axis; a non-empty `*_grid` sweeps it.
    When `beta_grid` is set, s is derived per point as round(p ** beta).
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = Field(default="custom", min_length=1, max_length=64, pattern=r"^[A-Za-z0-9_.-]+$")
    model: ModelKind = "boolean_rare_weak"
    noise: NoiseKind = "random_flip"
    n: int = Field(default=100, ge=1)
    p: int = Field(default=1000, ge=1)
    s: int = Field(default=100, ge=0)
    gamma: float = Field(default=0.2, ge=0.0)
    eta: float = Field(default=0.05, ge=0.0, lt=0.5)
    n_grid: tuple[int, ...] = ()
    p_grid: tuple[int, ...] = ()
    s_grid: tuple[int, ...] = ()
    gamma_grid: tuple[float, ...] = ()
    eta_grid: tuple[float, ...] = ()
    beta_grid: tuple[float, ...] = ()
    rotation_seed: int | None = Field(default=None, ge=0)
    trials: int = Field(default=100, ge=1)
    base_seed: int = Field(default=0, ge=0)
    m_test: int = Field(default=10_000, ge=100)
    run_gd: bool = False
    gd_iters: int = Field(default=2_000, ge=1)
    record_events: bool = False

    @model_validator(mode="after")
    def validate_grid(self) -> "SweepConfig":
        if self.beta_grid and self.s_grid:
            raise ValueError("s_grid and beta_grid are mutually exclusive")
        if any(not 0.0 < beta <= 1.0 for beta in self.beta_grid):
            raise ValueError("beta values must lie in (0, 1]")
        if any(not 0.0 <= eta < 0.5 for eta in self.eta_grid):
            raise ValueError("eta values must lie in [0, 1/2)")
        if self.noise == "none" and (self.eta != 0.0 or any(self.eta_grid)):
            raise ValueError("noise 'none' requires eta = 0")
        for point in self.grid_points():
            if point.s > point.p:
                raise ValueError(f"grid point {point.grid_id} has s > p")
            if point.model == "boolean_rare_weak" and not 0.0 < point.gamma < 0.5:
                raise ValueError("boolean_rare_weak requires gamma in (0, 1/2)")
        return self

    def series_axis(self) -> SweepAxis | None:
        """Axis drawn as separate curves; None for a single curve."""
        if self.beta_grid:
            return "beta"
        for axis in ("gamma", "eta", "n"):
            if len(getattr(self, f"{axis}_grid")) > 1:
                return axis
        return None

    def x_axis(self) -> SweepAxis:
        if self.s_grid and not self.p_grid:
            return "s"
        if self.p_grid or self.beta_grid:
            return "p"
        for axis in ("gamma", "eta", "n"):
            if getattr(self, f"{axis}_grid"):
                return axis
        return "p"

    def grid_points(self) -> list[GridPoint]:
        ns = self.n_grid or (self.n,)
        etas = self.eta_grid or (self.eta,)
        gammas = self.gamma_grid or (self.gamma,)
        ps = self.p_grid or (self.p,)
        betas: tuple[float | None, ...] = self.beta_grid or (None,)
        ss: tuple[int | None, ...] = self.s_grid or (None,)

        points: list[GridPoint] = []
        for n, eta, gamma, beta, s, p in product(ns, etas, gammas, betas, ss, ps):
            if beta is not None:
                s = int(round(p**beta))
            points.append(
                GridPoint(
                    grid_id=len(points),
                    model=self.model,
                    noise=self.noise,
                    n=n,
                    p=p,
                    s=self.s if s is None else s,
                    gamma=gamma,
                    eta=eta,
                    beta=beta,
                    rotation_seed=self.rotation_seed,
                )
            )
        return points

    def trial_options(self) -> TrialOptions:
        return TrialOptions(
            m_test=self.m_test,
            run_gd=self.run_gd,
            gd_iters=self.gd_iters,
            record_events=self.record_events,
        )

    def task_count(self) -> int:
        return len(self.grid_points()) * self.trials


class TrialRecord(BaseModel):
    kind: Literal["record"] = "record"
    grid_id: int
    p: int
    s: int
    gamma: float
    eta: float
    n: int
    beta: float | None = None
    trial: int
    seed: int
    config_key: str = ""
    separable: bool
    train_err: float | None = None
    test_err: float | None = None
    test_ci: float | None = None
    min_margin: float | None = None
    norm_w: float | None = None
    mu_dot_w: float | None = None
    margin_ratio: float | None = None
    n_noisy: int
    sup_amax: float | None = None
    dir_gap: float | None = None
    events_hold: bool | None = None
    min_passing_c: float | None = None
    wall_ms: float = 0.0


class TrialFailure(BaseModel):
    kind: Literal["failure"] = "failure"
    grid_id: int
    trial: int
    seed: int
    config_key: str = ""
    error_type: str
    message: str


JournalEntry = Annotated[TrialRecord | TrialFailure, Field(discriminator="kind")]
journal_adapter: TypeAdapter[TrialRecord | TrialFailure] = TypeAdapter(JournalEntry)


class GridAggregate(BaseModel):
    grid_id: int
    p: int
    s: int
    gamma: float
    eta: float
    n: int
    beta: float | None = None
    trials: int
    separable_fraction: float
    mean_train_err: float | None = None
    mean_test_err: float | None = None
    stderr_test_err: float | None = None


class SweepResult(BaseModel):
    config: SweepConfig
    records: list[TrialRecord]
    failures: list[TrialFailure] = Field(default_factory=list)
    aggregates: list[GridAggregate] = Field(default_factory=list)
