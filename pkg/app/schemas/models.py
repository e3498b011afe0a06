from __future__ import annotations

from collections.abc import Sequence
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

ModelKind = Literal["gaussian_cc", "rare_weak", "boolean_rare_weak"]
RotationKind = Literal["identity", "seeded_orthogonal"]
NoiseKind = Literal["none", "random_flip", "margin_targeted_flip"]


class RotationSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: RotationKind = "identity"
    seed: int | None = Field(default=None, ge=0)

    @model_validator(mode="after")
    def validate_seed(self) -> "RotationSpec":
        if self.kind == "seeded_orthogonal" and self.seed is None:
            raise ValueError("seeded_orthogonal rotation requires a seed")
        if self.kind == "identity" and self.seed is not None:
            raise ValueError("identity rotation takes no seed")
        return self

    @classmethod
    def seeded(cls, seed: int) -> "RotationSpec":
        return cls(kind="seeded_orthogonal", seed=seed)


class ModelSpec(BaseModel):
    """One of the three class-conditional generative models.

    For GaussianCC the mean and the latent variances are explicit; for the
    rare-weak families the mean is derived from (s, gamma). Means are given in
    the latent basis and rotated by U when sampling.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: ModelKind
    p: int = Field(ge=1)
    s: int = Field(default=0, ge=0)
    gamma: float = Field(default=0.0, ge=0.0, allow_inf_nan=False)
    mu: tuple[float, ...] | None = None
    sigma_diag: tuple[float, ...] | None = None
    rotation: RotationSpec = Field(default_factory=RotationSpec)

    @model_validator(mode="after")
    def validate_model(self) -> "ModelSpec":
        if self.kind == "gaussian_cc":
            if self.mu is None or len(self.mu) != self.p:
                raise ValueError("gaussian_cc requires mu of length p")
            if self.sigma_diag is not None:
                if len(self.sigma_diag) != self.p:
                    raise ValueError("sigma_diag must have length p")
                if any(not 0.0 < value <= 1.0 for value in self.sigma_diag):
                    raise ValueError("sigma_diag entries must lie in (0, 1]")
            return self

        if self.mu is not None or self.sigma_diag is not None:
            raise ValueError(f"{self.kind} derives mu from s and gamma")
        if self.s > self.p:
            raise ValueError("s must not exceed p")
        if self.kind == "boolean_rare_weak" and not 0.0 < self.gamma < 0.5:
            raise ValueError("boolean_rare_weak requires gamma in (0, 1/2)")
        return self

    @classmethod
    def gaussian(
        cls,
        mu: Sequence[float],
        sigma_diag: Sequence[float] | None = None,
        *,
        rotation: RotationSpec | None = None,
    ) -> "ModelSpec":
        return cls(
            kind="gaussian_cc",
            p=len(mu),
            mu=tuple(float(value) for value in mu),
            sigma_diag=None if sigma_diag is None else tuple(float(v) for v in sigma_diag),
            rotation=rotation or RotationSpec(),
        )

    @classmethod
    def rare_weak(
        cls, p: int, s: int, gamma: float, *, rotation: RotationSpec | None = None
    ) -> "ModelSpec":
        return cls(kind="rare_weak", p=p, s=s, gamma=gamma, rotation=rotation or RotationSpec())

    @classmethod
    def boolean(
        cls, p: int, s: int, gamma: float, *, rotation: RotationSpec | None = None
    ) -> "ModelSpec":
        return cls(
            kind="boolean_rare_weak", p=p, s=s, gamma=gamma, rotation=rotation or RotationSpec()
        )


class NoiseSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: NoiseKind = "none"
    eta: float = Field(default=0.0, ge=0.0, lt=0.5, allow_inf_nan=False)

    @model_validator(mode="after")
    def validate_eta(self) -> "NoiseSpec":
        if self.kind == "none" and self.eta != 0.0:
            raise ValueError("noise kind 'none' requires eta = 0")
        return self

    @classmethod
    def random_flip(cls, eta: float) -> "NoiseSpec":
        return cls(kind="random_flip", eta=eta)

    @classmethod
    def margin_targeted(cls, eta: float) -> "NoiseSpec":
        return cls(kind="margin_targeted_flip", eta=eta)

    def is_noiseless(self) -> bool:
        return self.kind == "none" or self.eta == 0.0


class AssumptionCheck(BaseModel):
    lhs: float
    rhs: float
    holds: bool


class AssumptionReport(BaseModel):
    """Both sides of each standing assumption; never blocks execution."""

    n: int
    p: int
    delta: float
    eta: float
    C: float
    kappa: float
    a1_failure_probability: AssumptionCheck
    a2_sample_size: AssumptionCheck
    a3_dimension: AssumptionCheck
    a4_mean_norm: AssumptionCheck
    noise_level: AssumptionCheck
    latent_energy: AssumptionCheck
    delta_range: AssumptionCheck
    kappa_range: AssumptionCheck

    def all_hold(self) -> bool:
        return all(
            check.holds
            for check in (
                self.a1_failure_probability,
                self.a2_sample_size,
                self.a3_dimension,
                self.a4_mean_norm,
                self.noise_level,
                self.latent_energy,
                self.delta_range,
                self.kappa_range,
            )
        )
