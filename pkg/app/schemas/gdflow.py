from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

StepSizePolicy = Literal["fixed", "smoothness"]


class GdConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    step_size_policy: StepSizePolicy = "smoothness"
    alpha: float | None = Field(default=None, gt=0.0, allow_inf_nan=False)
    max_iters: int = Field(default=10_000, ge=0)
    log_stride: int = Field(default=100, ge=1)
    direction_gap_target: float | None = Field(default=None, ge=0.0, le=2.0)
    keep_loss_snapshots: bool = False

    @model_validator(mode="after")
    def validate_policy(self) -> "GdConfig":
        if self.step_size_policy == "fixed" and self.alpha is None:
            raise ValueError("fixed step size needs alpha")
        if self.step_size_policy == "smoothness" and self.alpha is not None:
            raise ValueError("smoothness policy derives alpha from the data")
        return self

    @classmethod
    def fixed(cls, alpha: float, **kwargs) -> "GdConfig":
        return cls(step_size_policy="fixed", alpha=alpha, **kwargs)


class TraceRowOut(BaseModel):
    iter: int
    R: float
    A_max: float
    mu_dot_v: float | None = None
    norm_v: float
    direction_gap: float | None = None


class TrainTraceOut(BaseModel):
    step_size: float
    iterations: int
    sup_a_max: float
    stopped_early: bool
    rows: list[TraceRowOut]
