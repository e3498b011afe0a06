from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class SolverConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kkt_tol: float = Field(default=1e-8, gt=0.0, allow_inf_nan=False)
    # One pass is one single-coordinate dual update.
    max_passes: int = Field(default=1_000_000, ge=1)
    unboundedness_guard: float = Field(default=1e10, gt=0.0)
    # Coordinate updates before the LP separability check runs on a stalled solve.
    separability_check_after: int = Field(default=20_000, ge=1)


class KktResidualsOut(BaseModel):
    feasibility: float
    stationarity: float
    complementary_slackness: float
    dual_feasibility: float


class ClassifierOut(BaseModel):
    w: list[float]
    support_set: list[int]
    alpha: list[float] | None = None
    kkt_residuals: KktResidualsOut | None = None


class MarginStatsOut(BaseModel):
    min_margin: float
    argmin: int
    margins: list[float]
