from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.schemas.gdflow import GdConfig, TrainTraceOut
from app.schemas.models import ModelSpec, NoiseSpec
from app.schemas.solver import ClassifierOut, MarginStatsOut, SolverConfig

MAX_INLINE_ROWS = 500
MAX_SAMPLED_ROWS = 2_000


class DatasetSource(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: ModelSpec
    noise: NoiseSpec = Field(default_factory=NoiseSpec)
    n: int = Field(ge=1, le=MAX_SAMPLED_ROWS)
    seed: int = Field(default=0, ge=0)


class InlineDataset(BaseModel):
    model_config = ConfigDict(extra="forbid")

    x: list[list[float]] = Field(min_length=1, max_length=MAX_INLINE_ROWS)
    y: list[int] = Field(min_length=1, max_length=MAX_INLINE_ROWS)

    @model_validator(mode="after")
    def validate_shape(self) -> "InlineDataset":
        if len(self.x) != len(self.y):
            raise ValueError("x and y must have the same number of rows")
        if len({len(row) for row in self.x}) != 1 or not self.x[0]:
            raise ValueError("rows of x must share one nonzero length")
        if any(label not in (-1, 1) for label in self.y):
            raise ValueError("labels must be -1 or +1")
        return self


class DatasetInput(BaseModel):
    """Exactly one of an inline dataset or a sampling recipe."""

    model_config = ConfigDict(extra="forbid")

    data: InlineDataset | None = None
    source: DatasetSource | None = None

    @model_validator(mode="after")
    def validate_choice(self) -> "DatasetInput":
        if (self.data is None) == (self.source is None):
            raise ValueError("provide exactly one of data or source")
        return self


class DatasetSampleRequest(DatasetSource):
    include_rows: bool = False


class DatasetSummaryOut(BaseModel):
    n: int
    p: int
    n_noisy: int
    mu_norm_sq: float
    x: list[list[float]] | None = None
    y: list[int] | None = None
    y_tilde: list[int] | None = None


class MaxMarginRequest(DatasetInput):
    solver: SolverConfig = Field(default_factory=SolverConfig)


class MaxMarginOut(BaseModel):
    classifier: ClassifierOut
    margins: MarginStatsOut


class TrainRequest(DatasetInput):
    gd: GdConfig = Field(default_factory=GdConfig)
    compare_to_max_margin: bool = False


class TrainOut(BaseModel):
    trace: TrainTraceOut
    reference_norm: float | None = None


class BoundOut(BaseModel):
    kind: str
    value: float
