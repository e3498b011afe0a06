from __future__ import annotations

import numpy as np

from app.core.errors import ConfigurationError
from app.core.seeding import mix_seed
from app.schemas.workbench import DatasetInput, DatasetSource
from app.services.datagen import Dataset, apply_noise, mu_of, sample_clean
from app.services.harness import DATA_STREAM, NOISE_STREAM

MAX_SAMPLED_CELLS = 2_000_000
MAX_ROTATED_P = 2_000


def dataset_from_source(source: DatasetSource) -> Dataset:
    if source.n * source.model.p > MAX_SAMPLED_CELLS:
        raise ConfigurationError(f"sampled datasets are limited to n * p <= {MAX_SAMPLED_CELLS}")
    if source.model.rotation.kind != "identity" and source.model.p > MAX_ROTATED_P:
        raise ConfigurationError(f"rotated models are limited to p <= {MAX_ROTATED_P}")
    clean = sample_clean(source.model, source.n, mix_seed(source.seed, DATA_STREAM))
    return apply_noise(clean, source.noise, mix_seed(source.seed, NOISE_STREAM), mu=mu_of(source.model))


def resolve_dataset(payload: DatasetInput) -> tuple[Dataset, np.ndarray | None]:
    """The dataset a request names, plus the model mean when it was sampled."""
    if payload.source is not None:
        return dataset_from_source(payload.source), mu_of(payload.source.model)
    labels = np.asarray(payload.data.y, dtype=np.int8)
    return Dataset(x=np.asarray(payload.data.x, dtype=np.float64), y=labels, y_tilde=labels), None
