"""Files written and read by the CLI: datasets, classifiers, traces and sweep tables."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from app.schemas.harness import SweepResult
from app.schemas.solver import ClassifierOut
from app.services.datagen import Dataset
from app.services.gdflow import TrainTrace
from app.services.solver import Classifier

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = (
    "grid_id",
    "p",
    "s",
    "gamma",
    "eta",
    "n",
    "trial",
    "seed",
    "separable",
    "train_err",
    "test_err",
    "test_ci",
    "norm_w",
    "mu_dot_w",
    "margin_ratio",
    "n_noisy",
    "sup_Amax",
    "dir_gap",
    "wall_ms",
)
TRACE_COLUMNS = ("iter", "R", "A_max", "mu_dot_v", "norm_v", "direction_gap")
# Enough significant digits for any float64 to read back bit-identical.
FLOAT_FORMAT = "%.17g"


def feature_columns(p: int) -> list[str]:
    return [f"x_{j + 1}" for j in range(p)]


def manifest_path(dataset_path: Path) -> Path:
    return dataset_path.with_suffix(".json")


def write_dataset(data: Dataset, path: Path, manifest: dict[str, Any] | None = None) -> None:
    """Rows are y, y_tilde, x_1..x_p; the manifest sits next to the CSV."""
    frame = pd.DataFrame(data.x, columns=feature_columns(data.p))
    frame.insert(0, "y_tilde", data.y_tilde)
    frame.insert(0, "y", data.y)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", float_format=FLOAT_FORMAT)
    payload = {"n": data.n, "p": data.p, "n_noisy": len(data.noisy_set), **(manifest or {})}
    manifest_path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("dataset written path=%s n=%s p=%s", path, data.n, data.p)


def read_dataset(path: Path) -> Dataset:
    frame = pd.read_csv(path, float_precision="round_trip")
    expected = ["y", "y_tilde", *feature_columns(len(frame.columns) - 2)]
    if len(frame.columns) < 3 or list(frame.columns) != expected:
        raise ValueError(f"{path} is not a dataset file")
    return Dataset(
        x=frame.iloc[:, 2:].to_numpy(dtype=np.float64),
        y=frame["y"].to_numpy(),
        y_tilde=frame["y_tilde"].to_numpy(),
    )


def read_manifest(dataset_path: Path) -> dict[str, Any]:
    path = manifest_path(dataset_path)
    if not path.exists():
        return {}
    return json.loads(path.read_text(encoding="utf-8"))


def write_classifier(classifier: Classifier, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(classifier.to_out().model_dump_json(indent=2) + "\n", encoding="utf-8")


def read_classifier(path: Path) -> Classifier:
    return Classifier.from_out(ClassifierOut.model_validate_json(path.read_text(encoding="utf-8")))


def write_trace(trace: TrainTrace, path: Path, losses_path: Path | None = None) -> None:
    rows = [row.to_out().model_dump() for row in trace.rows]
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(rows, columns=list(TRACE_COLUMNS))
    frame.to_csv(path, index=False, lineterminator="\n", float_format=FLOAT_FORMAT)
    if losses_path is not None and trace.loss_snapshots is not None:
        snapshots = pd.DataFrame(
            trace.loss_snapshots, columns=[f"log_loss_{k}" for k in range(trace.loss_snapshots.shape[1])]
        )
        snapshots.insert(0, "iter", [row.iter for row in trace.rows])
        snapshots.to_csv(losses_path, index=False, lineterminator="\n", float_format=FLOAT_FORMAT)


def sweep_frame(result: SweepResult, *, include_timing: bool = True) -> pd.DataFrame:
    records = sorted(result.records, key=lambda record: (record.grid_id, record.trial))
    rows = []
    for record in records:
        row = record.model_dump()
        row["sup_Amax"] = row.pop("sup_amax")
        if not include_timing:
            row["wall_ms"] = None
        rows.append(row)
    return pd.DataFrame(rows, columns=list(SWEEP_COLUMNS))


def emit_csv(result: SweepResult, path: Path, *, include_timing: bool = True) -> None:
    if not result.records:
        raise ValueError("sweep result has no records")
    frame = sweep_frame(result, include_timing=include_timing)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", float_format=FLOAT_FORMAT)
    logger.info("sweep csv written path=%s rows=%s", path, len(frame))


def read_sweep_csv(path: Path) -> pd.DataFrame:
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = [column for column in SWEEP_COLUMNS if column not in frame.columns]
    if missing:
        raise ValueError(f"{path} is missing columns: {', '.join(missing)}")
    return frame
