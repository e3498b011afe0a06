from __future__ import annotations

from fastapi import APIRouter, HTTPException, status
from starlette.concurrency import run_in_threadpool

from app.api.deps import dataset_from_source
from app.api.http_errors import value_error
from app.schemas.workbench import DatasetSampleRequest, DatasetSummaryOut
from app.services.datagen import mu_norm_sq

router = APIRouter(prefix="/datasets", tags=["datasets"])

MAX_ROW_CELLS = 20_000


@router.post("/sample", response_model=DatasetSummaryOut)
async def sample_dataset(payload: DatasetSampleRequest) -> DatasetSummaryOut:
    if payload.include_rows and payload.n * payload.model.p > MAX_ROW_CELLS:
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail=f"include_rows is limited to n * p <= {MAX_ROW_CELLS}",
        )
    try:
        data = await run_in_threadpool(dataset_from_source, payload)
    except ValueError as exc:
        raise value_error(exc) from exc

    summary = DatasetSummaryOut(
        n=data.n,
        p=data.p,
        n_noisy=len(data.noisy_set),
        mu_norm_sq=mu_norm_sq(payload.model),
    )
    if payload.include_rows:
        summary.x = data.x.tolist()
        summary.y = data.y.tolist()
        summary.y_tilde = data.y_tilde.tolist()
    return summary
