from __future__ import annotations

from fastapi import APIRouter, HTTPException, status
from starlette.concurrency import run_in_threadpool

from app.api.deps import resolve_dataset
from app.api.http_errors import domain_error
from app.schemas.workbench import TrainOut, TrainRequest
from app.services.gdflow import DivergingLoss, train_gd
from app.services.solver import NotSeparable, max_margin

router = APIRouter(prefix="/training", tags=["training"])

MAX_INLINE_ITERS = 100_000


def _train(payload: TrainRequest) -> TrainOut:
    data, mu = resolve_dataset(payload)
    reference = max_margin(data) if payload.compare_to_max_margin else None
    _, trace = train_gd(data, payload.gd, reference, mu=mu)
    return TrainOut(trace=trace.to_out(), reference_norm=None if reference is None else reference.norm)


@router.post("/gd", response_model=TrainOut)
async def run_gradient_descent(payload: TrainRequest) -> TrainOut:
    if payload.gd.max_iters > MAX_INLINE_ITERS:
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail=f"max_iters is limited to {MAX_INLINE_ITERS} over HTTP",
        )
    try:
        return await run_in_threadpool(_train, payload)
    except (ValueError, NotSeparable, DivergingLoss) as exc:
        raise domain_error(exc) from exc
