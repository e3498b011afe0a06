from __future__ import annotations

from fastapi import APIRouter
from starlette.concurrency import run_in_threadpool

from app.api.deps import resolve_dataset
from app.api.http_errors import domain_error
from app.schemas.workbench import MaxMarginOut, MaxMarginRequest
from app.services.solver import NotSeparable, margin_stats, max_margin

router = APIRouter(prefix="/classifiers", tags=["classifiers"])


def _solve(payload: MaxMarginRequest) -> MaxMarginOut:
    data, _ = resolve_dataset(payload)
    classifier = max_margin(data, payload.solver)
    return MaxMarginOut(classifier=classifier.to_out(), margins=margin_stats(classifier, data).to_out())


@router.post("/max-margin", response_model=MaxMarginOut)
async def solve_max_margin(payload: MaxMarginRequest) -> MaxMarginOut:
    try:
        return await run_in_threadpool(_solve, payload)
    except (ValueError, NotSeparable) as exc:
        raise domain_error(exc) from exc
