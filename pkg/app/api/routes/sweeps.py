from __future__ import annotations

import logging

from fastapi import APIRouter, HTTPException, Query, status
from starlette.concurrency import run_in_threadpool

from app.api.http_errors import value_error
from app.core.config import settings
from app.schemas.harness import SweepConfig, SweepResult
from app.services.harness import run_sweep
from app.services.presets import preset

router = APIRouter(prefix="/sweeps", tags=["sweeps"])
logger = logging.getLogger(__name__)


@router.get("/presets/{name}", response_model=SweepConfig)
async def get_preset(name: str, trials: int | None = Query(default=None, ge=1)) -> SweepConfig:
    try:
        return preset(name, trials)
    except ValueError as exc:
        raise value_error(exc, phrase_statuses={"unknown preset": status.HTTP_404_NOT_FOUND}) from exc


@router.post("", response_model=SweepResult)
async def run_inline_sweep(cfg: SweepConfig) -> SweepResult:
    tasks = cfg.task_count()
    if tasks > settings.api_max_tasks:
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail=f"Sweep has {tasks} trials; the HTTP limit is {settings.api_max_tasks}",
        )
    logger.info("inline sweep name=%s tasks=%s", cfg.name, tasks)
    return await run_in_threadpool(run_sweep, cfg, threads=1)
