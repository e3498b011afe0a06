from __future__ import annotations

import logging
from collections.abc import Mapping

from fastapi import HTTPException, status

from app.services.gdflow import DivergingLoss
from app.services.solver import NotSeparable

logger = logging.getLogger(__name__)


def value_error(
    exc: ValueError,
    *,
    phrase_statuses: Mapping[str, int] | None = None,
    default_status: int = status.HTTP_422_UNPROCESSABLE_ENTITY,
) -> HTTPException:
    raw_detail = str(exc)
    lowered = raw_detail.lower()
    if phrase_statuses:
        # First matching phrase wins.
        for phrase, code in phrase_statuses.items():
            if phrase in lowered:
                return HTTPException(status_code=code, detail=raw_detail)
    return HTTPException(status_code=default_status, detail=raw_detail)


def not_separable_error(exc: NotSeparable) -> HTTPException:
    return HTTPException(status_code=status.HTTP_409_CONFLICT, detail=f"Sample is not separable: {exc}")


def diverging_loss_error(exc: DivergingLoss) -> HTTPException:
    logger.error("gradient descent diverged detail=%s", exc)
    return HTTPException(status_code=status.HTTP_500_INTERNAL_SERVER_ERROR, detail=str(exc))


def domain_error(exc: Exception) -> HTTPException:
    if isinstance(exc, NotSeparable):
        return not_separable_error(exc)
    if isinstance(exc, DivergingLoss):
        return diverging_loss_error(exc)
    if isinstance(exc, ValueError):
        return value_error(exc)
    raise exc
