from __future__ import annotations

from fastapi import APIRouter, Query

from app.schemas.diagnostics import BayesReference
from app.schemas.workbench import BoundOut
from app.services.diagnostics import bayes_reference, corollary_bound, theorem_bound

router = APIRouter(prefix="/bounds", tags=["bounds"])


@router.get("/theorem", response_model=BoundOut)
async def get_theorem_bound(
    mu_norm_sq: float = Query(ge=0.0),
    p: float = Query(gt=0.0),
    eta: float = Query(default=0.0, ge=0.0, lt=0.5),
    c: float = Query(default=1.0, gt=0.0),
) -> BoundOut:
    return BoundOut(kind="theorem", value=theorem_bound(mu_norm_sq, p, eta, c))


@router.get("/corollary", response_model=BoundOut)
async def get_corollary_bound(
    gamma: float = Query(ge=0.0, lt=0.5),
    s: float = Query(ge=0.0),
    p: float = Query(gt=0.0),
    eta: float = Query(default=0.0, ge=0.0, lt=0.5),
    c: float = Query(default=1.0, gt=0.0),
) -> BoundOut:
    return BoundOut(kind="corollary", value=corollary_bound(gamma, s, p, eta, c))


@router.get("/bayes", response_model=BayesReference)
async def get_bayes_reference(
    mu_norm: float = Query(ge=0.0),
    eta: float = Query(default=0.0, ge=0.0, lt=0.5),
    c: float = Query(default=1.0, gt=0.0),
) -> BayesReference:
    return bayes_reference(mu_norm, eta, c)
