import logging
import traceback

from fastapi import FastAPI, Request
from fastapi.responses import PlainTextResponse

from app.api.routes.bounds import router as bounds_router
from app.api.routes.classifiers import router as classifiers_router
from app.api.routes.datasets import router as datasets_router
from app.api.routes.health import router as health_router
from app.api.routes.sweeps import router as sweeps_router
from app.api.routes.training import router as training_router
from app.core.config import settings
from app.middleware.body_limit import BodyLimitMiddleware

logger = logging.getLogger(__name__)


app = FastAPI(
    title="Max-Margin Lab API",
    version="0.1.0",
    docs_url="/docs" if settings.is_local_env() else None,
    redoc_url="/redoc" if settings.is_local_env() else None,
    openapi_url="/openapi.json" if settings.is_local_env() else None,
)


@app.exception_handler(Exception)
async def debug_exception_handler(request: Request, exc: Exception):
    if settings.env in {"local", "test"}:
        return PlainTextResponse(
            "".join(traceback.format_exception(type(exc), exc, exc.__traceback__)),
            status_code=500,
        )
    logger.exception(
        "Unhandled exception for %s %s",
        request.method,
        request.url.path,
    )
    return PlainTextResponse("Internal Server Error", status_code=500)


app.add_middleware(
    BodyLimitMiddleware,
    max_bytes=settings.max_request_bytes,
    route_bytes={
        "/datasets/sample": settings.spec_request_cap(),
        "/sweeps": settings.spec_request_cap(),
    },
)

app.include_router(health_router)
app.include_router(datasets_router)
app.include_router(classifiers_router)
app.include_router(training_router)
app.include_router(bounds_router)
app.include_router(sweeps_router)
