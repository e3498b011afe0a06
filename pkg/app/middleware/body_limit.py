"""Per-route request body caps for the HTTP surface.

Routes that carry a dataset (`/classifiers/max-margin`, `/training/gd`) use the
default cap. Routes that take only a model spec or a sweep config get their own,
smaller cap.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Awaitable, Callable, Mapping
from typing import Any

logger = logging.getLogger(__name__)

Message = dict[str, Any]
Receive = Callable[[], Awaitable[Message]]
Send = Callable[[Message], Awaitable[None]]
AsgiApp = Callable[[dict[str, Any], Receive, Send], Awaitable[None]]

BODY_METHODS = frozenset({"POST", "PUT", "PATCH"})


class _BodyTooLarge(Exception):
    def __init__(self, size: int | None) -> None:
        super().__init__(size)
        self.size = size


class _ClientGone(Exception):
    pass


def _declared_length(scope: dict[str, Any]) -> int | None:
    for name, value in scope.get("headers", []):
        if name.lower() == b"content-length":
            try:
                length = int(value)
            except ValueError:
                raise _BodyTooLarge(None) from None
            if length < 0:
                raise _BodyTooLarge(None)
            return length
    return None


async def _buffer(receive: Receive, limit: int) -> bytes:
    chunks: list[bytes] = []
    total = 0
    while True:
        message = await receive()
        if message.get("type") == "http.disconnect":
            raise _ClientGone
        chunk = message.get("body", b"")
        total += len(chunk)
        if total > limit:
            raise _BodyTooLarge(total)
        chunks.append(chunk)
        if not message.get("more_body", False):
            return b"".join(chunks)


class BodyLimitMiddleware:
    """Answer 413 before a body above its route's cap reaches FastAPI.

    `route_bytes` maps exact paths to their own cap; every other write uses
    `max_bytes`. A malformed or negative Content-Length is treated as too large.
    """

    def __init__(
        self,
        app: AsgiApp,
        max_bytes: int = 256 * 1024,
        route_bytes: Mapping[str, int] | None = None,
    ) -> None:
        self.app = app
        self.max_bytes = max_bytes
        self.route_bytes = {path.rstrip("/") or "/": limit for path, limit in (route_bytes or {}).items()}

    def limit_for(self, path: str) -> int:
        return self.route_bytes.get(path.rstrip("/") or "/", self.max_bytes)

    async def __call__(self, scope: dict[str, Any], receive: Receive, send: Send) -> None:
        if scope.get("type") != "http" or str(scope.get("method", "")).upper() not in BODY_METHODS:
            await self.app(scope, receive, send)
            return

        path = scope.get("path", "")
        limit = self.limit_for(path)
        try:
            declared = _declared_length(scope)
            if declared is not None and declared > limit:
                raise _BodyTooLarge(declared)
            body = await _buffer(receive, limit)
        except _ClientGone:
            return
        except _BodyTooLarge as exc:
            logger.warning("request body rejected path=%s limit=%s size=%s", path, limit, exc.size)
            await _reject(send, limit)
            return

        replayed = False

        async def replay() -> Message:
            nonlocal replayed
            if replayed:
                return await receive()
            replayed = True
            return {"type": "http.request", "body": body, "more_body": False}

        await self.app(scope, replay, send)


async def _reject(send: Send, limit: int) -> None:
    payload = json.dumps({"detail": f"Request body exceeds {limit} bytes", "limit": limit}).encode()
    await send(
        {
            "type": "http.response.start",
            "status": 413,
            "headers": [
                (b"content-type", b"application/json"),
                (b"content-length", str(len(payload)).encode()),
                (b"cache-control", b"no-store"),
            ],
        }
    )
    await send({"type": "http.response.body", "body": payload})
