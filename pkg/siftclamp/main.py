# Copyright 2025 John Brosnihan
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Logging setup and the FastAPI application factory."""

import contextvars
import logging
import sys
import uuid
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from pythonjsonlogger.json import JsonFormatter
from starlette.middleware.base import BaseHTTPMiddleware

from siftclamp.api import health, thresholds
from siftclamp.config import get_settings

# Correlation ids: one per HTTP request, one per CLI invocation
request_id_ctx_var: contextvars.ContextVar[str] = contextvars.ContextVar(
    "request_id", default=""
)
run_id_ctx_var: contextvars.ContextVar[str] = contextvars.ContextVar("run_id", default="")


class RequestCorrelationMiddleware(BaseHTTPMiddleware):
    """Propagate X-Request-ID (or a fresh UUID) into the logging context and the response."""

    async def dispatch(self, request: Request, call_next):
        request_id = request.headers.get("X-Request-ID", str(uuid.uuid4()))
        request.state.request_id = request_id
        token = request_id_ctx_var.set(request_id)
        try:
            response = await call_next(request)
            response.headers["X-Request-ID"] = request_id
            return response
        finally:
            request_id_ctx_var.reset(token)


class CorrelatedJsonFormatter(JsonFormatter):
    """JSON formatter that stamps the service name and the active correlation ids."""

    def __init__(self, *args, service_name: str = "sift-clamp", **kwargs):
        super().__init__(*args, **kwargs)
        self.service_name = service_name

    def add_fields(self, log_record, record, message_dict):
        super().add_fields(log_record, record, message_dict)
        log_record["service"] = self.service_name
        request_id = request_id_ctx_var.get("")
        if request_id:
            log_record["request_id"] = request_id
        run_id = run_id_ctx_var.get("")
        if run_id:
            log_record["run_id"] = run_id

    def format(self, record):
        """Format a record, falling back to a safe entry when a payload cannot be encoded."""
        try:
            return super().format(record)
        except (UnicodeDecodeError, UnicodeEncodeError, TypeError, ValueError) as e:
            safe_record = {
                "service": self.service_name,
                "timestamp": self.formatTime(record, self.datefmt),
                "level": record.levelname,
                "message": f"[Encoding error: {str(e)}] {repr(record.msg)}",
                "error": str(e),
            }
            return self.serialize_log_record(safe_record)


def setup_logging(level: str | None = None, stream=None) -> None:
    """Install one JSON handler on the root logger.

    Uses LOG_LEVEL from configuration unless a level is given; calling it again
    replaces the handler instead of adding a second one.
    """
    settings = get_settings()
    level_name = (level or settings.LOG_LEVEL).upper()
    log_level = getattr(logging, level_name, logging.INFO)

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    handler = logging.StreamHandler(stream or sys.stdout)
    handler.setLevel(log_level)
    handler.setFormatter(
        CorrelatedJsonFormatter(
            fmt="%(timestamp)s %(levelname)s %(name)s %(message)s",
            datefmt="%Y-%m-%dT%H:%M:%S",
            service_name=settings.SERVICE_NAME,
        )
    )
    root_logger.addHandler(handler)
    root_logger.debug(
        "Logging configured",
        extra={"service_name": settings.SERVICE_NAME, "log_level": level_name},
    )


@asynccontextmanager
async def lifespan(app: FastAPI):
    logger = logging.getLogger(__name__)
    logger.info("Application starting up")
    yield
    logger.info("Application shutting down")


def create_app() -> FastAPI:
    """Create and configure the FastAPI application.

    Returns:
        FastAPI: Application serving /health, /thresholds and /clamp
    """
    setup_logging()

    settings = get_settings()
    logger = logging.getLogger(__name__)

    app = FastAPI(
        title="sift-clamp",
        description="A contrario clamping thresholds and descriptor clamping over HTTP",
        version="0.1.0",
        lifespan=lifespan,
        docs_url="/docs",
        redoc_url="/redoc",
        openapi_url="/openapi.json",
    )
    app.add_middleware(RequestCorrelationMiddleware)
    app.include_router(health.router)
    app.include_router(thresholds.router)

    logger.info(
        "Application created",
        extra={
            "service_name": settings.SERVICE_NAME,
            "port": settings.PORT,
            "workers": settings.WORKERS,
            "grid": settings.GRID,
        },
    )
    return app
