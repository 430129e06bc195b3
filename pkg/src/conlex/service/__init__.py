from . import handlers
from .app import app, create_app
from .schemas import (
    ExplainRequest,
    ExplainResponse,
    HealthResponse,
    StabilityRequest,
    StabilityResponse,
)

__all__ = [
    "app",
    "create_app",
    "handlers",
    "ExplainRequest",
    "ExplainResponse",
    "HealthResponse",
    "StabilityRequest",
    "StabilityResponse",
]
