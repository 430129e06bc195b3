"""FastAPI application wrapping the explainer toolkit."""

from __future__ import annotations

import math

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import (
    ConfigError,
    ConlexError,
    InsufficientData,
    ModelUnavailable,
    SchemaError,
)
from . import handlers
from .schemas import (
    ExplainRequest,
    ExplainResponse,
    HealthResponse,
    StabilityCellOut,
    StabilityRequest,
    StabilityResponse,
    TopFeature,
)

_HTTP_STATUS = {
    ConfigError: 422,
    SchemaError: 400,
    InsufficientData: 400,
    ModelUnavailable: 502,
}


def _status_for(exc: ConlexError) -> int:
    for cls, status in _HTTP_STATUS.items():
        if isinstance(exc, cls):
            return status
    return 500  # numerical and other internal failures


def create_app() -> FastAPI:
    app = FastAPI(title="conlex", version=__version__)

    @app.exception_handler(ConlexError)
    async def _conlex_error(request: Request, exc: ConlexError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={
                "error": type(exc).__name__,
                "message": str(exc),
                "exit_code": exc.exit_code,
            },
        )

    @app.get("/healthz", response_model=HealthResponse)
    def healthz():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/explain", response_model=ExplainResponse)
    def explain(req: ExplainRequest):
        out = handlers.run_explain(
            data_path=req.data_path,
            label=req.label,
            index=req.index,
            method=req.method,
            balance=req.balance,
            influence=req.influence,
            keep_fraction=req.keep_fraction,
            n_prime=req.n_prime,
            k=req.k,
            lam=req.lam,
            kernel_width=req.kernel_width,
            seed=req.seed,
            blackbox_cmd=req.blackbox_cmd,
        )
        e = out["explanation"]
        names = out["dataset"].feature_names
        return ExplainResponse(
            method=e.method,
            seed=out["seed"],
            target_class=e.target_class,
            contrast_classes=e.contrast_classes,
            phi=[float(v) for v in e.phi],
            intercept=e.intercept,
            top_features=[
                TopFeature(index=j, name=names[j], score=s) for j, s in e.top_features
            ],
            diagnostics={k: _plain(v) for k, v in e.diagnostics.items()},
            document=out["document"],
            svg=out["svg"],
        )

    @app.post("/stability", response_model=StabilityResponse)
    def stability(req: StabilityRequest):
        out = handlers.run_stability(
            data_path=req.data_path,
            label=req.label,
            methods=req.methods,
            n_prime_grid=req.n_prime,
            repeats=req.repeats,
            index_count=req.index_count,
            seed=req.seed,
            jobs=req.jobs,
            blackbox_cmd=req.blackbox_cmd,
        )
        report = out["report"]
        cells = [
            StabilityCellOut(
                method=c.method,
                n_prime=c.n_prime,
                grand_mean_jaccard=None if math.isnan(c.grand_mean) else c.grand_mean,
                failures=len(c.failures),
            )
            for c in report.cells
        ]
        return StabilityResponse(
            dataset=report.dataset,
            seed=out["seed"],
            cells=cells,
            csv=out["csv"],
            document=out["document"],
            svg=out["svg"],
        )

    return app


def _plain(v):
    """JSON-safe view of diagnostics values."""
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if hasattr(v, "item"):
        return v.item()
    return v


app = create_app()
