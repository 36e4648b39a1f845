"""FastAPI application exposing the analysis commands over HTTP.

Every analysis endpoint accepts the model inline (same schema as the model
file) and returns the same report structure the CLI writes, as JSON.
Domain errors map to HTTP 400 (parse/validation) or 422 (numerical) with a
machine-readable category.
"""
from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import ItmorError, NumericalError, ParseError
from ..linmodel import StateSubset, validate
from ..runner import (
    analyze_report,
    compare_report,
    crossing_report,
    hankel_report,
    reduce_report,
)
from .schemas import (
    AnalyzeRequest,
    CompareRequest,
    CrossingRequest,
    HankelRequest,
    HealthPayload,
    ReduceRequest,
    ReportPayload,
    ValidateRequest,
    ValidationPayload,
)


def _error_status(exc: ItmorError) -> int:
    if isinstance(exc, NumericalError):
        return 422
    return 400


def create_app() -> FastAPI:
    app = FastAPI(
        title="itmor",
        version=__version__,
        description="Finite-horizon comparison and reduction of linear Gaussian models",
    )

    @app.exception_handler(ItmorError)
    async def _domain_error(request: Request, exc: ItmorError):
        category = (
            "parse" if isinstance(exc, ParseError)
            else "numerical" if isinstance(exc, NumericalError)
            else "validation"
        )
        return JSONResponse(
            status_code=_error_status(exc),
            content={"error": category, "type": type(exc).__name__, "message": str(exc)},
        )

    @app.get("/health", response_model=HealthPayload)
    def health() -> HealthPayload:
        return HealthPayload(status="ok", version=__version__)

    @app.post("/validate", response_model=ValidationPayload)
    def validate_model(req: ValidateRequest) -> ValidationPayload:
        report = validate(req.model.to_model())
        return ValidationPayload(
            spectral_radius=report.spectral_radius,
            is_schur_stable=report.is_schur_stable,
            observable=report.observable,
            controllable=report.controllable,
            messages=list(report.messages),
        )

    @app.post("/analyze", response_model=ReportPayload)
    def analyze(req: AnalyzeRequest) -> ReportPayload:
        report = analyze_report(
            req.model.to_model(),
            StateSubset.of(*req.frozen),
            req.horizon,
            mode=req.mode,
            innovation=req.innovation,
            frozen_value=req.frozen_value,
        )
        return ReportPayload.from_report(report)

    @app.post("/hankel", response_model=ReportPayload)
    def hankel(req: HankelRequest) -> ReportPayload:
        return ReportPayload.from_report(hankel_report(req.model.to_model()))

    @app.post("/reduce", response_model=ReportPayload)
    def reduce(req: ReduceRequest) -> ReportPayload:
        report = reduce_report(
            req.model.to_model(), req.order, req.horizon,
            mode=req.mode, innovation=req.innovation, jobs=req.jobs,
            grid=req.grid, tol=req.tol,
        )
        return ReportPayload.from_report(report)

    @app.post("/crossing", response_model=ReportPayload)
    def crossing(req: CrossingRequest) -> ReportPayload:
        report = crossing_report(req.model.to_model(), req.horizon, indexing=req.indexing)
        return ReportPayload.from_report(report)

    @app.post("/compare", response_model=ReportPayload)
    def compare(req: CompareRequest) -> ReportPayload:
        report = compare_report(
            req.model.to_model(), req.order, req.horizon,
            mode=req.mode, innovation=req.innovation, jobs=req.jobs, tol=req.tol,
        )
        return ReportPayload.from_report(report)

    return app


app = create_app()
