"""FastAPI application wrapping the mesh-grading library.

Endpoints are stateless and deterministic: artifacts (mesh files, CSVs, VTK)
are returned inline as text so clients decide where to store them.  Compute
runs synchronously in the worker threadpool; jobs are single-experiment and
bounded by the configured sweep sizes.
"""

from __future__ import annotations

import logging
import math

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..exceptions import KelloggError, NvbMeshError
from ..runner import run_converge, run_export, run_grade, run_kellogg, run_verify
from . import schemas

logger = logging.getLogger("nvbmesh.service")


def _json_safe(obj):
    """Replace non-finite floats so responses stay valid JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def create_app() -> FastAPI:
    app = FastAPI(
        title="nvbmesh service",
        description=(
            "Graded triangulations by newest-vertex bisection around point "
            "singularities: mesh construction, interface-solution parameters, "
            "convergence sweeps and mesh export."
        ),
        version=__version__,
    )

    @app.exception_handler(NvbMeshError)
    async def _domain_error(request, exc: NvbMeshError):
        payload = {"detail": str(exc)}
        if isinstance(exc, KelloggError):
            payload["residual_trace"] = exc.trace
        return JSONResponse(status_code=400, content=payload)

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/kellogg", response_model=schemas.KelloggResponse)
    def kellogg(req: schemas.KelloggRequest):
        out = run_kellogg(req.gamma)
        return schemas.KelloggResponse(**vars(out))

    @app.post("/grade", response_model=schemas.GradeResponse)
    def grade(req: schemas.GradeRequest):
        logger.info("grade: domain=%s delta=%s p=%s", req.config.domain, req.config.delta, req.config.p)
        out = run_grade(req.config)
        return schemas.GradeResponse(
            passed=out.passed,
            stats=_json_safe(out.stats),
            verifiers=_json_safe(out.verifiers),
            artifacts=out.artifacts,
        )

    @app.post("/converge", response_model=schemas.ConvergeResponse)
    def converge(req: schemas.ConvergeRequest):
        logger.info(
            "converge: domain=%s mode=%s p=%s deltas=%s",
            req.config.domain, req.config.mode, req.config.p, req.config.deltas,
        )
        out = run_converge(req.config)
        rows = [
            schemas.ConvergeRow(**{**r, "slope_running": _nan_to(r["slope_running"])})
            for r in out.rows
        ]
        return schemas.ConvergeResponse(
            passed=out.passed,
            slope=_nan_to(out.slope),
            threshold=out.threshold,
            rows=rows,
            diagnostics=_json_safe(out.diagnostics),
            artifacts=out.artifacts,
        )

    @app.post("/verify", response_model=schemas.VerifyResponse)
    def verify(req: schemas.VerifyRequest):
        out = run_verify(req.mesh_text, req.config, req.ledger_csv)
        return schemas.VerifyResponse(passed=out.passed, reports=_json_safe(out.reports))

    @app.post("/export", response_model=schemas.ExportResponse)
    def export(req: schemas.ExportRequest):
        content = run_export(req.mesh_text, req.format)
        return schemas.ExportResponse(format=req.format, content=content)

    return app


def _nan_to(x: float):
    # nan is not valid JSON; the CSV artifacts keep the literal 'nan' instead
    return None if (x != x) else x


app = create_app()
