"""Pydantic request/response models for the service endpoints."""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..config import ExperimentConfig


class HealthResponse(BaseModel):
    status: str
    version: str


class KelloggRequest(BaseModel):
    gamma: float = Field(gt=0.0, lt=2.0)


class KelloggResponse(BaseModel):
    gamma: float
    ratio: float
    rho: float
    sigma: float
    residual: float
    iterations: int
    inequalities_ok: bool
    mu_seam_gaps: list[float]
    term_config: dict


class GradeRequest(BaseModel):
    config: ExperimentConfig


class GradeResponse(BaseModel):
    passed: bool
    stats: dict
    verifiers: dict
    artifacts: dict[str, str]


class ConvergeRequest(BaseModel):
    config: ExperimentConfig


class ConvergeRow(BaseModel):
    delta: float
    cardinality: int
    error_total: float
    error_regular: float
    error_singular: float
    slope_running: float | None = None  # None until enough rows for a fit


class ConvergeResponse(BaseModel):
    passed: bool
    slope: float | None
    threshold: float
    rows: list[ConvergeRow]
    diagnostics: dict
    artifacts: dict[str, str]


class VerifyRequest(BaseModel):
    mesh_text: str
    config: ExperimentConfig
    ledger_csv: str | None = None


class VerifyResponse(BaseModel):
    passed: bool
    reports: dict


class ExportRequest(BaseModel):
    mesh_text: str
    format: str = "vtk"


class ExportResponse(BaseModel):
    format: str
    content: str
