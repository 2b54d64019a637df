"""Experiment configuration: a single JSON document drives every command.

The config is validated against the library preconditions before any run:
the domain must exist, singular centers must be vertices of the initial
triangulation, delta must admit the dyadic bracket K >= 0, cutoffs must be
smooth enough for the requested degree, and gradient-jump directions of the
angular profiles should line up with initial-mesh edges (warned otherwise).
"""

from __future__ import annotations

import json
import math
import os
import warnings
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator

from .exceptions import ConfigError
from .grading import GradingParams, compute_K
from .kellogg import kellogg_solve, kellogg_term
from .mesh import Mesh, initial_mesh
from .singular import (
    Cutoff,
    FunctionPart,
    PiecewiseCosAngular,
    SingularTerm,
    SinAngular,
    check_jump_alignment,
)

__all__ = [
    "AngularConfig",
    "CutoffConfig",
    "TermConfig",
    "QuadratureConfig",
    "VerifierConfig",
    "ExperimentConfig",
    "load_config",
    "config_from_dict",
    "build_mesh",
    "build_terms",
    "build_u0",
    "build_params",
    "U0_PRESETS",
]


class CutoffConfig(BaseModel):
    kind: Literal["one", "smooth"] = "one"
    r1: float = 0.0
    r2: float = 0.0
    order: int | None = None  # default p + 1, the smallest admissible


class AngularConfig(BaseModel):
    kind: Literal["sin", "kellogg", "piecewise"]
    omega: float | None = None  # sin: corner opening angle
    gamma: float | None = None  # kellogg: exponent in (0, 2)
    breakpoints: list[float] | None = None  # piecewise
    pieces: list[list[tuple[float, float, float]]] | None = None  # cos terms (a, w, phi)


class TermConfig(BaseModel):
    center: tuple[float, float]
    c: float = 1.0
    k: int = Field(default=0, ge=0)
    gamma: float | None = None  # derived for sin (pi/omega) and kellogg angulars
    angular: AngularConfig
    cutoff: CutoffConfig = CutoffConfig()
    reference_direction: tuple[float, float] = (1.0, 0.0)


class QuadratureConfig(BaseModel):
    degree: int | None = None  # default max(2p, 6)
    singular_rel_tol: float = 1e-8
    singular_max_levels: int = 40


class VerifierConfig(BaseModel):
    size_lemma: bool = True
    first_loop: bool = True
    marked_bound: bool = True
    bdd: bool = True


class ExperimentConfig(BaseModel):
    domain: str = "l_shape"  # preset name, or "custom" with mesh_path
    mesh_path: str | None = None
    terms: list[TermConfig] = []
    u0: str = "zero"
    p: int = Field(default=1, ge=1)
    delta: float | None = None  # grade/verify
    deltas: list[float] | None = None  # converge
    gamma: float | None = None  # override; default derived from the terms
    gamma_rule: Literal["half_min", "min"] = "half_min"
    mode: Literal["graded", "uniform"] = "graded"
    uniform_rounds: int = 10
    slope_threshold: float | None = None  # default -0.9 * p / 2
    output_dir: str = "out"
    quadrature: QuadratureConfig = QuadratureConfig()
    verifiers: VerifierConfig = VerifierConfig()

    @field_validator("deltas")
    @classmethod
    def _deltas_decreasing(cls, v):
        if v is not None:
            if any(b >= a for a, b in zip(v, v[1:])):
                raise ValueError("deltas must be strictly decreasing")
        return v

    def effective_slope_threshold(self) -> float:
        if self.slope_threshold is not None:
            return self.slope_threshold
        return -0.9 * self.p / 2.0


def config_from_dict(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    if not os.path.exists(path):
        raise ConfigError(f"no such config file: {path}")
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def build_mesh(cfg: ExperimentConfig) -> Mesh:
    if cfg.domain == "custom":
        if not cfg.mesh_path:
            raise ConfigError("domain 'custom' requires mesh_path")
        from .formats import read_mesh

        return read_mesh(cfg.mesh_path)
    try:
        return initial_mesh(cfg.domain)
    except Exception as exc:
        raise ConfigError(str(exc)) from exc


def _snap_center(mesh: Mesh, center) -> tuple[float, float]:
    """Require the center to be an initial-mesh vertex; return its exact coordinates."""
    vx = mesh.vertex_coords()
    d = np.hypot(vx[:, 0] - center[0], vx[:, 1] - center[1])
    vid = int(np.argmin(d))
    if d[vid] > 1e-12:
        raise ConfigError(
            f"singular center {tuple(center)} must be a vertex of the initial mesh"
        )
    return (float(vx[vid, 0]), float(vx[vid, 1]))


def _build_term(tc: TermConfig, mesh: Mesh, p: int) -> SingularTerm:
    ang = tc.angular
    if ang.kind == "sin":
        if ang.omega is None:
            raise ConfigError("sin angular profile needs omega")
        angular = SinAngular(ang.omega)
        gamma = tc.gamma if tc.gamma is not None else math.pi / ang.omega
    elif ang.kind == "kellogg":
        if ang.gamma is None:
            raise ConfigError("kellogg angular profile needs gamma")
        sol = kellogg_solve(ang.gamma)
        angular = kellogg_term(sol).angular
        gamma = tc.gamma if tc.gamma is not None else ang.gamma
    else:
        if not ang.breakpoints or not ang.pieces:
            raise ConfigError("piecewise angular profile needs breakpoints and pieces")
        angular = PiecewiseCosAngular(ang.breakpoints, ang.pieces)
        if tc.gamma is None:
            raise ConfigError("piecewise angular profile needs an explicit term gamma")
        gamma = tc.gamma
    cut = tc.cutoff
    if cut.kind == "one":
        cutoff = Cutoff()
    else:
        order = cut.order if cut.order is not None else p + 1
        if order < p + 1:
            raise ConfigError(
                f"cutoff must keep at least p+1={p + 1} continuous derivatives, got order {order}"
            )
        cutoff = Cutoff(kind="smooth", r1=cut.r1, r2=cut.r2, order=order)
    center = _snap_center(mesh, tc.center)
    return SingularTerm(
        c=tc.c,
        k=tc.k,
        gamma=gamma,
        center=center,
        angular=angular,
        cutoff=cutoff,
        reference_direction=tc.reference_direction,
    )


def build_terms(cfg: ExperimentConfig, mesh: Mesh) -> list[SingularTerm]:
    terms = [_build_term(tc, mesh, cfg.p) for tc in cfg.terms]
    for term in terms:
        offending = check_jump_alignment(mesh, term)
        if offending:
            degs = ", ".join(f"{math.degrees(a):.3f}" for a in offending)
            warnings.warn(
                f"gradient jumps of the term at {term.center} are not aligned with "
                f"initial-mesh edges (ray angles {degs} deg)",
                stacklevel=2,
            )
    return terms


U0_PRESETS: dict[str, FunctionPart | None] = {
    "zero": None,
    "sin_cos": FunctionPart(
        "sin_cos",
        lambda x, y: np.sin(x) * np.cos(y),
        lambda x, y: (np.cos(x) * np.cos(y), -np.sin(x) * np.sin(y)),
    ),
    "sin_pi": FunctionPart(
        "sin_pi",
        lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y),
        lambda x, y: (
            np.pi * np.cos(np.pi * x) * np.sin(np.pi * y),
            np.pi * np.sin(np.pi * x) * np.cos(np.pi * y),
        ),
    ),
    "plane": FunctionPart(
        "plane",
        lambda x, y: 1.0 + 2.0 * x + 3.0 * y,
        lambda x, y: (np.full_like(x, 2.0), np.full_like(y, 3.0)),
    ),
    "quadratic": FunctionPart(
        "quadratic",
        lambda x, y: x * x + x * y + y * y,
        lambda x, y: (2.0 * x + y, x + 2.0 * y),
    ),
}


def build_u0(cfg: ExperimentConfig) -> FunctionPart | None:
    try:
        return U0_PRESETS[cfg.u0]
    except KeyError:
        raise ConfigError(
            f"unknown u0 preset {cfg.u0!r}; expected one of {sorted(U0_PRESETS)}"
        ) from None


def build_params(cfg: ExperimentConfig, terms, delta: float) -> GradingParams:
    if cfg.gamma is not None:
        compute_K(delta, cfg.gamma, cfg.p)  # early validation of the bracket
        centers = []
        for t in terms:
            if t.center not in centers:
                centers.append(t.center)
        return GradingParams(
            delta=delta, p=cfg.p, gamma=cfg.gamma, singular_points=tuple(centers)
        )
    return GradingParams.from_terms(
        terms, delta=delta, p=cfg.p, sharp=(cfg.gamma_rule == "min")
    )
