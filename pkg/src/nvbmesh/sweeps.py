"""Convergence experiments: graded delta sweeps and uniform-refinement baselines.

Each sweep row records the mesh growth #T - #T_0 and the H1-seminorm
interpolation errors of the full target, its regular part, and its singular
part.  The decay rate is the least-squares slope of log(error_total) against
log(#T - #T_0); the two coarsest rows are excluded from the fit as
pre-asymptotic (documented in the CSV through the running-slope column).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import ErrorReport, equidistribution_stats, h1_error
from .exceptions import GradingError
from .grading import (
    BddReport,
    ComplexityLedger,
    GradingParams,
    MarkedBoundReport,
    SizeLemmaReport,
    bdd_ledger_check,
    grade_mesh,
    verify_marked_bound,
    verify_size_lemma,
)
from .mesh import Mesh, initial_mesh
from .quadrature import TriangleRule
from .singular import SumFunction

__all__ = ["SweepRow", "SweepResult", "convergence_sweep", "uniform_sweep", "fit_slope"]

SLOPE_SKIP = 2  # coarsest rows excluded from the fitted slope


@dataclass
class SweepRow:
    delta: float
    cardinality: int  # #T - #T_0
    error_total: float
    error_regular: float
    error_singular: float
    slope_running: float  # nan until enough rows


@dataclass
class SweepResult:
    rows: list[SweepRow]
    slope: float
    mode: str  # "graded" | "uniform"
    ledgers: list[ComplexityLedger] = field(default_factory=list)
    size_reports: list[SizeLemmaReport] = field(default_factory=list)
    marked_reports: list[MarkedBoundReport] = field(default_factory=list)
    bdd_reports: list[BddReport] = field(default_factory=list)
    reports: list[ErrorReport] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["delta,cardinality,error_total,error_regular,error_singular,slope_running"]
        for r in self.rows:
            slope = "nan" if math.isnan(r.slope_running) else f"{r.slope_running:.17g}"
            lines.append(
                f"{r.delta:.17g},{r.cardinality},{r.error_total:.17g},"
                f"{r.error_regular:.17g},{r.error_singular:.17g},{slope}"
            )
        return "\n".join(lines) + "\n"

    def ring_stats_csv(self) -> str:
        lines = ["delta,ring,count,sum,max,mean"]
        for row, rep in zip(self.rows, self.reports):
            if rep.ring_of_leaf is None:
                continue
            stats = equidistribution_stats(rep)
            for ring, count, s, mx, mean in stats.rows:
                lines.append(f"{row.delta:.17g},{ring},{count},{s:.17g},{mx:.17g},{mean:.17g}")
        return "\n".join(lines) + "\n"


def fit_slope(cardinalities, errors) -> float:
    """Least-squares slope of log(error) against log(cardinality)."""
    n = np.asarray(cardinalities, dtype=float)
    e = np.asarray(errors, dtype=float)
    if len(n) < 2:
        return math.nan
    return float(np.polyfit(np.log(n), np.log(e), 1)[0])


def _running_slopes(rows: list[SweepRow], skip: int) -> None:
    for i in range(len(rows)):
        pts = rows[skip : i + 1]
        if len(pts) >= 2:
            rows[i].slope_running = fit_slope(
                [r.cardinality for r in pts], [r.error_total for r in pts]
            )
        else:
            rows[i].slope_running = math.nan


def _build_mesh(domain) -> Mesh:
    if callable(domain):
        return domain()
    return initial_mesh(domain)


def _split_errors(mesh, p, terms, u0, rule, *, ring_center, ring_K, delta):
    total_f = SumFunction(list(terms) + ([u0] if u0 is not None else []))
    rep = h1_error(mesh, p, total_f, rule, ring_center=ring_center, ring_K=ring_K, delta=delta)
    err_reg = 0.0
    if u0 is not None:
        err_reg = h1_error(mesh, p, u0, rule).total
    err_sing = 0.0
    if terms:
        err_sing = h1_error(mesh, p, SumFunction(terms), rule).total
    return rep, err_reg, err_sing


def convergence_sweep(
    domain,
    terms,
    u0,
    p: int,
    deltas,
    *,
    gamma: float | None = None,
    sharp_gamma: bool = False,
    rule: TriangleRule | None = None,
    skip: int = SLOPE_SKIP,
) -> SweepResult:
    """Run the graded construction for each delta and measure the decay rate.

    ``deltas`` must be decreasing with at least 4 values so the fit (which
    drops the ``skip`` coarsest rows) has at least two points.  ``domain`` is
    a preset name or a callable returning a fresh initial mesh.
    """
    deltas = [float(d) for d in deltas]
    if len(deltas) < 4:
        raise GradingError("a convergence sweep needs at least 4 delta values")
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise GradingError("delta values must be strictly decreasing")
    terms = list(terms)
    rows: list[SweepRow] = []
    result = SweepResult(rows=rows, slope=math.nan, mode="graded")
    for delta in deltas:
        mesh = _build_mesh(domain)
        if gamma is not None:
            centers = []
            for t in terms:
                if t.center not in centers:
                    centers.append(t.center)
            params = GradingParams(
                delta=delta, p=p, gamma=gamma, singular_points=tuple(centers)
            )
        else:
            params = GradingParams.from_terms(terms, delta=delta, p=p, sharp=sharp_gamma)
        ledger = grade_mesh(mesh, params)
        ring_center = params.singular_points[0] if len(params.singular_points) == 1 else None
        rep, err_reg, err_sing = _split_errors(
            mesh, p, terms, u0, rule,
            ring_center=ring_center, ring_K=params.K, delta=delta,
        )
        rows.append(
            SweepRow(
                delta=delta,
                cardinality=mesh.num_leaves - ledger.initial_leaves,
                error_total=rep.total,
                error_regular=err_reg,
                error_singular=err_sing,
                slope_running=math.nan,
            )
        )
        result.ledgers.append(ledger)
        result.reports.append(rep)
        if params.K is not None:
            result.size_reports.append(verify_size_lemma(mesh, params))
            result.marked_reports.append(verify_marked_bound(ledger, params))
        result.bdd_reports.append(bdd_ledger_check(ledger))
    _running_slopes(rows, skip)
    result.slope = fit_slope(
        [r.cardinality for r in rows[skip:]], [r.error_total for r in rows[skip:]]
    )
    return result


def uniform_sweep(
    domain,
    terms,
    u0,
    p: int,
    rounds: int,
    *,
    rule: TriangleRule | None = None,
    skip: int = SLOPE_SKIP,
) -> SweepResult:
    """Baseline: bisect every leaf once per round and measure the same errors.

    Row ``i`` is recorded after round ``i + 1`` (the unrefined mesh has
    cardinality growth 0, which the log-log fit cannot use).  The ``delta``
    column carries the current max element size for reference.
    """
    if rounds < 4:
        raise GradingError("a uniform baseline needs at least 4 rounds")
    mesh = _build_mesh(domain)
    terms = list(terms)
    rows: list[SweepRow] = []
    result = SweepResult(rows=rows, slope=math.nan, mode="uniform")
    for _ in range(rounds):
        mesh.refine(mesh.leaf_ids().tolist())
        mesh.complete()
        rep, err_reg, err_sing = _split_errors(
            mesh, p, terms, u0, rule, ring_center=None, ring_K=None, delta=None
        )
        rows.append(
            SweepRow(
                delta=float(np.max(mesh.element_sizes())),
                cardinality=mesh.num_leaves - mesh.initial_leaf_count,
                error_total=rep.total,
                error_regular=err_reg,
                error_singular=err_sing,
                slope_running=math.nan,
            )
        )
        result.reports.append(rep)
    _running_slopes(rows, skip)
    result.slope = fit_slope(
        [r.cardinality for r in rows[skip:]], [r.error_total for r in rows[skip:]]
    )
    return result
