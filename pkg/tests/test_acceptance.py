"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the summary lines.
The heavy sweeps are shared module-scoped fixtures; their wall time is part
of what the criteria assert.
"""

import math
import time

import numpy as np
import pytest

from nvbmesh import (
    GradingParams,
    convergence_sweep,
    grade_mesh,
    h1_error,
    h1_seminorm,
    initial_mesh,
    kellogg_mu,
    kellogg_solve,
    preset_poisson_corner,
    sector_fan_mesh,
    uniform_sweep,
    verify_size_lemma,
)
from nvbmesh.config import U0_PRESETS
from nvbmesh.mesh import triangle_min_angles
from nvbmesh.singular import Cutoff, SingularTerm, SinAngular

from conftest import OMEGA_L, sector_points
from test_analysis import SIN_COS, brute_force_element_errors, refined_square

DELTAS = [0.4, 0.2, 0.1, 0.05, 0.025, 0.0125]
GAMMA = 1.0 / 3.0  # unified grading exponent: half the corner exponent 2/3
CORNER = preset_poisson_corner(OMEGA_L)
U0 = U0_PRESETS["sin_cos"]


def criterion(num: int, ok: bool, text: str):
    print(f"\nACCEPTANCE {num} {'PASS' if ok else 'FAIL'} - {text}")
    assert ok, f"criterion {num}: {text}"


@pytest.fixture(scope="module")
def p1_sweep():
    t0 = time.perf_counter()
    res = convergence_sweep("l_shape", [CORNER], U0, 1, DELTAS, gamma=GAMMA)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="module")
def p2_sweep():
    t0 = time.perf_counter()
    res = convergence_sweep("l_shape", [CORNER], U0, 2, DELTAS, gamma=GAMMA)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="module")
def uniform_baseline():
    return uniform_sweep("l_shape", [CORNER], U0, 1, 13)


def test_criterion_1_optimal_decay_p1(p1_sweep):
    res, wall = p1_sweep
    ok = res.slope <= -0.45 and wall < 60.0
    criterion(
        1, ok,
        f"optimal decay p=1: slope {res.slope:.4f} <= -0.45 "
        f"(target -1/2), runtime {wall:.1f}s < 60s",
    )


def test_criterion_2_optimal_decay_p2(p2_sweep):
    res, wall = p2_sweep
    ok = res.slope <= -0.90 and wall < 300.0
    criterion(
        2, ok,
        f"optimal decay p=2: slope {res.slope:.4f} <= -0.90 "
        f"(target -1), runtime {wall:.1f}s < 300s",
    )


def test_criterion_3_uniform_baseline_worse(p1_sweep, uniform_baseline):
    graded, _ = p1_sweep
    uni = uniform_baseline
    ok = uni.slope >= -0.40 and uni.slope > graded.slope
    criterion(
        3, ok,
        f"uniform baseline: slope {uni.slope:.4f} >= -0.40 (theory ~ -1/3) and "
        f"worse than graded {graded.slope:.4f}",
    )


def test_criterion_4_kellogg_reference_values():
    t0 = time.perf_counter()
    sol = kellogg_solve(0.1)
    wall = time.perf_counter() - t0
    seams = []
    for seam in (0.5 * math.pi, math.pi, 1.5 * math.pi):
        seams.append(abs(float(kellogg_mu(seam - 1e-12, sol)) - float(kellogg_mu(seam + 1e-12, sol))))
    seams.append(abs(float(kellogg_mu(0.0, sol)) - float(kellogg_mu(2 * math.pi - 1e-12, sol))))
    ok = (
        abs(sol.ratio - 161.4476) < 1e-3
        and abs(sol.sigma - (-14.92256)) < 1e-4
        and sol.residual < 1e-10
        and max(seams) < 1e-9
        and wall < 1.0
    )
    criterion(
        4, ok,
        f"kellogg gamma=0.1: R={sol.ratio:.4f} (ref 161.4476), sigma={sol.sigma:.5f} "
        f"(ref -14.92256), residual={sol.residual:.2e} < 1e-10, "
        f"mu seam gaps <= {max(seams):.2e} < 1e-9, runtime {wall * 1e3:.0f}ms < 1s",
    )


def test_criterion_5_size_lemma_with_negative_control(p1_sweep, p2_sweep):
    res1, _ = p1_sweep
    res2, _ = p2_sweep
    clean = all(rep.ok for rep in res1.size_reports + res2.size_reports)
    mesh = initial_mesh("l_shape")
    params = GradingParams(delta=0.2, p=1, gamma=GAMMA, singular_points=((0.0, 0.0),))
    grade_mesh(mesh, params)
    mutated = verify_size_lemma(mesh, params, exponent_factor=1.1)
    ok = clean and len(mutated.violations) >= 1
    criterion(
        5, ok,
        f"size bounds: 0 violations across {len(res1.size_reports) + len(res2.size_reports)} "
        f"graded meshes; 10% exponent tightening yields {len(mutated.violations)} violations",
    )


def test_criterion_6_complexity_boundedness(p1_sweep):
    res, _ = p1_sweep
    growth = [rep.scaled_growth for rep in res.marked_reports]
    bdd = [rep.ratio for rep in res.bdd_reports]
    growth_span = max(growth) / min(growth)
    bdd_span = max(bdd) / min(bdd)
    ok = growth_span < 4.0 and bdd_span < 3.0
    criterion(
        6, ok,
        f"complexity: (#T - #T0) * delta^2 in [{min(growth):.2f}, {max(growth):.2f}] "
        f"(span {growth_span:.2f}x < 4x); completion ratio in "
        f"[{min(bdd):.3f}, {max(bdd):.3f}] (span {bdd_span:.2f}x < 3x)",
    )


def test_criterion_7_mesh_kernel_properties():
    presets = ("square", "l_shape", "slit")
    floors = {}
    for name in presets:
        probe = initial_mesh(name)
        for _ in range(2):
            probe.refine(probe.leaf_ids().tolist())
            probe.complete()
        A, B, C = probe.corner_coords(np.arange(probe.num_triangles))
        floors[name] = float(np.min(triangle_min_angles(A, B, C)))

    rng = np.random.default_rng(20240817)
    rounds_done = 0
    bisections = 0
    meshes = {name: initial_mesh(name) for name in presets}
    initial_areas = {name: meshes[name].domain_area() for name in presets}
    for i in range(10_000):
        name = presets[i % 3]
        mesh = meshes[name]
        if mesh.num_leaves > 1200:
            mesh = meshes[name] = initial_mesh(name)
        leaves = mesh.leaf_ids()
        k = min(int(rng.integers(1, 4)), len(leaves))
        marks = np.unique(rng.choice(leaves, size=k, replace=False))
        before = mesh.num_leaves
        count = mesh.refine(marks.tolist())
        assert mesh.num_leaves - before == count == len(marks)  # exact integers
        bisections += count + mesh.complete()
        assert mesh.is_conforming()
        area = mesh.domain_area()
        assert abs(area - initial_areas[name]) <= 1e-12 * initial_areas[name]
        assert mesh.min_angle() >= floors[name] - 1e-12
        rounds_done += 1
    ok = rounds_done == 10_000
    criterion(
        7, ok,
        f"mesh kernel: {rounds_done} randomized refine/complete rounds "
        f"({bisections} bisections) kept exact cardinality, area to 1e-12, "
        f"conformity, and min angle >= generation-0..2 floor",
    )


def test_criterion_8_quadrature_oracle():
    mesh = refined_square(3)
    rep = h1_error(mesh, 1, SIN_COS)
    ids, oracle = brute_force_element_errors(mesh, 1, SIN_COS)
    rel = float(np.max(np.abs(rep.per_element_sq - oracle) / oracle))

    fan = sector_fan_mesh(OMEGA_L, 1.0, 2048)
    got = h1_seminorm(fan, CORNER) ** 2
    want = math.pi / 2.0
    sector_rel = abs(got - want) / want
    ok = rel < 1e-6 and sector_rel < 1e-6
    criterion(
        8, ok,
        f"quadrature: smooth per-element errors match 64-subdivision oracle to "
        f"{rel:.2e} < 1e-6; sector seminorm {got:.9f} vs pi/2 "
        f"(gamma*omega*R^(2 gamma)/2), rel {sector_rel:.2e} < 1e-6",
    )


def test_criterion_9_gradient_checks():
    rng = np.random.default_rng(99)
    worst = 0.0
    cutoffs = (Cutoff(), Cutoff(kind="smooth", r1=0.3, r2=0.8, order=2))
    for k in (0, 1):
        for cutoff in cutoffs:
            term = SingularTerm(c=1.1, k=k, gamma=2.0 / 3.0, center=(0.0, 0.0),
                                angular=SinAngular(OMEGA_L), cutoff=cutoff)
            x, y = sector_points(rng, 100, rmin=1.5e-2)
            gx, gy = term.grad(x, y)
            h = 1e-6
            fx = (term.value(x + h, y) - term.value(x - h, y)) / (2 * h)
            fy = (term.value(x, y + h) - term.value(x, y - h)) / (2 * h)
            scale = np.maximum(np.hypot(gx, gy), 1e-12)
            worst = max(worst, float(np.max(np.hypot(gx - fx, gy - fy) / scale)))
    ok = worst < 1e-6
    criterion(
        9, ok,
        f"gradients: central finite differences agree to {worst:.2e} < 1e-6 "
        f"for k in (0, 1) and both cutoff kinds at 100 points each (r > 1e-2)",
    )
