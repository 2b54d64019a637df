import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from nvbmesh import (
    ComplexityLedger,
    GradingError,
    GradingParams,
    bdd_ledger_check,
    compute_K,
    element_distance,
    first_loop,
    grade_mesh,
    initial_mesh,
    second_loop,
    verify_first_loop,
    verify_marked_bound,
    verify_size_lemma,
)
from nvbmesh.grading import leaf_distances, mark_threshold, ring_radius


def bracket_holds(K, delta, gamma, p, d, slack=1e-12):
    # the 1e-12 boundary slack mirrors the floating-point contract of compute_K
    # (exponents like 1/6 are not float-exact, so the verbatim bracket can
    # miss by one ulp exactly at dyadic boundaries)
    a = (2 * gamma + d - 2) / (2 * p + d)
    left = 2.0 ** (-(K + 1) * a) <= delta * (1 + slack)
    right = delta * (1 - slack) < 2.0 ** (-K * a)
    return left and right


def brute_force_K(delta, gamma, p, d, kmax=200):
    # smallest fitting K: at an exact boundary the slack admits two candidates
    # and equality belongs to the left inequality
    hits = [K for K in range(kmax) if bracket_holds(K, delta, gamma, p, d)]
    assert hits, "no K fits the bracket"
    assert hits == list(range(hits[0], hits[-1] + 1)) and len(hits) <= 2
    return hits[0]


# -- compute_K ---------------------------------------------------------------


def exact_bracket_holds(K, delta, a_frac):
    # arbitrary-precision evaluation of 2**(-(K+1)*a) <= delta < 2**(-K*a)
    with mpmath.workdps(60):
        d = mpmath.mpf(delta)
        a = mpmath.mpf(a_frac.numerator) / a_frac.denominator
        return mpmath.power(2, -(K + 1) * a) <= d and d < mpmath.power(2, -K * a)


def test_compute_K_reference_case():
    # exponent (2*gamma + d - 2)/(2p + d) = 1/6; scan K = 4, 5, 6 exactly
    a = Fraction(1, 6)
    assert not exact_bracket_holds(4, 0.5, a)
    assert exact_bracket_holds(5, 0.5, a)  # left inequality holds with equality
    assert not exact_bracket_holds(6, 0.5, a)
    assert compute_K(0.5, 1 / 3, 1, 2) == 5


def test_compute_K_boundary_equality_belongs_left():
    delta = 2.0 ** (-1.0 / 6.0)  # hits the left inequality with K + 1 = 1
    assert compute_K(delta, 1 / 3, 1, 2) == 0


def test_compute_K_matches_brute_scan():
    assert compute_K(0.9, 0.05, 1, 2) == brute_force_K(0.9, 0.05, 1, 2)
    rng = np.random.default_rng(11)
    for _ in range(200):
        delta = float(rng.uniform(0.01, 0.99))
        gamma = float(rng.uniform(0.02, 2.0))
        p = int(rng.integers(1, 4))
        d = int(rng.choice([2, 3]))
        K = compute_K(delta, gamma, p, d)
        assert K == brute_force_K(delta, gamma, p, d)


def test_compute_K_float_reevaluation_with_slack():
    rng = np.random.default_rng(5)
    for _ in range(300):
        delta = float(rng.uniform(0.01, 0.99))
        gamma = float(rng.uniform(0.05, 1.5))
        p = int(rng.integers(1, 4))
        K = compute_K(delta, gamma, p, 2)
        a = (2 * gamma) / (2 * p + 2)
        assert 2.0 ** (-(K + 1) * a) <= delta * (1 + 1e-12)
        assert delta * (1 - 1e-12) < 2.0 ** (-K * a)


@pytest.mark.parametrize(
    "bad", [dict(delta=1.0), dict(delta=0.0), dict(delta=-0.2), dict(gamma=0.0), dict(p=0), dict(d=4)]
)
def test_compute_K_rejects_bad_input(bad):
    args = dict(delta=0.5, gamma=0.5, p=1, d=2)
    args.update(bad)
    with pytest.raises(GradingError):
        compute_K(args["delta"], args["gamma"], args["p"], args["d"])


# -- distances -----------------------------------------------------------------


def test_distance_zero_at_vertex_and_inside():
    tri = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    assert element_distance(tri, [(0.0, 0.0)]) == 0.0
    assert element_distance(tri, [(0.25, 0.25)]) == 0.0


def test_distance_right_of_unit_triangle():
    tri = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    assert element_distance(tri, [(2.0, 0.0)]) == pytest.approx(1.0, abs=1e-15)


def test_distance_empty_point_set_is_inf():
    tri = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    assert element_distance(tri, []) == math.inf


def test_distance_min_over_points():
    tri = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    d = element_distance(tri, [(3.0, 0.0), (2.0, 0.0)])
    assert d == pytest.approx(1.0, abs=1e-15)


def test_distance_against_dense_sampling_oracle(rng):
    # 1e6-point barycentric lattice (vertices and edges included); for the
    # exterior points below the lattice argument makes the oracle gap O(h**2)
    n = 1413  # (n + 1)(n + 2)/2 ~ 1.0e6 samples
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    keep = (i + j) <= n
    l1 = (i[keep] / n)[:, None]
    l2 = (j[keep] / n)[:, None]
    l0 = 1.0 - l1 - l2
    for _ in range(6):
        tri = rng.uniform(-1.0, 1.0, (3, 2))
        area2 = abs(
            (tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1])
            - (tri[2, 0] - tri[0, 0]) * (tri[1, 1] - tri[0, 1])
        )
        if area2 < 0.2:
            continue
        samples = l0 * tri[0] + l1 * tri[1] + l2 * tri[2]
        point = rng.uniform(-2.0, 2.0, 2)
        exact = element_distance(tri, [tuple(point)])
        sampled = float(np.min(np.hypot(samples[:, 0] - point[0], samples[:, 1] - point[1])))
        if exact == 0.0:
            assert sampled <= 4.0 / n
        elif exact > 0.05:
            assert abs(exact - sampled) <= 1e-4


# -- the two loops ---------------------------------------------------------------


def lshape_params(delta, p=1):
    return GradingParams(delta=delta, p=p, gamma=1 / 3, singular_points=((0.0, 0.0),))


def ledger_of(rows, mesh, initial_leaves=6, initial_max_area=0.5):
    return ComplexityLedger(rows, initial_leaves, mesh.num_leaves, initial_max_area, mesh.domain_area())


def test_first_loop_already_fine_single_empty_pass():
    mesh = initial_mesh("custom", vertices=[(0.0, 0.0), (0.2, 0.0), (0.0, 0.2)],
                        triangles=[(0, 1, 2)])
    # h_T ~ 0.141 <= delta: the loop exits after one pass with no marks
    params = GradingParams(delta=0.5, p=1)
    rows = first_loop(mesh, params)
    assert len(rows) == 1
    assert rows[0].marks == 0
    assert mesh.num_leaves == 1


def test_first_loop_square_termination_bound():
    mesh = initial_mesh("square")
    params = GradingParams(delta=0.3, p=1)
    rows = first_loop(mesh, params)
    ledger = ledger_of(rows, mesh, initial_leaves=2)
    rep = verify_first_loop(mesh, params, ledger)
    # bound log2(0.5 / 0.09) + 1 ~ 3.474, marking passes observed: 3
    assert rep.iterations == 3
    assert rep.iteration_bound == pytest.approx(math.log2(0.5 / 0.09) + 1.0, abs=1e-12)
    assert rep.ok
    assert rep.max_h <= 0.3


def test_first_loop_mark_sum_bound_lshape():
    mesh = initial_mesh("l_shape")
    params = GradingParams(delta=0.1, p=1)
    rows = first_loop(mesh, params)
    total = sum(r.marks for r in rows)
    # halving trace 6 + 12 + 24 + 48 + 96 + 192, against the 2*|domain|*delta**-2 cap
    assert total == 378
    assert total <= 2 * 3.0 * 0.1**-2
    assert 2 * 3.0 * 0.1**-2 == pytest.approx(600.0)


def test_first_loop_rejects_large_delta():
    mesh = initial_mesh("l_shape")  # 6 elements: need delta <= 6**-0.5
    with pytest.raises(GradingError):
        first_loop(mesh, GradingParams(delta=0.45, p=1))


def test_second_loop_runs_exactly_ring_count_iterations():
    mesh = initial_mesh("l_shape")
    params = lshape_params(0.3)
    first_loop(mesh, params)
    rows = second_loop(mesh, params)
    assert len(rows) == 2 * (params.K + 1) - 1 == params.ring_count


def test_second_loop_threshold_formula_high_precision():
    # ell = 6, delta = 0.5, gamma = 1/3, p = 1, d = 2: threshold = 0.5 * 2**(-5/2)
    params = GradingParams(delta=0.5, p=1, gamma=1 / 3, singular_points=((0.0, 0.0),))
    got = mark_threshold(params, 6)
    expo = Fraction(2 * 6) * (Fraction(1, 3) - 2) / (2 * (2 + 2))
    with mpmath.workdps(50):
        want = float(mpmath.mpf("0.5") * mpmath.power(2, mpmath.mpf(expo.numerator) / expo.denominator))
    assert got == pytest.approx(want, rel=1e-15)
    assert got == pytest.approx(0.08838834764831845, rel=1e-12)


def test_ring_radius_membership_example():
    # r_T = 0.3 with 2**(-4/2) = 0.25 < 0.3: not inside the ell = 4 region
    assert not (0.3 <= ring_radius(4, 2))
    assert 0.3 <= ring_radius(3, 2)


def test_second_loop_empty_singular_set_no_marks():
    mesh = initial_mesh("l_shape")
    params = GradingParams(delta=0.3, p=1, gamma=1 / 3, singular_points=())
    first_loop(mesh, params)
    before = mesh.num_leaves
    rows = second_loop(mesh, params)
    assert len(rows) == params.ring_count
    assert all(r.marks == 0 for r in rows)
    assert mesh.num_leaves == before


def test_second_loop_without_gamma_is_noop():
    mesh = initial_mesh("l_shape")
    params = GradingParams(delta=0.3, p=1)
    first_loop(mesh, params)
    assert second_loop(mesh, params) == []


def test_grade_mesh_ledger_identities_and_conformity():
    mesh = initial_mesh("l_shape")
    params = lshape_params(0.2)
    ledger = grade_mesh(mesh, params)
    assert ledger.identities_hold()
    assert mesh.is_conforming()
    assert ledger.final_leaves == mesh.num_leaves
    # per-row identity is exact integer arithmetic
    for row in ledger.rows:
        assert row.leaves_after_refine - row.leaves_before == row.marks


def test_parent_child_distance_monotone():
    mesh = initial_mesh("l_shape")
    params = lshape_params(0.2)
    grade_mesh(mesh, params)
    tv = mesh.tri_vertices()
    alive = mesh.alive_mask()
    directed = {}
    for tid in range(mesh.num_triangles):
        directed[(int(tv[tid, 0]), int(tv[tid, 1]))] = tid
    rng = np.random.default_rng(2)
    dead = np.nonzero(~alive)[0]
    for tid in rng.choice(dead, size=min(200, len(dead)), replace=False):
        a, b, c = (int(v) for v in tv[tid])
        children = [directed[(c, a)], directed[(b, c)]]
        r_parent = leaf_distances(mesh, np.array([tid]), params.singular_points)[0]
        for ch in children:
            r_child = leaf_distances(mesh, np.array([ch]), params.singular_points)[0]
            assert r_child >= r_parent - 1e-15


def test_size_lemma_clean_and_negative_control():
    mesh = initial_mesh("l_shape")
    params = lshape_params(0.2)
    grade_mesh(mesh, params)
    rep = verify_size_lemma(mesh, params)
    assert rep.ok and rep.checked > 0
    # tightening the (negative) exponent by 10 percent must break it
    mutated = verify_size_lemma(mesh, params, exponent_factor=1.1)
    assert len(mutated.violations) >= 1


def test_size_lemma_level0_reduces_to_first_loop_exit():
    mesh = initial_mesh("l_shape")
    params = lshape_params(0.2)
    grade_mesh(mesh, params)
    leaves = mesh.leaf_ids()
    r = leaf_distances(mesh, leaves, params.singular_points)
    inside = leaves[r < 1.0]
    assert np.all(mesh.areas()[inside] <= params.delta**2 * (1 + 1e-12))


def test_marked_bound_trivial_and_scaled_constants():
    mesh = initial_mesh("l_shape")
    params = lshape_params(0.2)
    ledger = grade_mesh(mesh, params)
    rep = verify_marked_bound(ledger, params)
    assert rep.ok
    assert all(c >= 0.0 for _, c in rep.constants)
    empty_rows = [r for r in ledger.second_rows() if r.marks == 0]
    got = dict(rep.constants)
    for row in empty_rows:
        assert got[row.iteration] == 0.0


def test_bdd_no_marks_gives_zero():
    mesh = initial_mesh("custom", vertices=[(0.0, 0.0), (0.2, 0.0), (0.0, 0.2)],
                        triangles=[(0, 1, 2)])
    params = GradingParams(delta=0.5, p=1)
    rows = first_loop(mesh, params)
    ledger = ledger_of(rows, mesh, initial_leaves=1, initial_max_area=0.02)
    assert bdd_ledger_check(ledger).ratio == 0.0


def test_bdd_uniform_first_loop_under_two():
    for preset, n0 in (("square", 2), ("l_shape", 6)):
        mesh = initial_mesh(preset)
        params = GradingParams(delta=0.1, p=1)
        rows = first_loop(mesh, params)
        ledger = ComplexityLedger(rows, n0, mesh.num_leaves, 0.5, mesh.domain_area())
        rep = bdd_ledger_check(ledger)
        assert 0.0 < rep.ratio <= 2.0


def test_ledger_csv_round_trip():
    mesh = initial_mesh("l_shape")
    params = lshape_params(0.3)
    ledger = grade_mesh(mesh, params)
    text = ledger.to_csv()
    assert text.splitlines()[0] == (
        "loop,iter,marks,leaves_before,leaves_after_refine,leaves_after_complete"
    )
    again = ComplexityLedger.from_csv(text)
    assert again.rows == ledger.rows
    assert again.initial_leaves == ledger.initial_leaves
    assert again.final_leaves == ledger.final_leaves
    assert again.identities_hold()


def test_grading_on_slit_preset():
    mesh = initial_mesh("slit")
    params = GradingParams(delta=0.2, p=1, gamma=0.25, singular_points=((0.0, 0.0),))
    ledger = grade_mesh(mesh, params)
    assert mesh.is_conforming()
    assert ledger.identities_hold()
    assert verify_size_lemma(mesh, params).ok
    assert abs(mesh.domain_area() - 4.0) <= 4e-12


def test_d3_formulas_unit_level():
    # the mesh engine is 2d-only, but the parameter formulas accept d = 3
    assert compute_K(0.4, 0.5, 2, 3) == brute_force_K(0.4, 0.5, 2, 3)
    params = GradingParams(delta=0.4, p=2, gamma=0.5, singular_points=((0.0, 0.0),), d=3)
    assert params.ring_count == 3 * (params.K + 1) - 1
    assert ring_radius(3, 3) == pytest.approx(0.5, abs=1e-15)
    want = 0.4 * 2.0 ** (2 * 5 * (0.5 - 3) / (3 * 7))
    assert mark_threshold(params, 5) == pytest.approx(want, rel=1e-15)
