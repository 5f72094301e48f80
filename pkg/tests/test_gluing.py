from __future__ import annotations

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qhi.gluing import (
    CrossRatioPoint,
    DegenerateTetrahedronError,
    NormalLoop,
    SolverError,
    build_cusp_section,
    build_equations,
    follow_holonomy,
    shapes_of,
    simple_loops,
    solve,
    solve_complete,
    volume,
)
from qhi.triangulation import load

REGULAR = cmath.exp(1j * math.pi / 3)
# 2 D2(exp(i pi / 3)), with D2 from quadrature of the dilogarithm integral
TWO_REGULAR_VOLUMES = 2.0298832128193


@pytest.fixture(scope="module", params=["m003", "m004"])
def census(request):
    tri, wb, data = load(request.param)
    section = build_cusp_section(tri, wb, data.get("cusp_basis"))
    return tri, wb, build_equations(tri, wb), section


@pytest.fixture(scope="module")
def sister():
    tri, wb, data = load("m003")
    return tri, wb, build_equations(tri, wb), build_cusp_section(tri, wb, data["cusp_basis"])


def test_shapes_satisfy_tetrahedral_relation():
    w = 0.3 + 0.7j
    w0, w1, w2 = shapes_of(w)
    assert w1 == pytest.approx(1 / (1 - w0))
    assert w2 == pytest.approx(1 / (1 - w1))
    assert w0 * w1 * w2 == pytest.approx(-1)


def test_sister_equations(sister):
    _, _, system, _ = sister
    # w0 w_k^2 W0 W_k^2 = 1 for k = 2 and k = 1
    assert system.monomials() == [
        {(0, 0): 1, (0, 2): 2, (1, 0): 1, (1, 2): 2},
        {(0, 0): 1, (0, 1): 2, (1, 0): 1, (1, 1): 2},
    ]


def test_one_equation_per_tet(census):
    tri, _, system, _ = census
    assert system.num_equations == system.num_tets == tri.num_tets


def test_sister_regular_solution(sister):
    _, _, system, _ = sister
    point = solve(system, [0.5 + 0.8j, 0.5 + 0.8j])
    assert all(abs(w - REGULAR) < 1e-10 for w in point.w0)
    assert point.residual < 1e-12


def test_figure_eight_regular_solution():
    tri, wb, data = load("m004")
    system = build_equations(tri, wb)
    section = build_cusp_section(tri, wb, data["cusp_basis"])
    point = solve_complete(system, section, [0.5 - 0.8j, 0.5 + 0.8j])
    # the tet with sign -1 carries the inverse modulus in the ambient orientation
    ambient = [w ** s for w, s in zip(point.w0, wb.signs)]
    assert all(abs(w - REGULAR) < 1e-10 for w in ambient)


@pytest.mark.parametrize("guess", [(0.3 + 0.5j, 0.9 + 0.6j), (2 + 1j, 0.4 + 0.3j), (0.55 + 0.75j, 0.5 + 0.85j)])
def test_sister_other_points_solve_the_quadratic(sister, guess):
    _, _, system, _ = sister
    point = solve(system, list(guess))
    w1 = shapes_of(point.w0[0])[1]
    W1 = shapes_of(point.w0[1])[1]
    # W1 is a root of W^2 - W - 1 / (w1 (w1 - 1)) = 0
    disc = cmath.sqrt(1 + 4 / (w1 * (w1 - 1)))
    roots = [(1 + disc) / 2, (1 - disc) / 2]
    assert min(abs(W1 - r) for r in roots) < 1e-10
    assert abs(w1 * (w1 - 1) * W1 * (W1 - 1) - 1) < 1e-10


def test_degenerate_guess(sister):
    _, _, system, _ = sister
    with pytest.raises(DegenerateTetrahedronError):
        solve(system, [1.0, 0.5 + 0.5j])


def test_non_convergence_reports_residual(sister):
    _, _, system, _ = sister
    with pytest.raises(SolverError, match="residual"):
        solve(system, [0.5 + 0.8j, 0.5 + 0.8j], max_iter=0, tol=1e-300)


def test_volume_of_complete_point(census):
    tri, wb, system, section = census
    point = solve_complete(system, section, [0.5 + 0.8j if s == 1 else 0.5 - 0.8j for s in wb.signs])
    assert volume(point, wb) == pytest.approx(TWO_REGULAR_VOLUMES, abs=1e-10)
    assert volume(point.conjugate(), wb) == pytest.approx(-TWO_REGULAR_VOLUMES, abs=1e-10)


def test_volume_of_real_point(sister):
    _, wb, _, _ = sister
    assert volume(CrossRatioPoint((0.3, -2.0)), wb) == 0.0


def test_cusp_section_is_a_torus(census):
    _, _, _, section = census
    assert len(section.triangles) == 8
    assert section.euler_characteristic == 0
    l, m = section.basis
    assert section.intersection(l, m) == 1
    assert section.intersection(m, l) == -1


def test_greedy_basis_has_unit_intersection(census):
    tri, wb, _, _ = census
    section = build_cusp_section(tri, wb)
    assert section.intersection(*section.basis) == 1


def test_sister_holonomies_at_generic_point(sister):
    _, _, system, section = sister
    point = solve(system, [0.55 + 0.75j, 0.5 + 0.85j])
    w, W = point.shapes
    l, m = section.basis
    assert abs(section.holonomy(point, l) - W[1] / w[1]) < 1e-12
    assert abs(section.holonomy(point, m) - (W[1] / W[2]) ** 2) < 1e-12
    assert abs(section.holonomy(point, l) - 1) > 1e-3


def test_complete_point_has_trivial_holonomy(census):
    _, wb, system, section = census
    point = solve_complete(system, section, [0.5 + 0.8j if s == 1 else 0.5 - 0.8j for s in wb.signs])
    for loop in section.basis:
        assert abs(section.holonomy(point, loop) - 1) < 1e-10
    for loop in simple_loops(section, 6):
        assert abs(section.holonomy(point, loop) - 1) < 1e-10


def test_holonomy_is_multiplicative(sister):
    _, _, system, section = sister
    point = solve(system, [0.55 + 0.75j, 0.5 + 0.85j])
    loops = simple_loops(section, 8)
    checked = 0
    for a in loops:
        back = section.reverse(a)
        assert abs(section.holonomy(point, a) * section.holonomy(point, back) - 1) < 1e-10
        for b in loops:
            ab = section.concatenate(a, b)
            if ab is None:
                continue
            prod = section.holonomy(point, a) * section.holonomy(point, b)
            assert abs(section.holonomy(point, ab) - prod) < 1e-10
            checked += 1
    assert checked


def test_non_normal_loop_is_rejected(sister):
    _, _, _, section = sister
    with pytest.raises(ValueError):
        section.arcs(NormalLoop(((0, 0, 1), (0, 0, 1))))


def test_point_json_round_trip():
    p = CrossRatioPoint((0.5 + 0.8j, 0.1 - 0.3j))
    data = p.to_json()
    assert CrossRatioPoint.from_json(data).w0 == p.w0
    assert data["log_w1"][0] == pytest.approx([p.logs[0, 1].real, p.logs[0, 1].imag])


def test_homotopy_reaches_target(sister):
    _, _, system, section = sister
    start = solve_complete(system, section, [0.5 + 0.8j, 0.5 + 0.8j])
    target = 0.05 + 0.1j
    path = follow_holonomy(system, section, start, target, steps=5)
    assert len(path) == 5
    assert abs(section.log_holonomy(path[-1], section.basis[0]) - target) < 1e-10
    for p in path:
        assert np.max(np.abs(system.log_residuals(p.w0))) < 1e-10


@settings(max_examples=20, deadline=None)
@given(re=st.floats(0.2, 0.8), im=st.floats(0.4, 1.2))
def test_accepted_points_have_small_residuals(re, im):
    tri, wb, _ = load("m003")
    system = build_equations(tri, wb)
    try:
        point = solve(system, [complex(re, im), complex(re, im)])
    except SolverError:
        return
    assert np.max(np.abs(system.log_residuals(point.w0))) < 1e-10
    assert np.max(np.abs(system.edge_products(point.w0) - 1)) < 1e-9
