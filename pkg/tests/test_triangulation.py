from __future__ import annotations

import itertools
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qhi.triangulation import (
    NotWeakBranchingError,
    Pairing,
    Triangulation,
    TriangulationError,
    count_q,
    diagonal_parity_violations,
    edge_colors,
    edge_roles,
    find_weak_branchings,
    induce_prebranching,
    _is_outgoing,
    load,
    perm_sign,
    save,
    validate,
)

ORDERS = list(itertools.permutations(range(4)))


@pytest.fixture(scope="module")
def sister():
    return load("m003")


@pytest.fixture(scope="module")
def figure_eight():
    return load("m004")


@pytest.fixture(scope="module")
def sister_branchings(sister):
    return find_weak_branchings(sister[0])


@pytest.fixture(scope="module")
def figure_eight_branchings(figure_eight):
    return find_weak_branchings(figure_eight[0])


def test_sister_is_valid_one_cusped(sister):
    tri, _, _ = sister
    report = validate(tri)
    assert report.ok
    assert tri.num_tets == 2
    assert report.num_edges == 2
    assert report.num_cusps == 1
    assert report.ideal
    assert report.num_manifold_vertices == 0


def test_figure_eight_edges_have_degree_six(figure_eight):
    tri, _, _ = figure_eight
    assert validate(tri).ok
    assert [e.degree for e in tri.edge_classes] == [6, 6]


def test_unpaired_facet_is_reported():
    # a single tet with faces 0 and 1 paired, faces 2 and 3 left open
    tri = Triangulation(1, [Pairing(0, 0, 0, 1, (1, 0, 2, 3))])
    with pytest.raises(TriangulationError, match="unpaired facet"):
        validate(tri)


def test_facet_in_two_pairings_is_rejected():
    pairings = [
        Pairing(0, 0, 0, 1, (1, 0, 2, 3)),
        Pairing(0, 0, 0, 2, (2, 1, 0, 3)),
        Pairing(0, 3, 0, 2, (0, 1, 3, 2)),
    ]
    with pytest.raises(TriangulationError, match="more than one pairing"):
        validate(Triangulation(1, pairings))


def test_orientation_preserving_pairing_is_flagged(sister):
    tri, _, _ = sister
    bad = list(tri.pairings)
    p = bad[0]
    # compose with a transposition of two vertices off the glued face
    a, b = [v for v in range(4) if v != p.face_b][:2]
    swap = {a: b, b: a}
    perm = tuple(swap.get(x, x) for x in p.perm)
    bad[0] = Pairing(p.tet_a, p.face_a, p.tet_b, p.face_b, perm)
    report = validate(Triangulation(2, bad))
    assert not report.ok
    assert any("does not reverse" in msg for msg in report.problems)


def test_bundled_sister_orders_give_positive_signs(sister):
    _, wb, _ = sister
    assert wb.signs == (1, 1)


def test_sister_is_not_genuinely_branched(sister, sister_branchings):
    _, wb, _ = sister
    assert not wb.is_genuine()
    assert wb.colors == (0, 0, 2, 1)
    assert sister_branchings
    assert not any(w.is_genuine() for w in sister_branchings)


def test_figure_eight_bundled_branching_is_genuine(figure_eight, figure_eight_branchings):
    tri, wb, _ = figure_eight
    assert wb.is_genuine()
    assert count_q(tri, wb) == 0
    assert sum(w.is_genuine() for w in figure_eight_branchings) == 4


def test_count_q_on_sister(sister):
    tri, wb, _ = sister
    assert count_q(tri, wb) == 1


@pytest.mark.parametrize("order", ORDERS)
@pytest.mark.parametrize("orientation", [1, -1])
def test_single_tet_has_two_outgoing_faces(order, orientation):
    sign = orientation * perm_sign(order)
    assert sum(_is_outgoing(order.index(f), sign) for f in range(4)) == 2


def test_swapped_order_breaks_compatibility(sister):
    tri, _, _ = sister
    compatible = 0
    for o0, o1 in itertools.product(ORDERS, repeat=2):
        try:
            induce_prebranching(tri, [o0, o1])
        except NotWeakBranchingError as exc:
            assert "mismatch" in str(exc)
            continue
        compatible += 1
    assert compatible == 96
    with pytest.raises(NotWeakBranchingError):
        induce_prebranching(tri, [(1, 0, 3, 2), (0, 1, 2, 3)])


def test_wrong_number_of_orders(sister):
    tri, _, _ = sister
    with pytest.raises(NotWeakBranchingError):
        induce_prebranching(tri, [(0, 1, 2, 3)])


def test_edge_roles_form_pairs(sister):
    tri, wb, _ = sister
    roles = edge_roles(tri, wb)
    for t in range(tri.num_tets):
        kinds = sorted(r.role for (tt, _), r in roles.items() if tt == t)
        assert kinds == ["diagonal-over", "diagonal-under", "square-A", "square-A", "square-B", "square-B"]
        for k in range(3):
            paired = {r.role.split("-")[0] for (tt, _), r in roles.items() if tt == t and r.pair == k}
            assert len(paired) == 1
        # the four square edges close up into an oriented quadrilateral
        arrows = [r.direction for (tt, _), r in roles.items() if tt == t and r.direction]
        assert sorted(a for a, _ in arrows) == sorted(b for _, b in arrows)


def test_json_round_trip(tmp_path, sister):
    tri, wb, _ = sister
    path = tmp_path / "tri.json"
    save(path, tri, wb)
    tri2, wb2, _ = load(path)
    assert json.dumps(tri2.to_json(wb2.orders)) == json.dumps(tri.to_json(wb.orders))
    assert wb2.colors == wb.colors


def test_malformed_json():
    with pytest.raises(TriangulationError, match="malformed"):
        Triangulation.from_json({"tets": 1})


@settings(max_examples=60, deadline=None)
@given(data=st.data(), name=st.sampled_from(["m003", "m004"]))
def test_every_weak_branching_has_even_diagonals(data, name):
    tri, _, _ = load(name)
    choice = data.draw(st.tuples(*[st.sampled_from(ORDERS)] * tri.num_tets))
    try:
        wb = induce_prebranching(tri, choice)
    except NotWeakBranchingError:
        return
    assert diagonal_parity_violations(tri, wb) == []
    assert edge_colors(tri, wb) == wb.colors


@pytest.mark.parametrize("name", ["m003", "m004"])
def test_prebranchings_exist(name):
    tri, _, _ = load(name)
    assert find_weak_branchings(tri, limit=1)


@settings(max_examples=30, deadline=None)
@given(choice=st.tuples(st.sampled_from(ORDERS), st.sampled_from(ORDERS)))
def test_colors_are_deterministic(choice):
    tri, _, data = load("m003")
    try:
        a = induce_prebranching(tri, choice)
    except NotWeakBranchingError:
        return
    tri2 = Triangulation.from_json(json.loads(json.dumps(data)))
    b = induce_prebranching(tri2, choice)
    assert a.colors == b.colors
    assert a.is_genuine() == all(r == 0 for r in a.colors)
