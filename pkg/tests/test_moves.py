from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qhi.gluing import build_equations, solve, volume
from qhi.harness import prepare
from qhi.moves import (
    IDENTITY,
    ORIENTED_GROUP,
    SIGMA,
    MoveError,
    TransitRecord,
    act,
    apply_bubble,
    apply_c_move,
    apply_circuit_move,
    apply_mp_transit,
    apply_record,
    bubble,
    c_move,
    mp_transit,
    prepare_circuit,
    updated_colors,
)
from qhi.triangulation import (
    NotWeakBranchingError,
    Triangulation,
    count_q,
    edge_colors,
    find_weak_branchings,
    induce_prebranching,
    invert,
    load,
    perm_sign,
    validate,
)

S4 = list(itertools.permutations(range(4)))


def isomorphic(a: Triangulation, b: Triangulation) -> bool:
    """Brute-force combinatorial isomorphism for connected triangulations."""
    if a.num_tets != b.num_tets:
        return False
    for image0 in range(b.num_tets):
        for perm0 in S4:
            tet_map = {0: image0}
            perm_map = {0: perm0}
            stack = [0]
            ok = True
            while stack and ok:
                t = stack.pop()
                for f in range(4):
                    t2, p = a.neighbor(t, f)
                    u, q = b.neighbor(tet_map[t], perm_map[t][f])
                    # label of t2 vertex v in b: pi_t(p^-1(v))
                    pinv = invert(p)
                    want = tuple(q[perm_map[t][pinv[v]]] for v in range(4))
                    if t2 in tet_map:
                        if tet_map[t2] != u or perm_map[t2] != want:
                            ok = False
                            break
                    else:
                        if u in tet_map.values():
                            ok = False
                            break
                        tet_map[t2], perm_map[t2] = u, want
                        stack.append(t2)
            if ok and len(tet_map) == a.num_tets:
                return True
    return False


def common_outgoing(old_wb, new_wb, kept: dict[int, int]) -> bool:
    return all(old_wb.outgoing[t] == new_wb.outgoing[i] for t, i in kept.items())


@pytest.fixture(scope="module")
def sister():
    return load("m003")


@pytest.fixture(scope="module")
def sister_decorated():
    return prepare("m003").decorated


# -- C-moves -----------------------------------------------------------------------


def test_identity_c_move(sister):
    tri, wb, _ = sister
    assert apply_c_move(tri, wb, 0, IDENTITY) == wb


def test_sigma_has_order_four(sister):
    tri, wb, _ = sister
    out = wb
    for _ in range(4):
        out = apply_c_move(tri, out, 1, SIGMA)
    assert out == wb
    assert [act(SIGMA, act(SIGMA, IDENTITY))] == [ORIENTED_GROUP[2]]


def test_sigma_flips_sign_and_shifts_colors(sister):
    tri, wb, _ = sister
    moved = apply_c_move(tri, wb, 0, SIGMA)
    # sigma is a 4-cycle, hence odd: the b-orientation of the tet reverses
    assert moved.signs == (-wb.signs[0], wb.signs[1])
    assert moved.colors == edge_colors(tri, moved)
    assert moved.colors != wb.colors
    assert moved.outgoing == wb.outgoing


def test_non_oriented_c_move_is_rejected(sister):
    tri, wb, _ = sister
    with pytest.raises(MoveError, match="oriented"):
        apply_c_move(tri, wb, 0, (1, 0, 2, 3))


@pytest.mark.parametrize("name", ["m003", "m004"])
def test_color_bookkeeping_over_all_permutations(name):
    tri, _, _ = load(name)
    for wb in find_weak_branchings(tri):
        for t, beta in itertools.product(range(tri.num_tets), S4):
            new = act(beta, wb.orders[t])
            orders = list(wb.orders)
            orders[t] = new
            if beta in ORIENTED_GROUP:
                recomputed = induce_prebranching(tri, orders)
                assert updated_colors(wb, t, new) == recomputed.colors
                flip = 1 if perm_sign(beta) == 1 else -1
                assert recomputed.signs[t] == flip * wb.signs[t]
            else:
                with pytest.raises(MoveError):
                    updated_colors(wb, t, new)
                with pytest.raises(NotWeakBranchingError):
                    induce_prebranching(tri, orders)


# -- circuit moves ---------------------------------------------------------------------


def test_empty_circuit_is_identity(sister):
    tri, wb, _ = sister
    assert apply_circuit_move(tri, wb, []) == wb


@pytest.mark.parametrize("circuit", [[0, 2], [0, 3], [1, 2], [1, 3]])
def test_circuit_reverses_only_its_edges(sister, circuit):
    tri, wb, _ = sister
    ready, _ = prepare_circuit(tri, wb, circuit)
    moved = apply_circuit_move(tri, ready, circuit)
    assert moved.colors == ready.colors
    for e_old, e_new in zip(ready.dual_edges, moved.dual_edges):
        flipped = (e_old.source, e_old.target) == (e_new.target, e_new.source)
        assert flipped == (e_old.index in circuit)
    assert apply_circuit_move(tri, moved, circuit) == ready


def test_circuit_must_pass_over(sister):
    tri, wb, _ = sister
    bad = [c for c in ([0, 2], [0, 3], [1, 2], [1, 3]) if prepare_circuit(tri, wb, c)[1]]
    assert bad
    with pytest.raises(MoveError, match="pass over"):
        apply_circuit_move(tri, wb, bad[0])


def test_non_simple_circuit(sister):
    tri, wb, _ = sister
    with pytest.raises(MoveError, match="not simple"):
        apply_circuit_move(tri, wb, [0, 0])
    with pytest.raises(MoveError, match="not simple"):
        apply_circuit_move(tri, wb, [0])


def test_count_q_after_circuit_move(sister):
    tri, wb, _ = sister
    ready, _ = prepare_circuit(tri, wb, [0, 2])
    moved = apply_circuit_move(tri, ready, [0, 2])
    assert count_q(tri, moved) == sum(r == 2 for r in moved.colors) == count_q(tri, ready)


# -- 2-3 moves ---------------------------------------------------------------------------


def test_schaeffer_configuration_stays_positive(sister):
    tri, wb, _ = sister
    assert wb.signs == (1, 1)
    new_tri, new_wb, record = apply_mp_transit(tri, wb, 1, 1)
    assert record.kind == "MP23"
    assert new_tri.num_tets == 3
    assert new_wb.signs == (1, 1, 1)


@pytest.mark.parametrize("name,site", [("m003", 0), ("m003", 1), ("m004", 0), ("m004", 1), ("m004", 2), ("m004", 3)])
def test_mp_round_trip(name, site):
    tri, wb, _ = load(name)
    mid_tri, mid_wb, record = apply_mp_transit(tri, wb, site, 1)
    assert validate(mid_tri).ok
    assert common_outgoing(wb, mid_wb, record.carry["kept"])
    new_tets = set(record.carry["new"].values())
    edge = next(
        e.index for e in mid_tri.edge_classes
        if e.degree == 3 and {t for t, _ in e.incidences} == new_tets
    )
    back_tri, back_wb, back = apply_mp_transit(mid_tri, mid_wb, edge, -1)
    assert back.kind == "MP32"
    assert validate(back_tri).ok
    assert isomorphic(back_tri, tri)
    assert sorted(back_wb.colors) == sorted(wb.colors)


def test_mp_needs_color_zero(sister):
    tri, wb, _ = sister
    colored = [e.index for e in wb.dual_edges if e.color]
    with pytest.raises(MoveError, match="no b-transit"):
        apply_mp_transit(tri, wb, colored[0], 1)


def test_negative_mp_needs_degree_three(sister):
    tri, wb, _ = sister
    with pytest.raises(MoveError):
        apply_mp_transit(tri, wb, 0, -1)


def test_sister_mp_keeps_complete_solution(sister_decorated):
    dt = sister_decorated
    moved, _ = mp_transit(dt, 0, 1)
    system = build_equations(moved.tri, moved.wb)
    assert max(abs(r) for r in system.log_residuals(moved.point.w0)) < 1e-10
    again = solve(system, list(moved.point.w0))
    assert max(abs(a - b) for a, b in zip(again.w0, moved.point.w0)) < 1e-10
    assert volume(moved.point, moved.wb) == pytest.approx(volume(dt.point, dt.wb), abs=1e-10)


# -- bubbles ---------------------------------------------------------------------------------


@pytest.mark.parametrize("name", ["m003", "m004"])
@pytest.mark.parametrize("site", range(4))
def test_bubble_round_trip(name, site):
    tri, wb, _ = load(name)
    assert validate(tri).num_manifold_vertices == 0
    mid_tri, mid_wb, record = apply_bubble(tri, wb, site, 1)
    report = validate(mid_tri)
    assert report.ok
    assert report.num_manifold_vertices == 1
    assert mid_tri.num_tets == tri.num_tets + 2
    assert mid_wb.outgoing[: tri.num_tets] == wb.outgoing
    vertex = next(vc.index for vc in mid_tri.vertex_classes if not vc.ideal)
    back_tri, back_wb, _ = apply_bubble(mid_tri, mid_wb, vertex, -1)
    assert back_tri.to_json(back_wb.orders) == tri.to_json(wb.orders)


def test_negative_bubble_at_cusp_fails(sister):
    tri, wb, _ = sister
    with pytest.raises(MoveError, match="manifold vertex"):
        apply_bubble(tri, wb, 0, -1)


def test_decorated_bubble_round_trip(sister_decorated):
    dt = sister_decorated
    mid, _ = bubble(dt, 2, 1)
    vertex = next(vc.index for vc in mid.tri.vertex_classes if not vc.ideal)
    back, _ = bubble(mid, vertex, -1)
    assert back.point.w0 == dt.point.w0
    assert back.f.values == dt.f.values
    assert back.c.values == dt.c.values


# -- records -------------------------------------------------------------------------------


def test_record_json_round_trip():
    rec = TransitRecord("Cmove", (1,), SIGMA)
    assert TransitRecord.from_json(rec.to_json()) == rec


def test_apply_record_dispatch(sister):
    tri, wb, _ = sister
    _, moved, _ = apply_record(tri, wb, TransitRecord("Cmove", (0,), SIGMA))
    assert moved == apply_c_move(tri, wb, 0, SIGMA)
    new_tri, _, rec = apply_record(tri, wb, TransitRecord("bubble+", (0,)))
    assert rec.kind == "bubble+" and new_tri.num_tets == 4
    with pytest.raises(MoveError, match="unknown"):
        apply_record(tri, wb, TransitRecord("flip", (0,)))


@settings(max_examples=40, deadline=None)
@given(steps=st.lists(st.tuples(st.integers(0, 1), st.sampled_from(ORIENTED_GROUP)), max_size=6))
def test_c_moves_preserve_prebranching(steps):
    tri, wb, _ = load("m003")
    out = wb
    for t, beta in steps:
        out = apply_c_move(tri, out, t, beta)
        assert out.outgoing == wb.outgoing
        assert out.colors == edge_colors(tri, out)
    # undo in reverse order with the inverse rotations
    for t, beta in reversed(steps):
        out = apply_c_move(tri, out, t, invert(beta))
    assert out == wb


def test_decorated_c_move_round_trip(sister_decorated):
    dt = sister_decorated
    out = dt
    for _ in range(4):
        out = c_move(out, 0, SIGMA)
    assert out.wb == dt.wb
    assert out.c.values == dt.c.values
    assert out.f.values == dt.f.values
    assert max(abs(a - b) for a, b in zip(out.point.w0, dt.point.w0)) < 1e-12
