"""Moves on weakly branched triangulations, carrying decorations along.

The symmetric group acts on a tetrahedron's vertex order by
``beta . (v0, v1, v2, v3) = (v'_0, ..., v'_3)`` with ``v'_(beta(j)) = v_j``.
Permutations are written as tuples ``beta = (beta(0), ..., beta(3))``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .decor import Charge, DecoratedTriangulation, Flattening, rebranch_tet
from .gluing import CrossRatioPoint, principal_log, shapes_of
from .lattice import InfeasibleSystemError, solve_integer
from .triangulation import (
    Pairing,
    Perm,
    Triangulation,
    NotWeakBranchingError,
    WeakBranching,
    count_q,
    induce_prebranching,
    invert,
    pair_index,
    parity,
    validate,
)

SIGMA: Perm = (1, 2, 3, 0)
IDENTITY: Perm = (0, 1, 2, 3)
TRANSPOSITION_23: Perm = (0, 1, 3, 2)
ORIENTED_GROUP: tuple[Perm, ...] = (IDENTITY, SIGMA, (2, 3, 0, 1), (3, 0, 1, 2))


class MoveError(ValueError):
    """The requested move is not available at the given site."""


@dataclass(frozen=True)
class TransitRecord:
    kind: str  # "MP23", "MP32", "bubble+", "bubble-", "Cmove", "circuit"
    site: tuple
    beta: Perm | None = None
    carry: dict = field(default_factory=dict, compare=False)

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind, "site": list(self.site)}
        if self.beta is not None:
            out["beta"] = list(self.beta)
        return out

    @classmethod
    def from_json(cls, data: dict) -> "TransitRecord":
        beta = tuple(data["beta"]) if "beta" in data else None
        return cls(data["kind"], tuple(data.get("site", ())), beta)  # type: ignore[arg-type]


def act(beta: Sequence[int], order: Sequence[int]) -> Perm:
    new = [0] * 4
    for j in range(4):
        new[beta[j]] = order[j]
    return tuple(new)  # type: ignore[return-value]


# -- C-moves --------------------------------------------------------------


def face_rotation(old: Sequence[int], new: Sequence[int], face: int) -> int | None:
    """Cyclic shift ``d`` with ``new_face[j] = old_face[j + d]``, or ``None`` if odd."""
    a = [v for v in old if v != face]
    b = [v for v in new if v != face]
    for d in range(3):
        if all(b[j] == a[(j + d) % 3] for j in range(3)):
            return d
    return None


def updated_colors(wb: WeakBranching, tet: int, new_order: Sequence[int]) -> tuple[int, ...]:
    """Colors after re-ordering one tetrahedron, by shifting with the face rotations."""
    colors = []
    for e in wb.dual_edges:
        r = e.color
        for end, sgn in ((e.source, 1), (e.target, -1)):
            if end[0] != tet:
                continue
            d = face_rotation(wb.orders[tet], new_order, end[1])
            if d is None:
                raise MoveError(f"face {end} changes its co-orientation")
            r -= sgn * d
        colors.append(r % 3)
    return tuple(colors)


def _with_orders(tri: Triangulation, wb: WeakBranching, tet_orders: dict[int, Perm]) -> WeakBranching:
    orders = [tet_orders.get(t, wb.orders[t]) for t in range(tri.num_tets)]
    return induce_prebranching(tri, orders)


def carry_decoration(dt: DecoratedTriangulation, wb_new: WeakBranching) -> DecoratedTriangulation:
    """Re-express shapes, flattenings and charges in the new vertex orders."""
    w0, fs, cs = [], [], []
    for t in range(dt.tri.num_tets):
        w, f, c = rebranch_tet(
            dt.wb.orders[t], dt.wb.signs[t], wb_new.orders[t], wb_new.signs[t],
            dt.point.w0[t], dt.f.values[t], dt.c.values[t],
        )
        w0.append(w)
        fs.append(f)
        cs.append(c)
    return DecoratedTriangulation(
        dt.tri, wb_new, CrossRatioPoint(tuple(w0)), Flattening(tuple(fs)), Charge(tuple(cs))
    )


def apply_c_move(tri: Triangulation, wb: WeakBranching, tet: int, beta: Sequence[int], oriented: bool = True) -> WeakBranching:
    """Act by ``beta`` on the vertex order of ``tet``.

    With ``oriented=True`` only the pre-branching preserving group
    generated by ``(0123)`` is allowed.
    """
    beta = tuple(int(x) for x in beta)
    if sorted(beta) != [0, 1, 2, 3]:
        raise MoveError(f"{beta} is not a permutation")
    if oriented and beta not in ORIENTED_GROUP:
        raise MoveError(f"{beta} does not induce an oriented C-move")
    new_order = act(beta, wb.orders[tet])
    out = _with_orders(tri, wb, {tet: new_order})
    if oriented:
        expected = updated_colors(wb, tet, new_order)
        if expected != out.colors:
            raise AssertionError("color bookkeeping disagrees with recomputed colors")
    return out


def c_move(dt: DecoratedTriangulation, tet: int, beta: Sequence[int]) -> DecoratedTriangulation:
    return carry_decoration(dt, apply_c_move(dt.tri, dt.wb, tet, beta))


# -- circuit moves -------------------------------------------------------------


def _circuit_tets(tri: Triangulation, wb: WeakBranching, circuit: Sequence[int]) -> dict[int, list[int]]:
    faces: dict[int, list[int]] = {}
    if len(set(circuit)) != len(circuit):
        raise MoveError("circuit is not simple: repeated dual edge")
    for idx in circuit:
        e = wb.dual_edges[idx]
        for t, f in (e.source, e.target):
            faces.setdefault(t, []).append(f)
    for t, fs in faces.items():
        if len(fs) != 2:
            raise MoveError(f"circuit is not simple: meets tet {t} in {len(fs)} faces")
    # connectivity of the circuit as a cycle
    if circuit:
        adj: dict[int, set[int]] = {}
        for idx in circuit:
            e = wb.dual_edges[idx]
            adj.setdefault(e.source[0], set()).add(idx)
            adj.setdefault(e.target[0], set()).add(idx)
        seen = {wb.dual_edges[circuit[0]].source[0]}
        stack = list(seen)
        while stack:
            t = stack.pop()
            for idx in adj[t]:
                e = wb.dual_edges[idx]
                for u in (e.source[0], e.target[0]):
                    if u not in seen:
                        seen.add(u)
                        stack.append(u)
        if seen != set(faces):
            raise MoveError("circuit is not simple: it is disconnected")
    return faces


def prepare_circuit(tri: Triangulation, wb: WeakBranching, circuit: Sequence[int]) -> tuple[WeakBranching, list[tuple[int, Perm]]]:
    """Apply oriented C-moves so that the circuit passes ``F0`` and ``F1`` at every tet."""
    faces = _circuit_tets(tri, wb, circuit)
    moves: list[tuple[int, Perm]] = []
    for t, fs in sorted(faces.items()):
        pos = sorted(wb.position(t, f) for f in fs)
        for k, beta in enumerate(ORIENTED_GROUP):
            if sorted((p + k) % 4 for p in pos) == [0, 1]:
                if k:
                    wb = apply_c_move(tri, wb, t, beta)
                    moves.append((t, beta))
                break
        else:
            raise MoveError(f"circuit faces at tet {t} are not adjacent in the vertex order")
    return wb, moves


def circuit_charge_parity(wb: WeakBranching, circuit: Sequence[int], charges: Sequence[Sequence[int]]) -> int:
    """``h_c`` on the circuit: the charges of the faced edges, summed mod 2."""
    faces: dict[int, list[int]] = {}
    for idx in circuit:
        e = wb.dual_edges[idx]
        for t, f in (e.source, e.target):
            faces.setdefault(t, []).append(f)
    return sum(charges[t][wb.pair_of(t, a, b)] for t, (a, b) in faces.items()) % 2


def apply_circuit_move(tri: Triangulation, wb: WeakBranching, circuit: Sequence[int]) -> WeakBranching:
    """Reverse the pre-branching along a circuit by acting with ``(23)`` at every visited tet."""
    faces = _circuit_tets(tri, wb, circuit)
    new_orders = {}
    for t, fs in faces.items():
        if sorted(wb.position(t, f) for f in fs) != [0, 1]:
            raise MoveError(f"circuit does not pass over at tet {t}; apply C-moves first (prepare_circuit)")
        new_orders[t] = act(TRANSPOSITION_23, wb.orders[t])
    out = _with_orders(tri, wb, new_orders)
    for idx in circuit:
        old, new = wb.dual_edges[idx], out.dual_edges[idx]
        if (old.source, old.target) != (new.target, new.source):
            raise AssertionError("circuit edge was not reversed")
    return out


def circuit_move(dt: DecoratedTriangulation, circuit: Sequence[int]) -> DecoratedTriangulation:
    return carry_decoration(dt, apply_circuit_move(dt.tri, dt.wb, circuit))


# -- 2-3 moves -------------------------------------------------------------------
#
# The five vertices of the bipyramid are named by their rank in the total
# order extending the vertex orders of the tetrahedra involved.  A
# tetrahedron of the bipyramid is named by the rank it misses; its labels
# in the new triangulation follow the rank order, so its vertex order is
# the identity.  Old and new tetrahedra together bound a 4-simplex, which
# fixes their orientations: the tetrahedron missing ``x`` has sign
# ``kappa (-1)^x`` on the old side and ``-kappa (-1)^x`` on the new side.


def cross_ratio(z0: complex, z1: complex, z2: complex, z3: complex) -> complex:
    """Shape ``w0`` of a tetrahedron with vertices at ``z0..z3`` in vertex order."""
    return (z0 - z3) * (z1 - z2) / ((z0 - z2) * (z1 - z3))


def _solve_vertex(points: list[complex | None], target: complex) -> complex:
    """The missing point making ``cross_ratio(points) == target``."""
    k = next(i for i, p in enumerate(points) if p is None)

    def num_den(q: complex) -> tuple[complex, complex]:
        z = [q if i == k else p for i, p in enumerate(points)]
        return (z[0] - z[3]) * (z[1] - z[2]), (z[0] - z[2]) * (z[1] - z[3])

    (n0, d0), (n1, d1) = num_den(0j), num_den(1 + 0j)
    a, b = n1 - n0, n0  # numerator a q + b
    c, d = d1 - d0, d0  # denominator c q + d
    den = a - target * c
    if abs(den) < 1e-14:
        raise MoveError("degenerate shapes: a bipyramid vertex is sent to infinity")
    return (target * d - b) / den


def ranks_of(missing: int) -> tuple[int, ...]:
    return tuple(r for r in range(5) if r != missing)


def place_bipyramid(old_shapes: dict[int, complex]) -> list[complex]:
    """Positions in the plane of the five ranked vertices, from the old shapes."""
    pos: list[complex | None] = [None] * 5
    first = min(old_shapes)
    r = ranks_of(first)
    for rank, z in zip(r[:3], (0j, 1 + 0j, 0.5 + 1.3j)):
        pos[rank] = z
    pending = dict(old_shapes)
    while pending:
        for miss, w in sorted(pending.items()):
            r = ranks_of(miss)
            known = [pos[x] for x in r]
            if sum(p is None for p in known) <= 1:
                break
        else:
            raise MoveError("old tetrahedra do not determine the bipyramid")
        del pending[miss]
        if any(p is None for p in known):
            k = known.index(None)
            pos[r[k]] = _solve_vertex(known, w)
    if any(p is None for p in pos):
        raise MoveError("old tetrahedra do not determine the bipyramid")
    return pos  # type: ignore[return-value]


def _edge_contributions(missing: int, sign: int, logs: Sequence[complex], f: Sequence[int], c: Sequence[int]):
    r = ranks_of(missing)
    for i, j in itertools.combinations(range(4), 2):
        k = pair_index(i, j)
        yield (r[i], r[j]), k, sign * (logs[k] + 1j * np.pi * f[k]), c[k]


def carry_integers(
    old: dict[int, tuple[int, complex, Sequence[int], Sequence[int]]],
    new: dict[int, tuple[int, complex]],
) -> dict[int, tuple[tuple[int, int, int], tuple[int, int, int]]]:
    """Flattenings and charges of the new tetrahedra conserving ``L`` and ``C``.

    ``old`` maps a missing rank to ``(sign, w0, f, c)``, ``new`` to ``(sign, w0)``.
    An edge without old tetrahedra gets total log-branch 0 and charge 2.
    """
    ipi = 1j * np.pi
    L_old: dict[tuple[int, int], complex] = {}
    C_old: dict[tuple[int, int], int] = {}
    for miss, (sign, w0, f, c) in old.items():
        logs = [principal_log(x) for x in shapes_of(w0)]
        for edge, _, L, C in _edge_contributions(miss, sign, logs, f, c):
            L_old[edge] = L_old.get(edge, 0j) + L
            C_old[edge] = C_old.get(edge, 0) + C
    order = sorted(new)
    n = 3 * len(order)
    new_logs = {m: [principal_log(x) for x in shapes_of(new[m][1])] for m in order}
    f_rows, f_rhs, c_rows, c_rhs, names = [], [], [], [], []
    for i, m in enumerate(order):
        row = [0] * n
        row[3 * i : 3 * i + 3] = [1, 1, 1]
        f_rows.append(row)
        val = -sum(new_logs[m]) / ipi
        if abs(val.imag) > 1e-8 or abs(val.real - round(val.real)) > 1e-8:
            raise MoveError(f"new tetrahedron missing rank {m} has inconsistent logs")
        f_rhs.append(round(val.real))
        c_rows.append(list(row))
        c_rhs.append(1)
        names.append(f"new tet {m} sum")
    for edge in itertools.combinations(range(5), 2):
        row = [0] * n
        crow = [0] * n
        log_part = 0j
        touched = False
        for i, m in enumerate(order):
            sign = new[m][0]
            r = ranks_of(m)
            if edge[0] in r and edge[1] in r:
                k = pair_index(r.index(edge[0]), r.index(edge[1]))
                row[3 * i + k] += sign
                crow[3 * i + k] += 1
                log_part += sign * new_logs[m][k]
                touched = True
        if not touched:
            continue
        val = (L_old.get(edge, 0j) - log_part) / ipi
        if abs(val.imag) > 1e-8 or abs(val.real - round(val.real)) > 1e-8:
            raise MoveError(f"total cross ratio of edge {edge} is not conserved")
        f_rows.append(row)
        f_rhs.append(round(val.real))
        c_rows.append(crow)
        c_rhs.append(C_old.get(edge, 0) + (0 if edge in C_old else 2))
        names.append(f"edge {edge}")
    try:
        fs = solve_integer(f_rows, f_rhs, names).particular
        cs = solve_integer(c_rows, c_rhs, names).particular
    except InfeasibleSystemError as exc:
        raise MoveError(f"no decoration carry for this transit: {exc}") from exc
    return {
        m: (tuple(fs[3 * i : 3 * i + 3]), tuple(cs[3 * i : 3 * i + 3]))  # type: ignore[misc]
        for i, m in enumerate(order)
    }


@dataclass(frozen=True)
class BipyramidSite:
    """Old tetrahedra of a 2-3 move keyed by missing rank, with label to rank maps."""

    old: dict[int, int]  # missing rank -> tet index
    ranks: dict[int, tuple[int, int, int, int]]  # tet index -> rank of each label
    kappa: int

    @property
    def new(self) -> tuple[int, ...]:
        return tuple(r for r in range(5) if r not in self.old)

    def sign(self, missing: int) -> int:
        side = 1 if missing in self.old else -1
        return side * self.kappa * (-1) ** missing


def _kappa(wb: WeakBranching, old: dict[int, int]) -> int:
    kappas = {wb.signs[t] * (-1) ** miss for miss, t in old.items()}
    if len(kappas) != 1:
        raise MoveError("old tetrahedra are not coherently oriented around the site")
    return kappas.pop()


def site_23(tri: Triangulation, wb: WeakBranching, dual_edge: int, apex_first: str = "source") -> BipyramidSite:
    """Ranked bipyramid for a positive move at the face of ``dual_edge``."""
    e = wb.dual_edges[dual_edge]
    (ta, fa), (tb, fb) = e.source, e.target
    if ta == tb:
        raise MoveError("no b-transit at site: the face is glued to its own tetrahedron")
    if e.color != 0:
        raise MoveError("no b-transit at site: the face has nonzero color (apply C-moves first)")
    oa, ob = wb.orders[ta], wb.orders[tb]
    shared = [v for v in oa if v != fa]
    pa, pb = oa.index(fa), ob.index(fb)
    # merge: shared vertices keep their order; each apex sits at its own position
    seq: list[tuple[str, int]] = []
    for j in range(4):
        apexes = []
        if j == pa:
            apexes.append("a")
        if j == pb:
            apexes.append("b")
        if apex_first == "target":
            apexes.reverse()
        seq.extend((x, 0) for x in apexes)
        if j < 3:
            seq.append(("s", j))
    ranks_a = [0] * 4
    ranks_b = [0] * 4
    for rank, (kind, j) in enumerate(seq):
        if kind == "a":
            ranks_a[fa] = rank
        elif kind == "b":
            ranks_b[fb] = rank
        else:
            v = shared[j]
            ranks_a[v] = rank
            ranks_b[e.perm[v]] = rank
    old = {ranks_b[fb]: ta, ranks_a[fa]: tb}
    ranks = {ta: tuple(ranks_a), tb: tuple(ranks_b)}
    return BipyramidSite(old, ranks, _kappa(wb, old))  # type: ignore[arg-type]


def site_32(tri: Triangulation, wb: WeakBranching, edge: int) -> BipyramidSite:
    """Ranked bipyramid for a negative move at the degree-3 ``edge``."""
    inc = tri.edge_classes[edge].incidences
    tets = [t for t, _ in inc]
    if len(inc) != 3 or len(set(tets)) != 3:
        raise MoveError("negative MP needs an edge with three distinct incident tetrahedra")
    parent: dict[tuple[int, int], tuple[int, int]] = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            x = parent[x]
        return x

    ends = {t: ab for t, ab in inc}
    for t, (a, b) in inc:
        for v in range(4):
            find((t, v))
        for f in range(4):
            if f in (a, b):
                continue
            t2, perm = tri.neighbor(t, f)
            if t2 not in ends:
                continue
            for v in range(4):
                if v != f:
                    ra, rb = find((t, v)), find((t2, perm[v]))
                    if ra != rb:
                        parent[ra] = rb
    classes: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for t in tets:
        for v in range(4):
            classes.setdefault(find((t, v)), []).append((t, v))
    if len(classes) != 5:
        raise MoveError("the three tetrahedra around the edge do not form a bipyramid")
    name = {member: i for i, members in enumerate(classes.values()) for member in members}
    before = {i: set() for i in range(5)}
    for t in tets:
        o = [name[(t, v)] for v in wb.orders[t]]
        if len(set(o)) != 4:
            raise MoveError("the three tetrahedra around the edge do not form a bipyramid")
        for i, j in itertools.combinations(range(4), 2):
            before[o[j]].add(o[i])
    total = sorted(range(5), key=lambda i: len(before[i]))
    if [len(before[i]) for i in total] != list(range(5)) or any(
        not before[total[k]] >= set(total[:k]) for k in range(5)
    ):
        raise MoveError("no b-transit at site: vertex orders do not extend to a total order")
    rank = {n: total.index(n) for n in range(5)}
    ranks = {t: tuple(rank[name[(t, v)]] for v in range(4)) for t in tets}
    old = {}
    for t in tets:
        (miss,) = set(range(5)) - set(ranks[t])
        old[miss] = t
    return BipyramidSite(old, ranks, _kappa(wb, old))  # type: ignore[arg-type]


def _mp_surgery(tri: Triangulation, wb: WeakBranching, site: BipyramidSite) -> tuple[Triangulation, dict[int, int], dict[int, int]]:
    """Replace the old tetrahedra by the new ones; return the new triangulation,
    the index map of kept tetrahedra and the index of each new tetrahedron."""
    removed = set(site.old.values())
    kept = [t for t in range(tri.num_tets) if t not in removed]
    index = {t: i for i, t in enumerate(kept)}
    new_index = {m: len(kept) + i for i, m in enumerate(site.new)}
    miss_of = {t: m for m, t in site.old.items()}

    def facet(t: int, f: int) -> tuple[int, int, list[int]] | None:
        """New (tet, face, label map) of an old facet, or None if internal."""
        if t not in removed:
            return index[t], f, [0, 1, 2, 3]
        z = site.ranks[t][f]
        if z in site.old:
            return None
        y = miss_of[t]
        r = ranks_of(z)
        labels = [r.index(site.ranks[t][u]) if u != f else r.index(y) for u in range(4)]
        return new_index[z], r.index(y), labels

    pairings = []
    for p in tri.pairings:
        a, b = facet(p.tet_a, p.face_a), facet(p.tet_b, p.face_b)
        if a is None or b is None:
            if (a is None) != (b is None):
                raise MoveError("internal face glued outside the bipyramid")
            continue
        perm = [0] * 4
        for u in range(4):
            perm[a[2][u]] = b[2][p.perm[u]]
        pairings.append(Pairing(a[0], a[1], b[0], b[1], tuple(perm)))  # type: ignore[arg-type]
    for x, y in itertools.combinations(site.new, 2):
        rx, ry = ranks_of(x), ranks_of(y)
        perm = [0] * 4
        for u, r in enumerate(rx):
            perm[u] = ry.index(x) if r == y else ry.index(r)
        pairings.append(Pairing(new_index[x], rx.index(y), new_index[y], ry.index(x), tuple(perm)))  # type: ignore[arg-type]
    orientations = [tri.orientations[t] for t in kept] + [site.sign(m) for m in site.new]
    return Triangulation(len(orientations), pairings, tri.name, orientations), index, new_index


def _mp_apply(tri: Triangulation, wb: WeakBranching, site: BipyramidSite) -> tuple[Triangulation, WeakBranching, dict[int, int], dict[int, int]]:
    new_tri, index, new_index = _mp_surgery(tri, wb, site)
    orders: list[Perm] = [wb.orders[t] for t in sorted(index, key=index.get)] + [IDENTITY] * len(site.new)
    report = validate(new_tri)
    if not report.ok:
        raise AssertionError(f"transit produced an invalid triangulation: {report.problems}")
    new_wb = induce_prebranching(new_tri, orders)
    return new_tri, new_wb, index, new_index


def apply_mp_transit(
    tri: Triangulation, wb: WeakBranching, site: int, direction: int = 1
) -> tuple[Triangulation, WeakBranching, TransitRecord]:
    """Positive (``direction=1``, ``site`` a dual edge) or negative (``-1``, ``site``
    an edge of degree 3) 2-3 move lifted to a b-transit of the sub-pattern."""
    new_tri, new_wb, record, _ = _mp_transit(tri, wb, site, direction)
    return new_tri, new_wb, record


def _mp_transit(tri, wb, site, direction):
    if direction == 1:
        bp = site_23(tri, wb, site)
        kind = "MP23"
    elif direction == -1:
        bp = site_32(tri, wb, site)
        kind = "MP32"
    else:
        raise MoveError("direction must be +1 or -1")
    new_tri, new_wb, index, new_index = _mp_apply(tri, wb, bp)
    carry = {"kept": index, "new": new_index, "old": dict(bp.old), "ranks": dict(bp.ranks)}
    return new_tri, new_wb, TransitRecord(kind, (site,), None, carry), bp


def mp_transit(dt: DecoratedTriangulation, site: int, direction: int = 1) -> tuple[DecoratedTriangulation, TransitRecord]:
    """2-3 move carrying shapes, flattenings and charges."""
    new_tri, new_wb, record, bp = _mp_transit(dt.tri, dt.wb, site, direction)
    index, new_index = record.carry["kept"], record.carry["new"]
    old_shapes = {m: dt.point.w0[t] for m, t in bp.old.items()}
    pos = place_bipyramid(old_shapes)
    new_shapes = {}
    for m in bp.new:
        w = cross_ratio(*(pos[r] for r in ranks_of(m)))
        if not np.isfinite(w) or abs(w) < 1e-12 or abs(w - 1) < 1e-12:
            raise MoveError(f"the new tetrahedron missing rank {m} is degenerate")
        new_shapes[m] = complex(w)
    old = {m: (dt.wb.signs[t], dt.point.w0[t], dt.f.values[t], dt.c.values[t]) for m, t in bp.old.items()}
    ints = carry_integers(old, {m: (bp.sign(m), new_shapes[m]) for m in bp.new})
    s = new_tri.num_tets
    w0: list[complex] = [0j] * s
    fs: list = [None] * s
    cs: list = [None] * s
    for t, i in index.items():
        w0[i], fs[i], cs[i] = dt.point.w0[t], dt.f.values[t], dt.c.values[t]
    for m, i in new_index.items():
        w0[i] = new_shapes[m]
        fs[i], cs[i] = ints[m]
    out = DecoratedTriangulation(new_tri, new_wb, CrossRatioPoint(tuple(w0)), Flattening(tuple(fs)), Charge(tuple(cs)))
    return out, record


# -- bubble moves -----------------------------------------------------------------

DEFAULT_BUBBLE_SHAPE = complex(0.5, 0.8660254037844386)


def apply_bubble(
    tri: Triangulation, wb: WeakBranching, site: int, direction: int = 1
) -> tuple[Triangulation, WeakBranching, TransitRecord]:
    """Positive bubble (``site`` a dual edge) or negative bubble (``site`` a vertex class).

    The positive move opens the face into two tetrahedra ``P`` and ``P'``
    with the same labels, glued along their three faces through the new
    vertex.  Both carry the vertex order of the source side of the face with
    the new vertex inserted at the least admissible position, so the face
    towards the target tetrahedron inherits the old color.
    """
    if direction == 1:
        return _bubble_plus(tri, wb, site)
    if direction == -1:
        return _bubble_minus(tri, wb, site)
    raise MoveError("direction must be +1 or -1")


def _bubble_plus(tri: Triangulation, wb: WeakBranching, dual_edge: int):
    e = wb.dual_edges[dual_edge]
    (t1, f1), (t2, f2) = e.source, e.target
    face = [v for v in wb.orders[t1] if v != f1]
    s = tri.num_tets
    P, P2 = s, s + 1
    last_error: Exception | None = None
    for pos in range(4):
        label = {}  # t1 label -> P label
        j = 0
        for k in range(4):
            if k == pos:
                continue
            label[face[j]] = k
            j += 1
        label[f1] = pos
        perm1 = [0] * 4
        for u, k in label.items():
            perm1[u] = k
        perm2 = [0] * 4
        for u, k in label.items():
            perm2[k] = e.perm[u]
        sign_p = tri.orientations[t1] if parity(perm1) else -tri.orientations[t1]
        near = Pairing(t1, f1, P, pos, tuple(perm1))  # type: ignore[arg-type]
        far = Pairing(P2, pos, t2, f2, tuple(perm2))  # type: ignore[arg-type]
        if tri.pairings[e.index].tet_a != t1 or tri.pairings[e.index].face_a != f1:
            near, far = Pairing(t2, f2, P2, pos, invert(perm2)), Pairing(P, pos, t1, f1, invert(perm1))
        # the face keeps its slot in the pairing list so that the inverse move restores it
        pairings = list(tri.pairings)
        pairings[e.index] = near
        pairings += [far] + [Pairing(P, k, P2, k, IDENTITY) for k in range(4) if k != pos]
        new_tri = Triangulation(s + 2, pairings, tri.name, list(tri.orientations) + [sign_p, -sign_p])
        try:
            new_wb = induce_prebranching(new_tri, list(wb.orders) + [IDENTITY, IDENTITY])
        except NotWeakBranchingError as exc:
            last_error = exc
            continue
        if count_q(new_tri, new_wb) != count_q(tri, wb):
            raise AssertionError("bubble changed the number of color-2 edges")
        record = TransitRecord("bubble+", (dual_edge,), None, {"position": pos, "tets": (P, P2)})
        return new_tri, new_wb, record
    raise MoveError(f"no branched bubble at dual edge {dual_edge}: {last_error}")


def _bubble_minus(tri: Triangulation, wb: WeakBranching, vertex: int):
    vc = tri.vertex_classes[vertex]
    if vc.ideal or len(vc.members) != 2:
        raise MoveError("negative bubble needs a manifold vertex with exactly two incident corners")
    (P, a), (P2, b) = vc.members
    if P == P2:
        raise MoveError("negative bubble needs two distinct tetrahedra")
    internal = None
    for f in range(4):
        if f == a:
            continue
        t, perm = tri.neighbor(P, f)
        if t != P2 or perm[a] != b:
            raise MoveError("the two tetrahedra at the vertex do not form a pillow")
        internal = perm
    t1, perm1 = tri.neighbor(P, a)
    t2, perm2 = tri.neighbor(P2, b)
    if {t1, t2} & {P, P2}:
        raise MoveError("the pillow is glued to itself")
    kept = [t for t in range(tri.num_tets) if t not in (P, P2)]
    index = {t: i for i, t in enumerate(kept)}
    inv1 = invert(perm1)
    perm = tuple(perm2[internal[inv1[u]]] for u in range(4))
    f1, f2 = perm1[a], perm2[b]
    merged = {
        (t1, f1): Pairing(index[t1], f1, index[t2], f2, perm),  # type: ignore[arg-type]
        (t2, f2): Pairing(index[t2], f2, index[t1], f1, invert(perm)),
    }
    pairings = []
    placed = False
    for p in tri.pairings:
        ends = [(p.tet_a, p.face_a), (p.tet_b, p.face_b)]
        inside = [t in (P, P2) for t, _ in ends]
        if not any(inside):
            pairings.append(Pairing(index[p.tet_a], p.face_a, index[p.tet_b], p.face_b, p.perm))
        elif not all(inside) and not placed:
            # the merged face takes the slot of the first pillow face met
            pairings.append(merged[ends[inside.index(False)]])
            placed = True
    new_tri = Triangulation(len(kept), pairings, tri.name, [tri.orientations[t] for t in kept])
    new_wb = induce_prebranching(new_tri, [wb.orders[t] for t in kept])
    return new_tri, new_wb, TransitRecord("bubble-", (vertex,), None, {"kept": index})


def bubble(
    dt: DecoratedTriangulation, site: int, direction: int = 1, shape: complex = DEFAULT_BUBBLE_SHAPE
) -> tuple[DecoratedTriangulation, TransitRecord]:
    """Bubble move carrying decorations.

    The two new tetrahedra share the shape ``shape``, a flattening and a
    charge, so every edge keeps its total cross ratio and log-branch; the
    pillow contributes ``N`` times the identity to the state sum.
    """
    new_tri, new_wb, record = apply_bubble(dt.tri, dt.wb, site, direction)
    if direction == -1:
        index = record.carry["kept"]
        keep = sorted(index, key=index.get)
        point = CrossRatioPoint(tuple(dt.point.w0[t] for t in keep))
        f = Flattening(tuple(dt.f.values[t] for t in keep))
        c = Charge(tuple(dt.c.values[t] for t in keep))
        return DecoratedTriangulation(new_tri, new_wb, point, f, c), record
    logs = [principal_log(x) for x in shapes_of(shape)]
    f0 = round((-sum(logs) / (1j * np.pi)).real)
    fp = (f0, 0, 0)
    cp = (1, 0, 0)
    point = CrossRatioPoint(tuple(dt.point.w0) + (complex(shape), complex(shape)))
    f = Flattening(tuple(dt.f.values) + (fp, fp))
    c = Charge(tuple(dt.c.values) + (cp, cp))
    return DecoratedTriangulation(new_tri, new_wb, point, f, c), record


def apply_record(
    tri: Triangulation, wb: WeakBranching, record: TransitRecord
) -> tuple[Triangulation, WeakBranching, TransitRecord]:
    """Replay one move on the combinatorial data; the returned record carries the bookkeeping."""
    kind = record.kind
    if kind == "Cmove":
        if record.beta is None or len(record.site) != 1:
            raise MoveError("a C-move record needs a tetrahedron and a permutation")
        new_wb = apply_c_move(tri, wb, record.site[0], record.beta)
        return tri, new_wb, record
    if kind == "circuit":
        return tri, apply_circuit_move(tri, wb, record.site), record
    if kind in ("MP23", "MP32"):
        return apply_mp_transit(tri, wb, record.site[0], 1 if kind == "MP23" else -1)
    if kind in ("bubble+", "bubble-"):
        return apply_bubble(tri, wb, record.site[0], 1 if kind == "bubble+" else -1)
    raise MoveError(f"unknown move kind {kind!r}")
