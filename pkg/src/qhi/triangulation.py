"""Triangulations, pre-branchings, weak branchings and their edge colors.

A triangulation is a finite set of abstract tetrahedra with vertices
labelled ``0..3`` together with a complete system of face pairings.
Tetrahedron ``t`` has face ``f`` opposite vertex ``f``.  A pairing is a
vertex correspondence ``perm`` sending the vertices of ``tet_a`` to the
vertices of ``tet_b`` with ``perm[face_a] == face_b``.

Each tetrahedron carries an ambient orientation ``+1`` or ``-1`` saying
whether the label order ``(0, 1, 2, 3)`` is positively oriented.  Gluings
of an oriented manifold reverse the boundary orientation of faces, which
for label permutations means: ``perm`` is odd iff both tetrahedra carry
the same orientation.

A vertex order on a tetrahedron is a tuple ``(v0, v1, v2, v3)`` of labels.
The face ``F_j`` is the face opposite ``v_j``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

Perm = tuple[int, int, int, int]

# Opposite-edge pair index of an edge given by b-order positions.
# Pair 0 is E0 = [v0, v1] with [v2, v3]; pair 1 is E1 = [v1, v2] with
# [v0, v3]; pair 2 is E2 = [v0, v2] with [v1, v3].
POSITION_PAIR = {
    (0, 1): 0, (2, 3): 0,
    (1, 2): 1, (0, 3): 1,
    (0, 2): 2, (1, 3): 2,
}


class TriangulationError(ValueError):
    """Structural problem in raw gluing data."""


class NotWeakBranchingError(ValueError):
    """The vertex orders do not induce matching co-orientations."""


def parity(p: Sequence[int]) -> int:
    """Return 0 for an even permutation and 1 for an odd one."""
    inversions = sum(1 for i, j in itertools.combinations(range(len(p)), 2) if p[i] > p[j])
    return inversions % 2


def perm_sign(p: Sequence[int]) -> int:
    return -1 if parity(p) else 1


def invert(p: Sequence[int]) -> Perm:
    q = [0] * len(p)
    for i, x in enumerate(p):
        q[x] = i
    return tuple(q)  # type: ignore[return-value]


def compose(p: Sequence[int], q: Sequence[int]) -> Perm:
    """Return ``p o q`` (apply ``q`` first)."""
    return tuple(p[q[i]] for i in range(len(q)))  # type: ignore[return-value]


def pair_index(a: int, b: int) -> int:
    """Opposite-edge pair index for b-order positions ``a != b``."""
    return POSITION_PAIR[(min(a, b), max(a, b))]


@dataclass(frozen=True)
class Pairing:
    tet_a: int
    face_a: int
    tet_b: int
    face_b: int
    perm: Perm

    def to_json(self) -> dict:
        return {
            "tet_a": self.tet_a,
            "face_a": self.face_a,
            "tet_b": self.tet_b,
            "face_b": self.face_b,
            "perm": list(self.perm),
        }


@dataclass(frozen=True)
class EdgeClass:
    """An edge of the triangulation.

    ``incidences`` lists every abstract edge ``(tet, (a, b))`` mapped to this
    edge, with ``a`` always sent to the same endpoint.  ``faces`` lists the
    face crossings ``(tet, face)`` in the cyclic order of the walk.
    """

    index: int
    incidences: tuple[tuple[int, tuple[int, int]], ...]

    @property
    def degree(self) -> int:
        return len(self.incidences)


@dataclass(frozen=True)
class VertexClass:
    index: int
    members: tuple[tuple[int, int], ...]
    euler_characteristic: int

    @property
    def ideal(self) -> bool:
        return self.euler_characteristic != 2


@dataclass
class ValidationReport:
    problems: list[str] = field(default_factory=list)
    num_edges: int = 0
    num_vertices: int = 0
    num_cusps: int = 0
    num_manifold_vertices: int = 0
    ideal: bool = False

    @property
    def ok(self) -> bool:
        return not self.problems


class Triangulation:
    """An oriented triangulation given by face pairings."""

    def __init__(
        self,
        num_tets: int,
        pairings: Iterable[Pairing],
        name: str = "",
        orientations: Sequence[int] | None = None,
    ) -> None:
        self.num_tets = int(num_tets)
        self.pairings: tuple[Pairing, ...] = tuple(pairings)
        self.name = name
        if orientations is None:
            orientations = [1] * self.num_tets
        self.orientations: tuple[int, ...] = tuple(int(o) for o in orientations)
        self._gluing: dict[tuple[int, int], tuple[int, Perm, int]] | None = None

    # -- structure -------------------------------------------------------

    def _build_gluing(self) -> dict[tuple[int, int], tuple[int, Perm, int]]:
        if len(self.orientations) != self.num_tets:
            raise TriangulationError("orientation list length differs from tet count")
        glu: dict[tuple[int, int], tuple[int, Perm, int]] = {}
        for idx, p in enumerate(self.pairings):
            perm = tuple(int(x) for x in p.perm)
            if sorted(perm) != [0, 1, 2, 3]:
                raise TriangulationError(f"pairing {idx}: perm {perm} is not a permutation")
            for t, f in ((p.tet_a, p.face_a), (p.tet_b, p.face_b)):
                if not (0 <= t < self.num_tets and 0 <= f < 4):
                    raise TriangulationError(f"pairing {idx}: facet ({t}, {f}) out of range")
            if perm[p.face_a] != p.face_b:
                raise TriangulationError(
                    f"pairing {idx}: perm sends face {p.face_a} to {perm[p.face_a]}, not {p.face_b}"
                )
            if (p.tet_a, p.face_a) == (p.tet_b, p.face_b):
                raise TriangulationError(f"pairing {idx}: facet ({p.tet_a}, {p.face_a}) paired with itself")
            for key, val in (
                ((p.tet_a, p.face_a), (p.tet_b, perm, idx)),
                ((p.tet_b, p.face_b), (p.tet_a, invert(perm), idx)),
            ):
                if key in glu:
                    raise TriangulationError(f"facet {key} appears in more than one pairing")
                glu[key] = val  # type: ignore[assignment]
        for t in range(self.num_tets):
            for f in range(4):
                if (t, f) not in glu:
                    raise TriangulationError(f"unpaired facet ({t}, {f})")
        return glu

    @property
    def gluing(self) -> dict[tuple[int, int], tuple[int, Perm, int]]:
        """Map ``(tet, face) -> (other tet, vertex map, pairing index)``."""
        if self._gluing is None:
            self._gluing = self._build_gluing()
        return self._gluing

    def neighbor(self, tet: int, face: int) -> tuple[int, Perm]:
        t2, perm, _ = self.gluing[(tet, face)]
        return t2, perm

    @cached_property
    def edge_classes(self) -> tuple[EdgeClass, ...]:
        seen: set[tuple[int, tuple[int, int]]] = set()
        classes: list[EdgeClass] = []
        for t in range(self.num_tets):
            for a, b in itertools.combinations(range(4), 2):
                if (t, (a, b)) in seen:
                    continue
                walk = self.walk_edge(t, a, b)
                for tt, (x, y) in walk:
                    seen.add((tt, (min(x, y), max(x, y))))
                classes.append(EdgeClass(len(classes), tuple(walk)))
        return tuple(classes)

    def walk_edge(self, t: int, a: int, b: int) -> list[tuple[int, tuple[int, int]]]:
        """Abstract edges met while walking around the edge ``[a, b]`` of ``t``."""
        c, d = (v for v in range(4) if v not in (a, b))
        start = (t, a, b, c, d)
        state = start
        out: list[tuple[int, tuple[int, int]]] = []
        limit = 6 * self.num_tets + 1
        while True:
            t0, a0, b0, c0, d0 = state
            out.append((t0, (a0, b0)))
            t1, p = self.neighbor(t0, c0)
            a1, b1, c1 = p[a0], p[b0], p[c0]
            x = next(v for v in range(4) if v not in (a1, b1, c1))
            state = (t1, a1, b1, x, c1)
            if state == start:
                return out
            if len(out) > limit:
                raise TriangulationError(f"edge walk from tet {t} edge ({a}, {b}) does not close")

    @cached_property
    def _edge_lookup(self) -> dict[tuple[int, int, int], tuple[int, int]]:
        table = {}
        for e in self.edge_classes:
            for t, (a, b) in e.incidences:
                table[(t, a, b)] = (e.index, 1)
                table[(t, b, a)] = (e.index, -1)
        return table

    def edge_of(self, tet: int, a: int, b: int) -> int:
        """Index of the edge class containing the abstract edge ``[a, b]``."""
        return self._edge_lookup[(tet, a, b)][0]

    def edge_orientation(self, tet: int, a: int, b: int) -> int:
        """``+1`` if ``a -> b`` agrees with the reference direction of its edge class."""
        return self._edge_lookup[(tet, a, b)][1]

    @cached_property
    def vertex_classes(self) -> tuple[VertexClass, ...]:
        parent: dict[tuple[int, int], tuple[int, int]] = {}

        def find(x):
            parent.setdefault(x, x)
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for t in range(self.num_tets):
            for v in range(4):
                find((t, v))
        for (t, f), (t2, p, _) in self.gluing.items():
            for v in range(4):
                if v != f:
                    ra, rb = find((t, v)), find((t2, p[v]))
                    if ra != rb:
                        parent[ra] = rb
        groups: dict[tuple[int, int], list[tuple[int, int]]] = {}
        for t in range(self.num_tets):
            for v in range(4):
                groups.setdefault(find((t, v)), []).append((t, v))
        out = []
        for members in sorted(groups.values()):
            member_set = set(members)
            triangles = len(members)
            # link vertices are edge ends: (edge class, end) pairs
            ends = set()
            for t, v in members:
                for u in range(4):
                    if u != v:
                        e, o = self._edge_lookup[(t, v, u)]
                        ends.add((e, o))
            chi = len(ends) - 3 * triangles // 2 + triangles
            assert all((t, v) in member_set for t, v in members)
            out.append(VertexClass(len(out), tuple(members), chi))
        return tuple(out)

    def vertex_class_of(self, tet: int, v: int) -> int:
        for vc in self.vertex_classes:
            if (tet, v) in vc.members:
                return vc.index
        raise KeyError((tet, v))

    # -- serialization ---------------------------------------------------

    def to_json(self, orders: Sequence[Sequence[int]] | None = None, **extra) -> dict:
        data = {
            "name": self.name,
            "tets": self.num_tets,
            "orientations": list(self.orientations),
            "pairings": [p.to_json() for p in self.pairings],
        }
        if orders is not None:
            data["orders"] = [list(o) for o in orders]
        data.update(extra)
        return data

    @classmethod
    def from_json(cls, data: dict) -> "Triangulation":
        try:
            pairings = [
                Pairing(
                    int(p["tet_a"]), int(p["face_a"]), int(p["tet_b"]), int(p["face_b"]),
                    tuple(int(x) for x in p["perm"]),  # type: ignore[arg-type]
                )
                for p in data["pairings"]
            ]
            return cls(int(data["tets"]), pairings, data.get("name", ""), data.get("orientations"))
        except (KeyError, TypeError) as exc:
            raise TriangulationError(f"malformed triangulation data: {exc!r}") from exc

    def __repr__(self) -> str:
        return f"Triangulation({self.name!r}, tets={self.num_tets})"


def validate(tri: Triangulation) -> ValidationReport:
    """Check the structural invariants of ``tri``.

    Malformed pairing tables raise :class:`TriangulationError`; violated
    invariants of well-formed data are listed in the report.
    """
    glu = tri.gluing
    report = ValidationReport()
    for idx, p in enumerate(tri.pairings):
        same = tri.orientations[p.tet_a] == tri.orientations[p.tet_b]
        if parity(p.perm) != (1 if same else 0):
            report.problems.append(
                f"pairing {idx} (facet ({p.tet_a}, {p.face_a})) does not reverse the face orientation"
            )
    del glu
    try:
        edges = tri.edge_classes
    except TriangulationError as exc:
        report.problems.append(str(exc))
        return report
    verts = tri.vertex_classes
    report.num_edges = len(edges)
    report.num_vertices = len(verts)
    report.num_cusps = sum(1 for v in verts if v.ideal)
    report.num_manifold_vertices = sum(1 for v in verts if not v.ideal)
    report.ideal = all(v.ideal for v in verts)
    for v in verts:
        if v.euler_characteristic not in (0, 2):
            report.problems.append(
                f"vertex class {v.index} has link Euler characteristic {v.euler_characteristic}"
            )
    if report.ideal and report.num_cusps == 1 and all(v.euler_characteristic == 0 for v in verts):
        if len(edges) != tri.num_tets:
            report.problems.append(
                f"one-cusped ideal triangulation has {len(edges)} edges but {tri.num_tets} tets"
            )
    return report


# -- branchings ---------------------------------------------------------


@dataclass(frozen=True)
class DualEdge:
    """An oriented edge of the dual graph, from an outgoing to an ingoing face."""

    index: int
    source: tuple[int, int]
    target: tuple[int, int]
    perm: Perm
    color: int


@dataclass(frozen=True)
class EdgeRole:
    role: str  # "diagonal-over", "diagonal-under", "square-A", "square-B"
    pair: int
    direction: tuple[int, int] | None = None  # square edges: (tail, head) labels


@dataclass(frozen=True)
class WeakBranching:
    orders: tuple[Perm, ...]
    signs: tuple[int, ...]
    outgoing: tuple[tuple[bool, bool, bool, bool], ...]
    dual_edges: tuple[DualEdge, ...]

    @property
    def colors(self) -> tuple[int, ...]:
        return tuple(e.color for e in self.dual_edges)

    def position(self, tet: int, v: int) -> int:
        return self.orders[tet].index(v)

    def pair_of(self, tet: int, a: int, b: int) -> int:
        """Opposite-edge pair index (0, 1, 2) of the abstract edge ``[a, b]``."""
        return pair_index(self.position(tet, a), self.position(tet, b))

    def labels_of_pair(self, tet: int, k: int) -> tuple[tuple[int, int], tuple[int, int]]:
        o = self.orders[tet]
        first, second = [(x, y) for (x, y), kk in POSITION_PAIR.items() if kk == k]
        return (o[first[0]], o[first[1]]), (o[second[0]], o[second[1]])

    def is_genuine(self) -> bool:
        return all(e.color == 0 for e in self.dual_edges)


def _is_outgoing(position: int, sign: int) -> bool:
    # F_j with the induced order is oriented as (-1)^j times the boundary
    # orientation of the b-oriented simplex, so F_0 and F_2 are outgoing
    # when b agrees with the ambient orientation.
    return (position % 2 == 0) if sign == 1 else (position % 2 == 1)


def induce_prebranching(tri: Triangulation, orders: Sequence[Sequence[int]]) -> WeakBranching:
    """Build the weak branching induced by per-tetrahedron vertex orders."""
    if len(orders) != tri.num_tets:
        raise NotWeakBranchingError(f"expected {tri.num_tets} vertex orders, got {len(orders)}")
    ords: list[Perm] = []
    for t, o in enumerate(orders):
        o = tuple(int(x) for x in o)
        if sorted(o) != [0, 1, 2, 3]:
            raise NotWeakBranchingError(f"tet {t}: {o} is not an order of the vertices")
        ords.append(o)  # type: ignore[arg-type]
    signs = tuple(tri.orientations[t] * perm_sign(ords[t]) for t in range(tri.num_tets))
    outgoing = tuple(
        tuple(_is_outgoing(ords[t].index(f), signs[t]) for f in range(4)) for t in range(tri.num_tets)
    )
    dual = []
    for idx, p in enumerate(tri.pairings):
        a, b, perm = (p.tet_a, p.face_a), (p.tet_b, p.face_b), p.perm
        out_a, out_b = outgoing[a[0]][a[1]], outgoing[b[0]][b[1]]
        if out_a == out_b:
            raise NotWeakBranchingError(
                f"not a weak branching: co-orientations mismatch across pairing {idx} "
                f"(facets {a} and {b})"
            )
        if not out_a:
            a, b, perm = b, a, invert(perm)
        color = _color(ords, a, b, perm)
        dual.append(DualEdge(idx, a, b, perm, color))  # type: ignore[arg-type]
    return WeakBranching(tuple(ords), signs, outgoing, tuple(dual))  # type: ignore[arg-type]


def _color(ords: Sequence[Perm], src: tuple[int, int], dst: tuple[int, int], perm: Perm) -> int:
    (ta, fa), (tb, fb) = src, dst
    ui = [v for v in ords[ta] if v != fa]
    uf = [v for v in ords[tb] if v != fb]
    tau = [uf.index(perm[x]) for x in ui]
    r = tau[0]
    if tau != [(j + r) % 3 for j in range(3)]:
        raise AssertionError(f"odd face transition {tau} between {src} and {dst}: corrupted data")
    # the transition is read from the ingoing face back to the outgoing one
    return (-r) % 3


def edge_colors(tri: Triangulation, wb: WeakBranching) -> tuple[int, ...]:
    """Recompute the colors r(e) of every pairing from the vertex orders."""
    return tuple(_color(wb.orders, e.source, e.target, e.perm) for e in wb.dual_edges)


def count_q(tri: Triangulation, wb: WeakBranching) -> int:
    return sum(1 for r in edge_colors(tri, wb) if r == 2)


def edge_roles(tri: Triangulation, wb: WeakBranching) -> dict[tuple[int, tuple[int, int]], EdgeRole]:
    """Classify every abstract edge as diagonal (over/under) or square (A/B)."""
    roles = {}
    for t in range(tri.num_tets):
        o, s = wb.orders[t], wb.signs[t]
        over, under = ((1, 3), (0, 2)) if s == 1 else ((0, 2), (1, 3))
        a_pair = 1 if s == 1 else 0
        square_cycle = [(0, 1), (1, 2), (2, 3), (3, 0)]
        for x, y in itertools.combinations(range(4), 2):
            key = (t, (min(o[x], o[y]), max(o[x], o[y])))
            k = pair_index(x, y)
            if (x, y) == over:
                roles[key] = EdgeRole("diagonal-over", k)
            elif (x, y) == under:
                roles[key] = EdgeRole("diagonal-under", k)
            else:
                tail, head = next(c for c in square_cycle if set(c) == {x, y})
                kind = "square-A" if k == a_pair else "square-B"
                roles[key] = EdgeRole(kind, k, (o[tail], o[head]))
    return roles


def diagonal_parity_violations(tri: Triangulation, wb: WeakBranching) -> list[int]:
    """Edge classes with an odd number of incident diagonal abstract edges."""
    roles = edge_roles(tri, wb)
    bad = []
    for e in tri.edge_classes:
        n = sum(
            1 for t, (a, b) in e.incidences
            if roles[(t, (min(a, b), max(a, b)))].role.startswith("diagonal")
        )
        if n % 2:
            bad.append(e.index)
    return bad


def find_weak_branchings(tri: Triangulation, limit: int | None = None) -> list[WeakBranching]:
    """Enumerate weak branchings by brute force over vertex orders."""
    found = []
    all_orders = list(itertools.permutations(range(4)))
    for choice in itertools.product(all_orders, repeat=tri.num_tets):
        try:
            found.append(induce_prebranching(tri, choice))
        except NotWeakBranchingError:
            continue
        if limit is not None and len(found) >= limit:
            break
    return found


# -- files -------------------------------------------------------------

CENSUS_DIR = Path(__file__).resolve().parent / "census"


def load(path_or_name: str | Path) -> tuple[Triangulation, WeakBranching | None, dict]:
    """Load a triangulation file or a bundled census name such as ``"m003"``."""
    path = Path(path_or_name)
    if not path.exists():
        candidate = CENSUS_DIR / f"{path_or_name}.json"
        if candidate.exists():
            path = candidate
        else:
            raise FileNotFoundError(f"no triangulation file or census entry {path_or_name!r}")
    data = json.loads(path.read_text())
    tri = Triangulation.from_json(data)
    wb = induce_prebranching(tri, data["orders"]) if "orders" in data else None
    return tri, wb, data


def save(path: str | Path, tri: Triangulation, wb: WeakBranching | None = None, **extra) -> None:
    data = tri.to_json(wb.orders if wb is not None else None, **extra)
    Path(path).write_text(json.dumps(data, indent=2) + "\n")
