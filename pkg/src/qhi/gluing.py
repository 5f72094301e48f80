"""Gluing equations, their numerical solution, volume and cusp holonomies.

Shapes are recorded in branching coordinates: tetrahedron ``t`` carries
``w0`` on the pair ``E0 = {[v0 v1], [v2 v3]}``, ``w1 = 1 / (1 - w0)`` on
``E1 = {[v1 v2], [v0 v3]}`` and ``w2 = 1 - 1 / w0`` on
``E2 = {[v0 v2], [v1 v3]}``.  The ambient cross ratio of an abstract edge
is ``w ** sign`` where ``sign`` is the branching sign of its tetrahedron.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dilog import bloch_wigner
from .triangulation import Triangulation, WeakBranching, parity

DEFAULT_TOL = 1e-12
MAX_ITER = 200
GUARD_RADIUS = 1e-9


class SolverError(RuntimeError):
    """Newton iteration failed to converge."""


class DegenerateTetrahedronError(SolverError):
    """An iterate came too close to ``{0, 1, inf}``."""


def shapes_of(w0: complex) -> tuple[complex, complex, complex]:
    return (w0, 1 / (1 - w0), 1 - 1 / w0)


def principal_log(z: complex) -> complex:
    """Logarithm with imaginary part in ``(-pi, pi]``."""
    val = cmath.log(z)
    if val.imag == -math.pi:
        val = complex(val.real, math.pi)
    return val


def reduce_log(x: complex) -> complex:
    """Reduce the imaginary part of ``x`` into ``(-pi, pi]``."""
    n = math.floor((x.imag + math.pi) / (2 * math.pi))
    y = complex(x.real, x.imag - 2 * math.pi * n)
    if y.imag <= -math.pi:
        y += 2j * math.pi
    return y


# -- equations ------------------------------------------------------------


@dataclass(frozen=True)
class EquationSystem:
    """Edge equations ``prod_(t, k) w_k^t ** exponents[e, t, k] = 1``."""

    exponents: np.ndarray  # shape (edges, tets, 3), integer
    signs: tuple[int, ...]

    @property
    def num_equations(self) -> int:
        return self.exponents.shape[0]

    @property
    def num_tets(self) -> int:
        return self.exponents.shape[1]

    def monomials(self) -> list[dict[tuple[int, int], int]]:
        """Nonzero exponents ``{(tet, k): power}`` of each edge equation."""
        out = []
        for row in self.exponents:
            out.append({(t, k): int(row[t, k]) for t in range(row.shape[0]) for k in range(3) if row[t, k]})
        return out

    def log_residuals(self, w0: Sequence[complex]) -> np.ndarray:
        logs = np.array([[principal_log(x) for x in shapes_of(w)] for w in w0])
        raw = np.einsum("etk,tk->e", self.exponents, logs)
        return np.array([reduce_log(complex(r)) for r in raw])

    def jacobian(self, w0: Sequence[complex]) -> np.ndarray:
        d = np.array([[1 / w, 1 / (1 - w), 1 / (w * (w - 1))] for w in w0])
        return np.einsum("etk,tk->et", self.exponents, d)

    def edge_products(self, w0: Sequence[complex]) -> np.ndarray:
        sh = np.array([shapes_of(w) for w in w0])
        return np.array([np.prod(sh ** row) for row in self.exponents])


def build_equations(tri: Triangulation, wb: WeakBranching) -> EquationSystem:
    exps = np.zeros((len(tri.edge_classes), tri.num_tets, 3), dtype=int)
    for e in tri.edge_classes:
        for t, (a, b) in e.incidences:
            exps[e.index, t, wb.pair_of(t, a, b)] += wb.signs[t]
    return EquationSystem(exps, wb.signs)


# -- points ------------------------------------------------------------------


@dataclass(frozen=True)
class CrossRatioPoint:
    w0: tuple[complex, ...]
    iterations: int = 0
    residual: float = 0.0

    @property
    def shapes(self) -> np.ndarray:
        return np.array([shapes_of(w) for w in self.w0])

    @property
    def logs(self) -> np.ndarray:
        return np.array([[principal_log(x) for x in shapes_of(w)] for w in self.w0])

    def conjugate(self) -> "CrossRatioPoint":
        return CrossRatioPoint(tuple(w.conjugate() for w in self.w0))

    def to_json(self) -> dict:
        logs = self.logs
        return {
            "w0": [[w.real, w.imag] for w in self.w0],
            "log_w0": [[l.real, l.imag] for l in logs[:, 0]],
            "log_w1": [[l.real, l.imag] for l in logs[:, 1]],
        }

    @classmethod
    def from_json(cls, data: dict) -> "CrossRatioPoint":
        return cls(tuple(complex(a, b) for a, b in data["w0"]))


def _guard(w0: np.ndarray) -> None:
    for t, w in enumerate(w0):
        if abs(w) < GUARD_RADIUS or abs(w - 1) < GUARD_RADIUS or abs(w) > 1 / GUARD_RADIUS:
            raise DegenerateTetrahedronError(f"degenerate tetrahedron: tet {t} has w0 = {w}")


def solve(
    system: EquationSystem,
    guess: Sequence[complex],
    tol: float = DEFAULT_TOL,
    max_iter: int = MAX_ITER,
    extra: Sequence[tuple[np.ndarray, complex]] = (),
) -> CrossRatioPoint:
    """Damped Newton iteration on the log residuals of the edge equations.

    ``extra`` holds additional equations ``sum_(t, k) E[t, k] log w_k^t =
    target`` (for instance a prescribed cusp holonomy) used for path
    following.
    """
    w = np.array(guess, dtype=complex)
    if w.shape != (system.num_tets,):
        raise ValueError(f"guess needs {system.num_tets} entries")
    _guard(w)

    def residual(x: np.ndarray) -> np.ndarray:
        r = list(system.log_residuals(x))
        if extra:
            logs = np.array([[principal_log(s) for s in shapes_of(v)] for v in x])
            for E, target in extra:
                r.append(reduce_log(complex(np.sum(E * logs)) - target))
        return np.array(r)

    def jac(x: np.ndarray) -> np.ndarray:
        J = system.jacobian(x)
        if extra:
            d = np.array([[1 / v, 1 / (1 - v), 1 / (v * (v - 1))] for v in x])
            J = np.vstack([J] + [np.sum(E * d, axis=1)[None, :] for E, _ in extra])
        return J

    r = residual(w)
    norm = float(np.max(np.abs(r)))
    for it in range(1, max_iter + 1):
        if norm < tol:
            return CrossRatioPoint(tuple(complex(x) for x in w), it - 1, norm)
        step = -np.linalg.pinv(jac(w)) @ r
        lam = 1.0
        while True:
            cand = w + lam * step
            ok = all(abs(v) > GUARD_RADIUS and abs(v - 1) > GUARD_RADIUS for v in cand)
            if ok:
                r_new = residual(cand)
                n_new = float(np.max(np.abs(r_new)))
                if n_new < norm or lam < 1e-6:
                    break
            lam /= 2
            if lam < 1e-9:
                raise SolverError(f"line search failed; residual {norm:.3e}")
        w, r, norm = cand, r_new, n_new
        _guard(w)
    if norm < tol:
        return CrossRatioPoint(tuple(complex(x) for x in w), max_iter, norm)
    raise SolverError(f"no convergence after {max_iter} iterations; final residual {norm:.3e}")


def volume(point: CrossRatioPoint, wb: WeakBranching) -> float:
    return float(sum(s * bloch_wigner(w) for s, w in zip(wb.signs, point.w0)))


# -- cusp cross section ---------------------------------------------------


Side = tuple[int, int, int]  # (tet, vertex, label of the face containing the side)


@dataclass(frozen=True)
class NormalLoop:
    """A closed normal curve given by the sides it exits through.

    Each step ``(tet, vertex, exit)`` stands for an arc inside the cusp
    triangle at ``vertex`` of ``tet`` leaving through the side lying in
    the face ``exit``.
    """

    steps: tuple[Side, ...]

    def to_json(self) -> list[list[int]]:
        return [list(s) for s in self.steps]


@dataclass(frozen=True)
class Arc:
    tet: int
    vertex: int
    entry: int
    exit: int
    corner: int
    ind: int


@dataclass
class CuspCrossSection:
    tri: Triangulation
    wb: WeakBranching
    triangles: tuple[tuple[int, int], ...]
    basis: tuple[NormalLoop, NormalLoop]

    @property
    def euler_characteristic(self) -> int:
        vertices = {self.tri._edge_lookup[(t, v, u)] for t, v in self.triangles for u in range(4) if u != v}
        f = len(self.triangles)
        return len(vertices) - 3 * f // 2 + f

    def triangle_ccw(self, tet: int, v: int, x: int, y: int, z: int) -> bool:
        """Whether corners ``(x, y, z)`` run counterclockwise in triangle ``(tet, v)``."""
        odd = parity((v, x, y, z)) == 1
        return odd if self.tri.orientations[tet] == 1 else not odd

    def across(self, side: Side) -> Side:
        t, v, x = side
        t2, p = self.tri.neighbor(t, x)
        return (t2, p[v], p[x])

    def arcs(self, loop: NormalLoop) -> list[Arc]:
        steps = loop.steps
        if not steps:
            raise ValueError("not a normal loop: empty")
        out = []
        for i, (t, v, x) in enumerate(steps):
            pt, pv, px = self.across(steps[i - 1])
            if (pt, pv) != (t, v):
                raise ValueError(f"not a normal loop: step {i} does not continue step {i - 1}")
            if px == x:
                raise ValueError(f"not a normal loop: enters and exits triangle {(t, v)} through one side")
            corner = next(c for c in range(4) if c not in (v, px, x))
            ind = 1 if self.triangle_ccw(t, v, corner, x, px) else -1
            out.append(Arc(t, v, px, x, corner, ind))
        return out

    def reverse(self, loop: NormalLoop) -> NormalLoop:
        return NormalLoop(tuple((a.tet, a.vertex, a.entry) for a in reversed(self.arcs(loop))))

    def concatenate(self, a: NormalLoop, b: NormalLoop) -> NormalLoop | None:
        """Join two loops sharing a triangle, or ``None`` if they do not meet normally."""
        for i, sa in enumerate(a.steps):
            for j, sb in enumerate(b.steps):
                if sa[:2] != sb[:2]:
                    continue
                # run a up to its arc in the shared triangle, switch to b
                steps = a.steps[:i] + b.steps[j:] + b.steps[:j] + a.steps[i:]
                try:
                    self.arcs(NormalLoop(steps))
                except ValueError:
                    continue
                return NormalLoop(steps)
        return None

    def corner_pair(self, arc: Arc) -> int:
        return self.wb.pair_of(arc.tet, arc.vertex, arc.corner)

    def exponent_table(self, loop: NormalLoop) -> np.ndarray:
        """``E[t, k] = sum *_v ind`` so that ``hol = prod w_k^t ** E[t, k]``."""
        E = np.zeros((self.tri.num_tets, 3), dtype=int)
        for a in self.arcs(loop):
            E[a.tet, self.corner_pair(a)] += self.wb.signs[a.tet] * a.ind
        return E

    def charge_table(self, loop: NormalLoop) -> np.ndarray:
        """``E[t, k] = sum ind`` so that ``gamma(c) = sum c_k^t E[t, k]``."""
        E = np.zeros((self.tri.num_tets, 3), dtype=int)
        for a in self.arcs(loop):
            E[a.tet, self.corner_pair(a)] += a.ind
        return E

    def intersection(self, a: NormalLoop, b: NormalLoop) -> int:
        """Algebraic intersection number ``a . b`` on the boundary torus."""
        crossings: dict[Side, int] = {}
        for arc in self.arcs(a):
            side = (arc.tet, arc.vertex, arc.exit)
            crossings[side] = crossings.get(side, 0) + 1
            other = self.across(side)
            crossings[other] = crossings.get(other, 0) - 1
        total = 0
        arcs_b = self.arcs(b)
        for i, arc in enumerate(arcs_b):
            nxt = arcs_b[(i + 1) % len(arcs_b)]
            t2, p = self.tri.neighbor(arc.tet, arc.exit)
            back = {p[x]: x for x in range(4)}
            target = back[nxt.corner]
            if target == arc.corner:
                continue
            # b is pushed along the side from its corner to the next one
            far = arc.exit
            orient = 1 if self.triangle_ccw(arc.tet, arc.vertex, arc.corner, target, far) else -1
            total += -orient * crossings.get((arc.tet, arc.vertex, arc.exit), 0)
        return total

    def holonomy(self, point: CrossRatioPoint, loop: NormalLoop) -> complex:
        E = self.exponent_table(loop)
        return complex(np.prod(point.shapes ** E))

    def log_holonomy(self, point: CrossRatioPoint, loop: NormalLoop) -> complex:
        """``d_w`` on ``loop``: the log of the holonomy with Im in ``(-pi, pi]``."""
        E = self.exponent_table(loop)
        return reduce_log(complex(np.sum(E * point.logs)))


def simple_loops(section: CuspCrossSection, max_length: int = 8) -> list[NormalLoop]:
    """Closed normal loops visiting each triangle at most once, up to rotation."""
    order = {tv: i for i, tv in enumerate(section.triangles)}
    found: list[NormalLoop] = []
    seen: set[tuple[Side, ...]] = set()

    def extend(path: list[Side], visited: set[tuple[int, int]]) -> None:
        nt, nv, nx = section.across(path[-1])
        start = (path[0][0], path[0][1])
        if (nt, nv) == start:
            if nx != path[0][2]:
                rot = min(tuple(path[i:] + path[:i]) for i in range(len(path)))
                if rot not in seen:
                    seen.add(rot)
                    found.append(NormalLoop(tuple(path)))
            return
        if (nt, nv) in visited or len(path) >= max_length:
            return
        if order[(nt, nv)] < order[start]:
            return
        for x in range(4):
            if x in (nv, nx):
                continue
            path.append((nt, nv, x))
            visited.add((nt, nv))
            extend(path, visited)
            visited.discard((nt, nv))
            path.pop()

    for tv in section.triangles:
        t, v = tv
        for x in range(4):
            if x == v:
                continue
            extend([(t, v, x)], {tv})
    found.sort(key=lambda l: (len(l.steps), l.steps))
    return found


def greedy_basis(section: CuspCrossSection) -> tuple[NormalLoop, NormalLoop]:
    loops = simple_loops(section)
    best = None
    for a, b in itertools.combinations(loops, 2):
        n = section.intersection(a, b)
        if abs(n) == 1:
            key = (len(a.steps) + len(b.steps), a.steps, b.steps)
            if best is None or key < best[0]:
                best = (key, a, b if n == 1 else section.reverse(b))
    if best is None:
        raise ValueError("no pair of normal loops with intersection number 1")
    return best[1], best[2]


def build_cusp_section(
    tri: Triangulation, wb: WeakBranching, basis: Sequence[Sequence[Sequence[int]]] | None = None
) -> CuspCrossSection:
    """Boundary triangulation of the single cusp with a basis ``(l, m)``.

    A stored basis (lists of steps) is used when given; otherwise the
    shortest pair of simple loops with ``l . m = 1`` is chosen.
    """
    cusps = [vc for vc in tri.vertex_classes if vc.ideal]
    if len(cusps) != 1 or len(tri.vertex_classes) != 1:
        raise ValueError(f"expected a single cusp, found {len(cusps)} ideal of {len(tri.vertex_classes)} vertices")
    triangles = tuple(sorted(cusps[0].members))
    section = CuspCrossSection(tri, wb, triangles, (NormalLoop(()), NormalLoop(())))
    if section.euler_characteristic != 0:
        raise ValueError("boundary is not a torus")
    if basis is not None:
        l, m = (NormalLoop(tuple(tuple(int(x) for x in s) for s in loop)) for loop in basis)  # type: ignore[misc]
        section.arcs(l)
        section.arcs(m)
        if section.intersection(l, m) != 1:
            raise ValueError("stored basis loops do not have intersection number 1")
    else:
        l, m = greedy_basis(section)
    section.basis = (l, m)
    return section


def solve_complete(
    system: EquationSystem, section: CuspCrossSection, guess: Sequence[complex], tol: float = DEFAULT_TOL
) -> CrossRatioPoint:
    """Newton solve of the edge equations together with trivial cusp holonomy on both basis loops."""
    extra = [(section.exponent_table(loop), 0j) for loop in section.basis]
    return solve(system, guess, tol=tol, extra=extra)


def follow_holonomy(
    system: EquationSystem,
    section: CuspCrossSection,
    start: CrossRatioPoint,
    target: complex,
    steps: int = 20,
    loop: int = 0,
    tol: float = DEFAULT_TOL,
) -> list[CrossRatioPoint]:
    """Points along the linear homotopy of the log holonomy of basis ``loop``.

    The holonomy moves from its value at ``start`` to ``target`` in
    ``steps`` equal increments; each point is corrected by Newton from the
    previous one.
    """
    E = section.exponent_table(section.basis[loop])
    h0 = section.log_holonomy(start, section.basis[loop])
    path = []
    current = list(start.w0)
    for i in range(1, steps + 1):
        goal = h0 + (complex(target) - h0) * i / steps
        pt = solve(system, current, tol=tol, extra=[(E, goal)])
        path.append(pt)
        current = list(pt.w0)
    return path


def bulk_loops(tri: Triangulation) -> list[tuple[tuple[int, int, int], ...]]:
    """Fundamental cycles of the dual graph as ``(tet, entry face, exit face)`` steps."""
    parent: dict[int, tuple[int, int, int] | None] = {0: None}
    queue = [0]
    tree: set[int] = set()
    while queue:
        t = queue.pop(0)
        for f in range(4):
            t2, perm, idx = tri.gluing[(t, f)]
            if t2 not in parent:
                parent[t2] = (t, f, idx)
                tree.add(idx)
                queue.append(t2)

    def path_to_root(t: int) -> list[tuple[int, int, int]]:
        # tree crossings (tet, exit face, pairing) leading from the root to t
        out = []
        while parent[t] is not None:
            out.append(parent[t])
            t = parent[t][0]
        return list(reversed(out))

    loops = []
    for idx, p in enumerate(tri.pairings):
        if idx in tree:
            continue
        crossings = [(t, f) for t, f, _ in path_to_root(p.tet_a)] + [(p.tet_a, p.face_a)]
        for t, f, _ in reversed(path_to_root(p.tet_b)):
            t2, perm, _ = tri.gluing[(t, f)]
            crossings.append((t2, perm[f]))
        loops.append(_crossings_to_steps(tri, crossings))
    return loops


def _crossings_to_steps(tri: Triangulation, crossings: list[tuple[int, int]]) -> tuple[tuple[int, int, int], ...]:
    """Turn exit crossings ``(tet, face)`` into ``(tet, entry, exit)`` steps."""
    steps = []
    for i, (t, f) in enumerate(crossings):
        pt, pf = crossings[i - 1]
        t_in, perm = tri.neighbor(pt, pf)
        if t_in != t:
            raise AssertionError("bulk loop does not close up")
        steps.append((t, perm[pf], f))
    return tuple(steps)
