"""Tensor networks of decorated triangulations and their state sums."""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .decor import DecoratedTriangulation, WeightData, intersection_pairing, quantum_roots
from .dilog import epsilon, face_matrices, matrix_R, rogers_R1
from .triangulation import Triangulation, WeakBranching, count_q, edge_roles

Label = Hashable


class NetworkError(ValueError):
    """The network wiring is inconsistent."""


@dataclass
class TensorNetwork:
    """Tensors with one label per axis; each label must occur exactly twice."""

    tensors: list[np.ndarray]
    labels: list[tuple[Label, ...]]
    names: list[str] = field(default_factory=list)

    def check(self) -> None:
        counts: dict[Label, int] = {}
        for arr, labs in zip(self.tensors, self.labels):
            if arr.ndim != len(labs):
                raise NetworkError(f"slot arity mismatch: {arr.ndim} axes but {len(labs)} labels")
            for lab in labs:
                counts[lab] = counts.get(lab, 0) + 1
        bad = [lab for lab, n in counts.items() if n != 2]
        if bad:
            raise NetworkError(f"slots not wired exactly once: {bad}")
        dims: dict[Label, int] = {}
        for arr, labs in zip(self.tensors, self.labels):
            for d, lab in zip(arr.shape, labs):
                if dims.setdefault(lab, d) != d:
                    raise NetworkError(f"dimension mismatch on slot {lab}")


def tetrahedron_tensor(N: int, sign: int, roots: np.ndarray, c: Sequence[int]) -> np.ndarray:
    """The tensor ``R_N`` re-indexed by the states on ``(F0, F1, F2, F3)``."""
    return matrix_R(N, sign, tuple(c), complex(roots[0]), complex(roots[1])).by_faces()


def build_network(dt: DecoratedTriangulation, N: int) -> TensorNetwork:
    """One tensor per tetrahedron and one ``Q^r`` per dual edge.

    An edge of color ``r`` carries ``Q^(-r)`` read as a linear map from the
    source face space to the target face space, so its row index sits on
    the target face.
    """
    tri, wb = dt.tri, dt.wb
    branch = quantum_roots(dt.point, dt.f, dt.c, N, wb)
    fm = face_matrices(N)
    tensors, labels, names = [], [], []
    for t in range(tri.num_tets):
        tensors.append(tetrahedron_tensor(N, wb.signs[t], branch.roots[t], dt.c.values[t]))
        labels.append(tuple(("slot", t, wb.orders[t][j]) for j in range(4)))
        names.append(f"tet{t}")
    for e in wb.dual_edges:
        src, dst = ("slot",) + e.source, ("slot",) + e.target
        if e.color == 0:
            tensors.append(np.eye(N, dtype=complex))
        else:
            tensors.append(fm.Q_power(-e.color).T)
        labels.append((src, dst))
        names.append(f"Q^{e.color}[{e.index}]")
    net = TensorNetwork(tensors, labels, names)
    net.check()
    return net


@dataclass(frozen=True)
class ContractionResult:
    value: complex
    order: tuple[tuple[int, int], ...]


def contract(net: TensorNetwork) -> ContractionResult:
    """Pairwise contraction, always merging the pair with the smallest result.

    Ties go to the pair with the lowest indices, so the summation order is
    deterministic.
    """
    net.check()
    items = [(arr, list(labs)) for arr, labs in zip(net.tensors, net.labels)]
    alive = list(range(len(items)))
    trace: list[tuple[int, int]] = []
    while len(alive) > 1:
        best = None
        for a, b in itertools.combinations(alive, 2):
            la, lb = items[a][1], items[b][1]
            shared = set(la) & set(lb)
            if not shared and len(alive) > 2:
                continue
            out = [x for x in la if x not in shared] + [x for x in lb if x not in shared]
            size = math.prod(
                items[a][0].shape[la.index(x)] if x in la else items[b][0].shape[lb.index(x)] for x in out
            )
            key = (size, a, b)
            if best is None or key < best[0]:
                best = (key, a, b)
        _, a, b = best  # type: ignore[misc]
        arr_a, la = items[a]
        arr_b, lb = items[b]
        shared = [x for x in la if x in lb]
        res = np.tensordot(arr_a, arr_b, axes=([la.index(x) for x in shared], [lb.index(x) for x in shared]))
        labs = [x for x in la if x not in shared] + [x for x in lb if x not in shared]
        # a label occurring twice in the result is a self-loop: trace it
        while True:
            dup = next((x for x in labs if labs.count(x) == 2), None)
            if dup is None:
                break
            i, j = [k for k, x in enumerate(labs) if x == dup]
            res = np.trace(res, axis1=i, axis2=j)
            labs = [x for k, x in enumerate(labs) if k not in (i, j)]
        items[a] = (res, labs)
        alive.remove(b)
        trace.append((a, b))
    arr, labs = items[alive[0]]
    while labs:
        x = labs[0]
        i, j = [k for k, y in enumerate(labs) if y == x]
        arr = np.trace(arr, axis1=i, axis2=j)
        labs = [y for k, y in enumerate(labs) if k not in (i, j)]
    return ContractionResult(complex(arr), tuple(trace))


def naive_contract(net: TensorNetwork) -> complex:
    """Brute-force sum over every state of every slot."""
    net.check()
    slots = sorted({lab for labs in net.labels for lab in labs}, key=repr)
    N = net.tensors[0].shape[0]
    index = {lab: i for i, lab in enumerate(slots)}
    total = 0j
    for state in itertools.product(range(N), repeat=len(slots)):
        term = 1 + 0j
        for arr, labs in zip(net.tensors, net.labels):
            term *= arr[tuple(state[index[lab]] for lab in labs)]
            if term == 0:
                break
        total += term
    return total


# -- normalization ----------------------------------------------------------


def diagonal_balance(tri: Triangulation, wb: WeakBranching, reference: Sequence[tuple[int, int]] | None = None) -> int:
    """``sum_e (n+(e) - n-(e))`` against auxiliary edge orientations.

    ``reference[e]`` is an oriented abstract edge ``(tet, (a, b))`` pointing
    along the auxiliary orientation of ``e``; by default the least incident
    abstract edge carrying its branching orientation.
    """
    roles = edge_roles(tri, wb)
    total = 0
    for e in tri.edge_classes:
        if reference is None:
            t0, (a0, b0) = min(
                (t, (min(a, b), max(a, b))) for t, (a, b) in e.incidences
            )
            if wb.position(t0, a0) > wb.position(t0, b0):
                a0, b0 = b0, a0
        else:
            t0, (a0, b0) = reference[e.index]
        ref_dir = tri.edge_orientation(t0, a0, b0)
        for t, (a, b) in e.incidences:
            key = (t, (min(a, b), max(a, b)))
            if not roles[key].role.startswith("diagonal"):
                continue
            tail, head = (a, b) if wb.position(t, a) < wb.position(t, b) else (b, a)
            total += 1 if tri.edge_orientation(t, tail, head) == ref_dir else -1
    return total


def manifold_counts(tri: Triangulation) -> tuple[int, int]:
    """``(v, l)``: manifold vertices and edges whose interior is made of manifold points."""
    v = sum(1 for vc in tri.vertex_classes if not vc.ideal)
    return v, len(tri.edge_classes)


def c_factor(tri: Triangulation, wb: WeakBranching, N: int, reference=None) -> int:
    balance = diagonal_balance(tri, wb, reference)
    if balance % 2:
        raise AssertionError("odd diagonal balance contradicts the even-diagonal property")
    v, l = manifold_counts(tri)
    return epsilon(N) ** ((v + l - balance // 2) % 2)


def normalization(tri: Triangulation, wb: WeakBranching, N: int) -> complex:
    """``a_N = N^-v phi_N^-q c_N``."""
    if N == 1:
        return 1 + 0j
    v, _ = manifold_counts(tri)
    phi = face_matrices(N).phi
    return N ** (-v) * phi ** (-count_q(tri, wb)) * c_factor(tri, wb, N)


# -- state sums ----------------------------------------------------------------


def symmetrization_alpha(dt: DecoratedTriangulation, N: int) -> complex:
    roots = quantum_roots(dt.point, dt.f, dt.c, N, dt.wb).roots
    m = (N - 1) // 2
    out = 1 + 0j
    for t, c in enumerate(dt.c.values):
        out *= (roots[t, 0] ** (-c[1]) * roots[t, 1] ** c[0]) ** m
    return out


def symmetrization_alpha_exponential(dt: DecoratedTriangulation, N: int) -> complex:
    """The same factor written as one exponential of a sum over tetrahedra."""
    logs = dt.point.logs
    m = (N - 1) // 2
    total = 0j
    for t, (f, c) in enumerate(zip(dt.f.values, dt.c.values)):
        s = dt.wb.signs[t]
        lq = [(logs[t, k] + 1j * math.pi * (N + 1) * (f[k] - s * c[k])) / N for k in range(2)]
        total += -c[1] * lq[0] + c[0] * lq[1]
    return cmath.exp(m * total)


def alpha_closed_formula(w: WeightData, N: int) -> complex:
    """``exp((N-1)/4 ((1/N) <<k_c, k_f>> + i pi <<r(k_c), i*(h_f)>>_2))``, defined up to sign."""
    restricted_hf = [round(((kf - dw) / (1j * math.pi)).real) % 2 for kf, dw in zip(w.k_f, w.d_w)]
    kc = [int(x) for x in w.k_c]
    pair = intersection_pairing(kc, w.k_f)
    pair2 = intersection_pairing([x % 2 for x in kc], restricted_hf) % 2
    return cmath.exp((N - 1) / 4 * (pair / N + 1j * math.pi * pair2))


@dataclass(frozen=True)
class StateSumValue:
    value: complex
    ambiguity: int  # order k of the group mu_k of phases the value is defined up to

    def canonical(self) -> tuple[float, float]:
        return canonical_phase(self.value, self.ambiguity)

    def power(self) -> complex:
        return self.value ** self.ambiguity


def canonical_phase(value: complex, ambiguity: int) -> tuple[float, float]:
    """``(|value|, arg(value) mod 2 pi / k)`` in ``[0, 2 pi / k)``; phase is NaN at 0."""
    mod = abs(value)
    if mod == 0:
        return 0.0, float("nan")
    period = 2 * math.pi / ambiguity
    ph = cmath.phase(value) % period
    if period - ph < 1e-12 * period:
        ph = 0.0
    return mod, ph


def same_class(a: complex, b: complex, k: int, rel: float = 1e-8) -> bool:
    """Whether ``a = zeta b`` for some ``k``-th root of unity ``zeta``."""
    scale = max(abs(a), abs(b), 1e-300)
    if abs(abs(a) - abs(b)) > rel * scale:
        return False
    if abs(b) == 0:
        return abs(a) == 0
    ratio = a / b
    n = round(cmath.phase(ratio) * k / (2 * math.pi))
    return abs(ratio - cmath.exp(2j * math.pi * n / k)) < rel * 10


def ambiguity_order(N: int) -> int:
    """``mu_N`` for ``N = 1 mod 4``, ``mu_2N`` otherwise."""
    return N if N % 4 == 1 else 2 * N


@dataclass(frozen=True)
class StateSumResult:
    N: int
    raw: complex
    a_N: complex
    value: complex
    alpha: complex
    reduced: complex
    ambiguity: int
    order: tuple[tuple[int, int], ...]

    @property
    def state_sum(self) -> StateSumValue:
        return StateSumValue(self.value, self.ambiguity)

    def to_json(self) -> dict:
        def cx(z: complex) -> list[float]:
            return [z.real, z.imag]

        mod, ph = canonical_phase(self.value, self.ambiguity)
        return {
            "N": self.N,
            "value": cx(self.value),
            "a_N": cx(self.a_N),
            "alpha_N": cx(self.alpha),
            "reduced": cx(self.reduced),
            "raw": cx(self.raw),
            "ambiguity": f"mu_{self.ambiguity}",
            "canonical": {"modulus": mod, "phase": ph},
            "contraction_order": [list(p) for p in self.order],
        }


def state_sum(dt: DecoratedTriangulation, N: int) -> StateSumResult:
    """``H_N = a_N * (full contraction)`` together with ``alpha_N`` and ``H_N,red``."""
    if N == 1:
        val = classical_state_sum(dt)
        return StateSumResult(1, val, 1, val, 1, val, 6, ())
    net = build_network(dt, N)
    res = contract(net)
    a = normalization(dt.tri, dt.wb, N)
    value = a * res.value
    alpha = symmetrization_alpha(dt, N)
    return StateSumResult(N, res.value, a, value, alpha, value / alpha, ambiguity_order(N), res.order)


def classical_state_sum(dt: DecoratedTriangulation) -> complex:
    """``H_1``: the product of the classical tensors, for genuine branchings."""
    if not dt.wb.is_genuine():
        raise ValueError("the N = 1 state sum is only computed for genuine branchings")
    out = 1 + 0j
    for t, (w0, f) in enumerate(zip(dt.point.w0, dt.f.values)):
        out *= rogers_R1(w0, f[0], f[1], dt.wb.signs[t])
    return out
