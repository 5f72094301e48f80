"""Integer decorations: flattenings and charges, their weights and quantum roots.

Decorations are stored per tetrahedron in branching coordinates, as
triples indexed by the opposite-edge pairs ``E0, E1, E2`` of the
tetrahedron's vertex order.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .gluing import CrossRatioPoint, CuspCrossSection, bulk_loops, principal_log, shapes_of
from .lattice import InfeasibleSystemError, solve_integer
from .triangulation import Triangulation, WeakBranching, pair_index

INTEGRALITY_TOL = 1e-6

Triple = tuple[int, int, int]


class DecorationError(ValueError):
    """A decoration violates a defining constraint."""


@dataclass(frozen=True)
class Flattening:
    values: tuple[Triple, ...]
    kernel: tuple[tuple[int, ...], ...] = ()

    def shifted(self, tet: int, k: int, amount: int) -> "Flattening":
        vals = [list(v) for v in self.values]
        vals[tet][k] += amount
        return replace(self, values=tuple(tuple(v) for v in vals))  # type: ignore[arg-type]


@dataclass(frozen=True)
class Charge:
    values: tuple[Triple, ...]
    kernel: tuple[tuple[int, ...], ...] = ()


def _near_int(x: float, what: str) -> int:
    n = round(x)
    if abs(x - n) > INTEGRALITY_TOL:
        raise InfeasibleSystemError(f"violated congruence: {what} = {x:.6g} is not an integer")
    return int(n)


def _triples(x: Sequence[int], s: int) -> tuple[Triple, ...]:
    return tuple((int(x[3 * t]), int(x[3 * t + 1]), int(x[3 * t + 2])) for t in range(s))


def _edge_table(tri: Triangulation, wb: WeakBranching, signed: bool) -> np.ndarray:
    table = np.zeros((len(tri.edge_classes), tri.num_tets, 3), dtype=int)
    for e in tri.edge_classes:
        for t, (a, b) in e.incidences:
            table[e.index, t, wb.pair_of(t, a, b)] += wb.signs[t] if signed else 1
    return table


def bulk_table(tri: Triangulation, wb: WeakBranching, loop: Sequence[tuple[int, int, int]]) -> np.ndarray:
    """Count of faced edge pairs along a loop in the triangulation."""
    table = np.zeros((tri.num_tets, 3), dtype=int)
    for t, a, b in loop:
        table[t, wb.pair_of(t, a, b)] += 1
    return table


def _parity_rows(
    rows: list[list[int]], rhs: list[int], names: list[str], tables: Sequence[np.ndarray],
    targets: Sequence[int], nvars: int, label: str,
) -> int:
    """Append ``sum E x - 2 y = h`` with fresh auxiliary ``y``; return the new variable count."""
    extra = len(tables)
    for row in rows:
        row.extend([0] * extra)
    for i, (E, h) in enumerate(zip(tables, targets)):
        row = list(E.reshape(-1)) + [0] * (nvars - E.size) + [0] * extra
        row[nvars + i] = -2
        rows.append(row)
        rhs.append(int(h) % 2)
        names.append(f"{label} parity on loop {i}")
    return nvars + extra


def solve_flattenings(
    point: CrossRatioPoint,
    section: CuspCrossSection,
    k_f: Sequence[complex] | None = None,
    h_f: Sequence[int] | None = None,
    fixed: Mapping[tuple[int, int], int] | None = None,
) -> Flattening:
    """Integer flattening with boundary weight ``k_f`` on the basis ``(l, m)``.

    ``k_f`` defaults to ``d_w``, the principal log holonomies.  ``h_f``
    prescribes parities on :func:`bulk_loops`.  ``fixed`` pins entries
    ``(tet, k)``.
    """
    tri, wb = section.tri, section.wb
    s = tri.num_tets
    logs = point.logs
    ipi = 1j * math.pi
    rows: list[list[int]] = []
    rhs: list[int] = []
    names: list[str] = []
    for t in range(s):
        row = [0] * (3 * s)
        row[3 * t : 3 * t + 3] = [1, 1, 1]
        rows.append(row)
        rhs.append(_near_int((-sum(logs[t]) / ipi).real, f"tet {t} log sum / i pi"))
        names.append(f"tet {t} sum")
    for e, E in enumerate(_edge_table(tri, wb, signed=True)):
        rows.append(list(E.reshape(-1)))
        val = -np.sum(E * logs) / ipi
        if abs(val.imag) > INTEGRALITY_TOL:
            raise DecorationError(f"point does not solve the edge equation at edge {e}")
        rhs.append(_near_int(val.real, f"edge {e} log sum / i pi"))
        names.append(f"edge {e}")
    if k_f is None:
        k_f = [section.log_holonomy(point, l) for l in section.basis]
    for name, loop, target in zip("lm", section.basis, k_f):
        E = section.exponent_table(loop)
        val = (complex(target) - np.sum(E * logs)) / ipi
        if abs(val.imag) > INTEGRALITY_TOL:
            raise InfeasibleSystemError(
                f"violated congruence: k_f({name}) differs from d_w({name}) by a non-multiple of i pi"
            )
        rows.append(list(E.reshape(-1)))
        rhs.append(_near_int(val.real, f"(k_f({name}) - log part) / i pi"))
        names.append(f"k_f({name})")
    for (t, k), v in (fixed or {}).items():
        row = [0] * (3 * s)
        row[3 * t + k] = 1
        rows.append(row)
        rhs.append(int(v))
        names.append(f"fixed f[{t}][{k}]")
    nvars = 3 * s
    if h_f is not None:
        tables = [bulk_table(tri, wb, loop) for loop in bulk_loops(tri)]
        nvars = _parity_rows(rows, rhs, names, tables, h_f, nvars, "h_f")
    sol = solve_integer(rows, rhs, names)
    kernel = tuple(k[: 3 * s] for k in sol.kernel if any(k[: 3 * s]))
    return Flattening(_triples(sol.particular, s), kernel)


def solve_charges(
    section: CuspCrossSection,
    k_c: Sequence[int] = (0, 0),
    h_c: Sequence[int] | None = None,
    hamiltonian: Sequence[int] = (),
    fixed: Mapping[tuple[int, int], int] | None = None,
) -> Charge:
    """Integer global charge with boundary weight ``k_c`` on ``(l, m)``.

    Edges listed in ``hamiltonian`` get total charge 0, all others 2.
    """
    tri, wb = section.tri, section.wb
    s = tri.num_tets
    rows: list[list[int]] = []
    rhs: list[int] = []
    names: list[str] = []
    for t in range(s):
        row = [0] * (3 * s)
        row[3 * t : 3 * t + 3] = [1, 1, 1]
        rows.append(row)
        rhs.append(1)
        names.append(f"tet {t} sum")
    for e, E in enumerate(_edge_table(tri, wb, signed=False)):
        rows.append(list(E.reshape(-1)))
        rhs.append(0 if e in hamiltonian else 2)
        names.append(f"edge {e} total charge")
    for name, loop, target in zip("lm", section.basis, k_c):
        rows.append(list(section.charge_table(loop).reshape(-1)))
        rhs.append(int(target))
        names.append(f"k_c({name})")
    for (t, k), v in (fixed or {}).items():
        row = [0] * (3 * s)
        row[3 * t + k] = 1
        rows.append(row)
        rhs.append(int(v))
        names.append(f"fixed c[{t}][{k}]")
    nvars = 3 * s
    if h_c is not None:
        tables = [bulk_table(tri, wb, loop) for loop in bulk_loops(tri)]
        nvars = _parity_rows(rows, rhs, names, tables, h_c, nvars, "h_c")
    sol = solve_integer(rows, rhs, names)
    kernel = tuple(k[: 3 * s] for k in sol.kernel if any(k[: 3 * s]))
    return Charge(_triples(sol.particular, s), kernel)


# -- quantum roots ------------------------------------------------------------


@dataclass(frozen=True)
class QuantumLogBranch:
    N: int
    logs: np.ndarray  # l_{k,N,*,c} per tet, shape (s, 3)
    roots: np.ndarray  # exp(l_{k,N,*,c}), evaluated from the integer part reduced mod 2N


def quantum_logs(w0: complex, f: Triple, c: Triple, N: int, sign: int) -> np.ndarray:
    logs = [principal_log(x) for x in shapes_of(w0)]
    return np.array([(logs[k] + 1j * math.pi * (N + 1) * (f[k] - sign * c[k])) / N for k in range(3)])


def quantum_root_values(w0: complex, f: Triple, c: Triple, N: int, sign: int) -> np.ndarray:
    """``exp(l_{k,N,*,c})`` depending on ``f`` and ``c`` only through ``(N + 1)(f - *c) mod 2N``."""
    logs = [principal_log(x) for x in shapes_of(w0)]
    turns = [((N + 1) * (f[k] - sign * c[k])) % (2 * N) for k in range(3)]
    return np.array([cmath.exp(logs[k] / N) * cmath.exp(1j * math.pi * turns[k] / N) for k in range(3)])


def quantum_roots(
    point: CrossRatioPoint,
    f: Flattening,
    c: Charge,
    N: int,
    wb: WeakBranching,
    tri: Triangulation | None = None,
    tol: float = 1e-10,
) -> QuantumLogBranch:
    """``N``-th root moduli; checks the tetrahedral relation and, given ``tri``, the edge equations."""
    signs = wb.signs
    data = list(zip(point.w0, f.values, c.values, signs))
    logs = np.array([quantum_logs(w, fv, cv, N, s) for w, fv, cv, s in data])
    roots = np.array([quantum_root_values(w, fv, cv, N, s) for w, fv, cv, s in data])
    branch = QuantumLogBranch(N, logs, roots)
    zeta = cmath.exp(2j * math.pi / N)
    m = (N - 1) // 2
    for t, s in enumerate(signs):
        expected = -(zeta ** (s * m))
        if abs(np.prod(roots[t]) - expected) > tol:
            raise DecorationError(f"tetrahedral relation fails at tet {t}: sheet data inconsistent")
    if tri is not None:
        for e, total in enumerate(edge_root_products(tri, wb, roots)):
            C = total_edge_charges(tri, wb, c)[e]
            expected = cmath.exp(-1j * math.pi * (N + 1) * C / N)
            fsum = sum(signs[t] * f.values[t][wb.pair_of(t, a, b)] for t, (a, b) in tri.edge_classes[e].incidences)
            expected *= (-1) ** (fsum % 2)
            if abs(total - expected) > tol:
                raise DecorationError(f"edge equation fails at edge {e}: {total} vs {expected}")
    return branch


def edge_root_products(tri: Triangulation, wb: WeakBranching, roots: np.ndarray) -> list[complex]:
    """``W'(e) = prod_(E -> e) w'(E) ** *_E`` for every edge."""
    out = []
    for e in tri.edge_classes:
        p = 1 + 0j
        for t, (a, b) in e.incidences:
            p *= roots[t, wb.pair_of(t, a, b)] ** wb.signs[t]
        out.append(complex(p))
    return out


def total_edge_charges(tri: Triangulation, wb: WeakBranching, c: Charge) -> list[int]:
    return [
        sum(c.values[t][wb.pair_of(t, a, b)] for t, (a, b) in e.incidences) for e in tri.edge_classes
    ]


def total_edge_logs(tri: Triangulation, wb: WeakBranching, point: CrossRatioPoint, f: Flattening) -> list[complex]:
    """``L(e) = sum *_E (log w(E) + i pi f(E))``."""
    logs = point.logs
    out = []
    for e in tri.edge_classes:
        total = 0j
        for t, (a, b) in e.incidences:
            k = wb.pair_of(t, a, b)
            total += wb.signs[t] * (logs[t, k] + 1j * math.pi * f.values[t][k])
        out.append(total)
    return out


# -- weights ------------------------------------------------------------------


@dataclass(frozen=True)
class WeightData:
    k_f: tuple[complex, complex]
    k_c: tuple[int, int]
    h_f: tuple[int, ...]
    h_c: tuple[int, ...]
    d_w: tuple[complex, complex]
    basis: tuple = field(default=(), compare=False)

    def matches(self, other: "WeightData", tol: float = 1e-9) -> bool:
        """Equal integer data and complex data within ``tol``."""
        return (
            self.k_c == other.k_c
            and self.h_f == other.h_f
            and self.h_c == other.h_c
            and all(abs(a - b) < tol for a, b in zip(self.k_f, other.k_f))
            and all(abs(a - b) < tol for a, b in zip(self.d_w, other.d_w))
        )

    def to_json(self) -> dict:
        return {
            "k_f": [[z.real, z.imag] for z in self.k_f],
            "k_c": list(self.k_c),
            "h_f": list(self.h_f),
            "h_c": list(self.h_c),
            "d_w": [[z.real, z.imag] for z in self.d_w],
            "basis": [list(map(list, l.steps)) for l in self.basis],
        }


def weights(point: CrossRatioPoint, f: Flattening, c: Charge, section: CuspCrossSection) -> WeightData:
    tri, wb = section.tri, section.wb
    logs = point.logs
    F = np.array(f.values)
    Cv = np.array(c.values)
    k_f, k_c, d_w = [], [], []
    for loop in section.basis:
        E = section.exponent_table(loop)
        kf = complex(np.sum(E * (logs + 1j * math.pi * F)))
        kc = int(np.sum(section.charge_table(loop) * Cv))
        dw = section.log_holonomy(point, loop)
        disc = (kf - dw) / (1j * math.pi)
        n = round(disc.real)
        if abs(disc - n) > INTEGRALITY_TOL:
            raise DecorationError("k_f differs from d_w by a non-multiple of i pi")
        parity_f = int(np.sum(section.charge_table(loop) * F)) % 2
        if (n - parity_f) % 2:
            raise DecorationError("i pi discrepancy of k_f disagrees with the restricted h_f")
        k_f.append(kf)
        k_c.append(kc)
        d_w.append(dw)
    loops = bulk_loops(tri)
    h_f = tuple(int(np.sum(bulk_table(tri, wb, l) * F)) % 2 for l in loops)
    h_c = tuple(int(np.sum(bulk_table(tri, wb, l) * Cv)) % 2 for l in loops)
    return WeightData(tuple(k_f), tuple(k_c), h_f, h_c, tuple(d_w), section.basis)  # type: ignore[arg-type]


def intersection_pairing(k: Sequence, k2: Sequence):
    """``<<k, k'>> = k(l) k'(m) - k(m) k'(l)`` for a basis with ``l . m = 1``."""
    return k[0] * k2[1] - k[1] * k2[0]


def intersection_pairing_mod2(k: Sequence[int], k2: Sequence[int]) -> int:
    return int(intersection_pairing(k, k2)) % 2


# -- decorated triangulations ------------------------------------------------


@dataclass(frozen=True)
class DecoratedTriangulation:
    """A weakly branched triangulation with shapes, flattening and charge."""

    tri: Triangulation
    wb: WeakBranching
    point: CrossRatioPoint
    f: Flattening
    c: Charge


def rebranch_tet(
    old_order: Sequence[int], old_sign: int, new_order: Sequence[int], new_sign: int,
    w0: complex, f: Triple, c: Triple,
) -> tuple[complex, Triple, Triple]:
    """Express one tetrahedron's decoration in a new vertex order.

    The ambient cross ratio ``w ** sign`` of each physical edge, the ambient
    flattening ``sign * f`` and the charge are kept.
    """
    pos = {v: i for i, v in enumerate(old_order)}
    w = shapes_of(w0)
    new_w: list[complex] = [0j] * 3
    new_f = [0] * 3
    new_c = [0] * 3
    for k, (a, b) in enumerate(((0, 1), (1, 2), (0, 2))):
        ko = pair_index(pos[new_order[a]], pos[new_order[b]])
        new_w[k] = w[ko] if old_sign == new_sign else 1 / w[ko]
        new_f[k] = new_sign * old_sign * f[ko]
        new_c[k] = c[ko]
    return new_w[0], tuple(new_f), tuple(new_c)  # type: ignore[return-value]
